//! Morse functions with exact quadratic windows around every critical point.
//!
//! A circle profile is built from its derivative: `+s` on the window around
//! the minimum, `-s` on the window around the maximum, and between them a
//! polynomial bridge `ρ₀ + w τ(1-τ)(1-2τ)²` that matches the window slopes and
//! curvatures at both ends, plus a bump whose amplitude closes the function up
//! periodically. The bridge never rises more than `w/16` above `ρ₀`, which keeps
//! local exponent differences of `d_k` small. On the torus the field is the sum
//! of two circle profiles.

use std::io::{Read, Write};

use crate::complex::{CellComplex, Manifold};
use crate::error::{Error, Result};

/// Parameters of a one-dimensional profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorseParams {
    pub min_pos: f64,
    pub max_pos: f64,
    /// Radius of the exact quadratic windows.
    pub rho0: f64,
    /// Height of the connector bump added to the blended derivative.
    pub amplitude: f64,
}

/// Default quadratic-window radius.
pub const DEFAULT_RHO0: f64 = 0.35;

// Gauss–Legendre nodes/weights on [-1, 1]; exact for the degree-6 connector polynomials.
const GL_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// `64 τ³(1-τ)³`: vanishes with two derivatives at both ends, peak 1.
fn bump(t: f64) -> f64 {
    let u = t * (1.0 - t);
    64.0 * u * u * u
}

const BUMP_INTEGRAL: f64 = 16.0 / 35.0;

/// Circle Morse function with one minimum and one maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile1d {
    length: f64,
    params: MorseParams,
    /// Forward distance from the minimum to the maximum.
    gap: f64,
    up_coef: f64,
    down_coef: f64,
    height: f64,
}

impl Profile1d {
    pub fn new(length: f64, params: MorseParams) -> Result<Self> {
        let MorseParams { min_pos, max_pos, rho0, amplitude } = params;
        if !(rho0 > 0.0) || !(amplitude > 0.0) || !min_pos.is_finite() || !max_pos.is_finite() {
            return Err(Error::Construction(format!(
                "window radius and amplitude must be positive, got rho0 = {rho0}, amplitude = {amplitude}"
            )));
        }
        let gap = (max_pos - min_pos).rem_euclid(length);
        if gap <= 2.0 * rho0 || length - gap <= 2.0 * rho0 {
            return Err(Error::Construction(format!(
                "windows of radius {rho0} around {min_pos} and {max_pos} overlap on a circle of length {length}"
            )));
        }
        let mut profile =
            Self { length, params, gap, up_coef: amplitude, down_coef: amplitude, height: 0.0 };
        let (w_up, w_down) = profile.widths();
        let rise = w_up * profile.bridge_integral(1.0, w_up, amplitude);
        let fall = w_down * profile.bridge_integral(1.0, w_down, amplitude);
        if rise > fall {
            profile.down_coef += (rise - fall) / (w_down * BUMP_INTEGRAL);
        } else {
            profile.up_coef += (fall - rise) / (w_up * BUMP_INTEGRAL);
        }
        profile.height = rho0 * rho0 + w_up * profile.bridge_integral(1.0, w_up, profile.up_coef);
        Ok(profile)
    }

    fn widths(&self) -> (f64, f64) {
        let rho0 = self.params.rho0;
        (self.gap - 2.0 * rho0, self.length - self.gap - 2.0 * rho0)
    }

    /// Unsigned connector derivative at relative position `tau ∈ [0, 1]`.
    fn bridge(&self, tau: f64, width: f64, coef: f64) -> f64 {
        let c = 1.0 - 2.0 * tau;
        self.params.rho0 + width * tau * (1.0 - tau) * c * c + coef * bump(tau)
    }

    fn bridge_integral(&self, tau: f64, width: f64, coef: f64) -> f64 {
        let half = 0.5 * tau;
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(&x, w)| w * self.bridge(half * (x + 1.0), width, coef))
            .sum::<f64>()
            * half
    }

    pub fn params(&self) -> &MorseParams {
        &self.params
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Value at the maximum (the minimum has value 0).
    pub fn height(&self) -> f64 {
        self.height
    }

    /// Lower bound for `|f'|` outside the windows.
    pub fn min_connector_slope(&self) -> f64 {
        self.params.rho0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let rho0 = self.params.rho0;
        let s = (x - self.params.min_pos).rem_euclid(self.length);
        let (w_up, w_down) = self.widths();
        if s <= rho0 {
            0.5 * s * s
        } else if s >= self.length - rho0 {
            let u = s - self.length;
            0.5 * u * u
        } else if (s - self.gap).abs() <= rho0 {
            let u = s - self.gap;
            self.height - 0.5 * u * u
        } else if s < self.gap {
            let tau = (s - rho0) / w_up;
            0.5 * rho0 * rho0 + w_up * self.bridge_integral(tau, w_up, self.up_coef)
        } else {
            let tau = (s - self.gap - rho0) / w_down;
            self.height - 0.5 * rho0 * rho0 - w_down * self.bridge_integral(tau, w_down, self.down_coef)
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let rho0 = self.params.rho0;
        let s = (x - self.params.min_pos).rem_euclid(self.length);
        let (w_up, w_down) = self.widths();
        if s <= rho0 {
            s
        } else if s >= self.length - rho0 {
            s - self.length
        } else if (s - self.gap).abs() <= rho0 {
            self.gap - s
        } else if s < self.gap {
            self.bridge((s - rho0) / w_up, w_up, self.up_coef)
        } else {
            -self.bridge((s - self.gap - rho0) / w_down, w_down, self.down_coef)
        }
    }
}

/// Analytic form of a field, kept when it was constructed (not imported).
#[derive(Clone, Debug, PartialEq)]
pub enum FieldProfile {
    Circle(Profile1d),
    Torus(Profile1d, Profile1d),
}

impl FieldProfile {
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self {
            FieldProfile::Circle(p) => p.eval(point[0]),
            FieldProfile::Torus(px, py) => px.eval(point[0]) + py.eval(point[1]),
        }
    }

    pub fn gradient(&self, point: &[f64]) -> Vec<f64> {
        match self {
            FieldProfile::Circle(p) => vec![p.derivative(point[0])],
            FieldProfile::Torus(px, py) => vec![px.derivative(point[0]), py.derivative(point[1])],
        }
    }
}

/// Nondegenerate critical point with its exact quadratic window.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    /// Morse index.
    pub index: usize,
    /// Sign of the Hessian along each manifold axis.
    pub hessian_signs: Vec<i8>,
    /// Radius of the ball on which the field equals its normal form.
    pub window: f64,
    pub value: f64,
}

impl CriticalPoint {
    /// Chart axis order: negative Hessian directions first, so the normal
    /// form reads `-Σ_{i≤l} ½x_i² + Σ_{i>l} ½x_i²`. Entry `c` is the manifold
    /// axis used as chart axis `c`.
    pub fn chart_axes(&self) -> Vec<usize> {
        let mut axes: Vec<usize> = (0..self.hessian_signs.len()).collect();
        axes.sort_by_key(|&a| (self.hessian_signs[a] > 0, a));
        axes
    }

    /// `value + Σ_i s_i ½ x_i²` with `x` the displacement from the critical point.
    pub fn normal_form(&self, displacement: &[f64]) -> f64 {
        self.value
            + displacement
                .iter()
                .zip(&self.hessian_signs)
                .map(|(x, &s)| 0.5 * s as f64 * x * x)
                .sum::<f64>()
    }
}

/// Field samples at every cell barycenter plus critical-point metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    /// `values[r][σ]` = f at the barycenter of the `r`-cell `σ`.
    pub values: Vec<Vec<f64>>,
    pub critical_points: Vec<CriticalPoint>,
    /// Lower bound for `|df|` outside all windows.
    pub min_gradient: f64,
    pub profile: Option<FieldProfile>,
}

fn sample(complex: &CellComplex, profile: &FieldProfile) -> Vec<Vec<f64>> {
    (0..=complex.dim())
        .map(|r| complex.cells(r).iter().map(|c| profile.eval(&c.center)).collect())
        .collect()
}

/// Circle Morse function: minimum at `min_pos`, maximum at `max_pos`.
pub fn blended_morse_function_1d(
    complex: &CellComplex,
    min_pos: f64,
    max_pos: f64,
    rho0: f64,
    amplitude: f64,
) -> Result<ScalarField> {
    if complex.manifold() != Manifold::Circle {
        return Err(Error::Construction("one-dimensional profile needs a circle complex".into()));
    }
    let params = MorseParams { min_pos, max_pos, rho0, amplitude };
    let profile = Profile1d::new(complex.periods()[0], params)?;
    let critical_points = vec![
        CriticalPoint {
            location: vec![min_pos.rem_euclid(profile.length)],
            index: 0,
            hessian_signs: vec![1],
            window: rho0,
            value: 0.0,
        },
        CriticalPoint {
            location: vec![max_pos.rem_euclid(profile.length)],
            index: 1,
            hessian_signs: vec![-1],
            window: rho0,
            value: profile.height(),
        },
    ];
    let field_profile = FieldProfile::Circle(profile);
    Ok(ScalarField {
        values: sample(complex, &field_profile),
        critical_points,
        min_gradient: rho0,
        profile: Some(field_profile),
    })
}

/// Torus Morse function `f(x, y) = φ(x) + ψ(y)` with four critical points.
pub fn product_morse_function_2d(
    complex: &CellComplex,
    phi_x: MorseParams,
    phi_y: MorseParams,
) -> Result<ScalarField> {
    if complex.manifold() != Manifold::Torus {
        return Err(Error::Construction("product profile needs a torus complex".into()));
    }
    let px = Profile1d::new(complex.periods()[0], phi_x)?;
    let py = Profile1d::new(complex.periods()[1], phi_y)?;
    let window = phi_x.rho0.min(phi_y.rho0);
    let mut critical_points = Vec::with_capacity(4);
    for (ys, y, fy) in [(1i8, phi_y.min_pos, 0.0), (-1, phi_y.max_pos, py.height())] {
        for (xs, x, fx) in [(1i8, phi_x.min_pos, 0.0), (-1, phi_x.max_pos, px.height())] {
            critical_points.push(CriticalPoint {
                location: vec![x.rem_euclid(px.length()), y.rem_euclid(py.length())],
                index: usize::from(xs < 0) + usize::from(ys < 0),
                hessian_signs: vec![xs, ys],
                window,
                value: fx + fy,
            });
        }
    }
    let min_gradient = phi_x.rho0.min(phi_y.rho0);
    let field_profile = FieldProfile::Torus(px, py);
    Ok(ScalarField {
        values: sample(complex, &field_profile),
        critical_points,
        min_gradient,
        profile: Some(field_profile),
    })
}

impl ScalarField {
    /// Largest `|f - normal form|` over cells whose barycenter lies in a window.
    pub fn window_defect(&self, complex: &CellComplex) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, values) in self.values.iter().enumerate() {
            for (cell, value) in complex.cells(r).iter().zip(values) {
                for cp in &self.critical_points {
                    let d = complex.displacement(&cell.center, &cp.location);
                    if d.iter().map(|x| x * x).sum::<f64>().sqrt() <= cp.window {
                        worst = worst.max((value - cp.normal_form(&d)).abs());
                    }
                }
            }
        }
        worst
    }

    /// The critical point whose window contains `point`, if any.
    pub fn window_containing(&self, complex: &CellComplex, point: &[f64]) -> Option<usize> {
        self.critical_points
            .iter()
            .position(|cp| complex.distance(point, &cp.location) <= cp.window)
    }

    /// Writes `degree,cell,x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, complex: &CellComplex, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["degree".to_string(), "cell".to_string()];
        header.extend(["x", "y"].iter().take(complex.dim()).map(|s| s.to_string()));
        header.push("value".into());
        out.write_record(&header)?;
        for (r, values) in self.values.iter().enumerate() {
            for (i, (cell, value)) in complex.cells(r).iter().zip(values).enumerate() {
                let mut record = vec![r.to_string(), i.to_string()];
                record.extend(cell.center.iter().map(|c| format!("{c:e}")));
                record.push(format!("{value:e}"));
                out.write_record(&record)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads values written by [`ScalarField::write_csv`]; the result carries
    /// no critical-point metadata.
    pub fn read_csv<R: Read>(complex: &CellComplex, reader: R) -> Result<Self> {
        let mut values: Vec<Vec<Option<f64>>> =
            (0..=complex.dim()).map(|r| vec![None; complex.count(r)]).collect();
        let mut input = csv::Reader::from_reader(reader);
        let parse = |s: &str, line: u64| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("line {line}: bad number {s:?}: {e}")))
        };
        for record in input.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != complex.dim() + 3 {
                return Err(Error::Config(format!("line {line}: expected {} fields", complex.dim() + 3)));
            }
            let r = parse(&record[0], line)? as usize;
            let i = parse(&record[1], line)? as usize;
            let slot = values
                .get_mut(r)
                .and_then(|v| v.get_mut(i))
                .ok_or_else(|| Error::Config(format!("line {line}: no cell {i} in degree {r}")))?;
            let coords: Vec<f64> =
                (0..complex.dim()).map(|a| parse(&record[2 + a], line)).collect::<Result<_>>()?;
            if complex.distance(&coords, &complex.cells(r)[i].center) > 1e-9 {
                return Err(Error::Config(format!("line {line}: barycenter does not match cell {i}")));
            }
            *slot = Some(parse(&record[complex.dim() + 2], line)?);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(r, v)| {
                v.into_iter()
                    .enumerate()
                    .map(|(i, x)| x.ok_or_else(|| Error::Config(format!("missing value for cell {i} in degree {r}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { values, critical_points: Vec::new(), min_gradient: 0.0, profile: None })
    }
}
