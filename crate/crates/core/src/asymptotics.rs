//! Numerical experiments on the semi-classical behaviour of `e^{-(t/k)Δ_k}`.
//!
//! Near a critical point `p` with chart coordinates `x`, the scaled kernel
//! `A_{(k),p}(t, x, y) = k^{-n/2} e^{-(t/k)Δ_k}(p + x/√k, p + y/√k)` is compared
//! with the model kernel of the harmonic-oscillator system at `p`. Off-node
//! points are evaluated by (bi)linear interpolation over the cells of the
//! family carrying the matching form component.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::complex::{CellComplex, CellFamily};
use crate::error::{Error, Result};
use crate::model_oscillator::{model_kernel_component, model_sign_profile, ModelCriticalPoint, MultiIndex, Sign};
use crate::morse_function::{CriticalPoint, ScalarField};
use crate::report::{fitted_slope, Check, ExperimentReport, Value};
use crate::spectral::{HeatEvaluation, WittenSystem};

/// Largest `√k·h` accepted for a convergence run.
pub const RESOLUTION_LIMIT: f64 = 0.05;

/// Default `ε` in `U_p^k = B_{k^{-1/2+ε}}(p)`.
pub const DEFAULT_EPSILON: f64 = 0.25;

/// The chart at one critical point.
#[derive(Clone, Debug)]
pub struct LocalChart<'a> {
    complex: &'a CellComplex,
    point: &'a CriticalPoint,
    /// `axes[c]` is the manifold axis used as chart axis `c`.
    axes: Vec<usize>,
    model: ModelCriticalPoint,
}

/// Interpolation nodes `(cell, weight)` around one point.
#[derive(Clone, Debug)]
struct Stencil {
    nodes: Vec<(usize, f64)>,
    node_distance: f64,
}

impl<'a> LocalChart<'a> {
    pub fn new(complex: &'a CellComplex, field: &'a ScalarField, critical_point: usize) -> Result<Self> {
        let point = field.critical_points.get(critical_point).ok_or_else(|| {
            Error::Config(format!(
                "critical point {critical_point} does not exist (field has {})",
                field.critical_points.len()
            ))
        })?;
        let model = ModelCriticalPoint::new(complex.dim(), point.index)?;
        Ok(Self { complex, point, axes: point.chart_axes(), model })
    }

    pub fn model(&self) -> ModelCriticalPoint {
        self.model
    }

    pub fn critical_point(&self) -> &CriticalPoint {
        self.point
    }

    /// Quadratic-window radius in scaled coordinates.
    pub fn scaled_window(&self, k: f64) -> f64 {
        self.point.window * k.sqrt()
    }

    /// Manifold position of the scaled chart point `z`.
    pub fn to_manifold(&self, z: &[f64], k: f64) -> Vec<f64> {
        let mut pos = self.point.location.clone();
        for (c, &axis) in self.axes.iter().enumerate() {
            pos[axis] = (pos[axis] + z[c] / k.sqrt()).rem_euclid(self.complex.periods()[axis]);
        }
        pos
    }

    /// Scaled chart coordinates of a manifold point.
    pub fn to_chart(&self, pos: &[f64], k: f64) -> Vec<f64> {
        let d = self.complex.displacement(pos, &self.point.location);
        self.axes.iter().map(|&axis| d[axis] * k.sqrt()).collect()
    }

    /// The cell family carrying the `dx^I` component (chart indices, 1-based).
    pub fn family(&self, component: &MultiIndex) -> Result<&'a CellFamily> {
        let mut axes: Vec<usize> = component.entries().iter().map(|&i| self.axes[i - 1]).collect();
        axes.sort_unstable();
        self.complex
            .families(component.degree())
            .iter()
            .find(|f| f.axes == axes)
            .ok_or_else(|| Error::Probe(format!("no cell family for component {:?}", component.entries())))
    }

    fn stencil(&self, family: &CellFamily, pos: &[f64]) -> Stencil {
        let h = self.complex.spacing();
        let n = pos.len();
        let mut base = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        let mut dist2 = 0.0;
        for a in 0..n {
            let u = (pos[a] - family.offset[a]) / h[a];
            let i0 = u.floor();
            let theta = u - i0;
            base.push(i0 as i64);
            frac.push(theta);
            let near = theta.min(1.0 - theta) * h[a];
            dist2 += near * near;
        }
        let mut nodes = Vec::with_capacity(1 << n);
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut lattice = base.clone();
            for a in 0..n {
                if corner >> a & 1 == 1 {
                    weight *= frac[a];
                    lattice[a] += 1;
                } else {
                    weight *= 1.0 - frac[a];
                }
            }
            if weight != 0.0 {
                nodes.push((self.complex.lattice_cell(family, &lattice), weight));
            }
        }
        Stencil { nodes, node_distance: dist2.sqrt() }
    }

    fn check_window(&self, z: &[f64], k: f64) -> Result<()> {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.scaled_window(k) * (1.0 + 1e-12) {
            return Err(Error::Probe(format!(
                "scaled point {z:?} maps to distance {:.4} from the critical point, outside its quadratic window {}",
                norm / k.sqrt(),
                self.point.window
            )));
        }
        Ok(())
    }

    /// `A_{(k),p}` for the `dx^I ⊗ dx^I` component, plus the largest scaled
    /// distance from either point to its nearest interpolation node.
    fn scaled_value(
        &self,
        heat: &HeatEvaluation<'_>,
        k: f64,
        family: &CellFamily,
        x: &[f64],
        y: &[f64],
    ) -> Result<(f64, f64)> {
        self.check_window(x, k)?;
        self.check_window(y, k)?;
        let sx = self.stencil(family, &self.to_manifold(x, k));
        let sy = self.stencil(family, &self.to_manifold(y, k));
        let mut value = 0.0;
        for &(a, wa) in &sx.nodes {
            for &(b, wb) in &sy.nodes {
                value += wa * wb * heat.entry(a, b);
            }
        }
        let prefactor = k.powf(-0.5 * self.complex.dim() as f64);
        Ok((prefactor * value, k.sqrt() * sx.node_distance.max(sy.node_distance)))
    }
}

/// One evaluation of the scaled kernel against the model kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledKernelProbe {
    pub critical_point: usize,
    pub k: f64,
    pub t: f64,
    pub component: MultiIndex,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub measured: f64,
    pub reference: f64,
    /// Largest distance to an interpolation node, in scaled units.
    pub node_distance: f64,
}

/// `A_{(k),p}(t, x, y)` from the decomposition of `Δ_k^{(r)}` held by `system`.
pub fn scaled_kernel(
    system: &WittenSystem<'_>,
    critical_point: usize,
    component: &MultiIndex,
    k: f64,
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<ScaledKernelProbe> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("the scaled kernel needs k > 0, got {k}")));
    }
    let chart = LocalChart::new(system.complex, system.field, critical_point)?;
    let n = system.dim();
    for z in [x, y] {
        if z.len() != n {
            return Err(Error::Shape { expected: n, got: z.len() });
        }
    }
    let family = chart.family(component)?;
    let dec = system.decomposition(k, component.degree())?;
    let heat = dec.heat(t / k)?;
    let (measured, node_distance) = chart.scaled_value(&heat, k, family, x, y)?;
    let reference = model_kernel_component(chart.model(), component, t, x, y)?;
    Ok(ScaledKernelProbe {
        critical_point,
        k,
        t,
        component: component.clone(),
        x: x.to_vec(),
        y: y.to_vec(),
        measured,
        reference,
        node_distance,
    })
}

/// Tensor grid of scaled chart points `[-half_width, half_width]^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointGrid {
    pub half_width: f64,
    pub count: usize,
}

impl PointGrid {
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = if self.count == 1 {
            vec![0.0]
        } else {
            (0..self.count)
                .map(|i| -self.half_width + 2.0 * self.half_width * i as f64 / (self.count - 1) as f64)
                .collect()
        };
        (0..n).map(|_| axis.iter().copied()).multi_cartesian_product().collect()
    }
}

fn check_increasing(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if !values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config(format!("{name} must be strictly increasing, got {values:?}")));
    }
    Ok(())
}

fn check_resolution(complex: &CellComplex, k: f64) -> Result<()> {
    let scaled_spacing = k.sqrt() * complex.max_spacing();
    if scaled_spacing > RESOLUTION_LIMIT {
        return Err(Error::Resolution { scaled_spacing, limit: RESOLUTION_LIMIT });
    }
    Ok(())
}

fn base_report(system: &WittenSystem<'_>, name: &str, columns: &[&str]) -> ExperimentReport {
    ExperimentReport::new(name, columns.iter().copied())
        .with_manifest("grid", system.complex.descriptor())
        .with_manifest("f", field_descriptor(system.field))
}

/// Short description of a field for manifests.
pub fn field_descriptor(field: &ScalarField) -> String {
    let points = field
        .critical_points
        .iter()
        .map(|cp| {
            let loc = cp.location.iter().map(|v| format!("{v:.6}")).join(":");
            format!("{loc}@{}", cp.index)
        })
        .join(";");
    let window = field.critical_points.iter().map(|cp| cp.window).fold(f64::INFINITY, f64::min);
    format!("crit={points},rho0={window}")
}

/// Tolerances and sampling of a convergence run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceSettings {
    pub grid: PointGrid,
    /// Largest accepted relative sup error at the largest `k`.
    pub final_tolerance: f64,
    /// Relative tolerance of the `∂_t A = -Δ_model A` cross-check.
    pub derivative_tolerance: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self { grid: PointGrid { half_width: 2.0, count: 9 }, final_tolerance: 0.05, derivative_tolerance: 1e-3 }
    }
}

/// Sup-norm distance between the scaled kernel and the model kernel over a
/// point grid, for every `(k, t)`.
pub fn convergence_report(
    system: &WittenSystem<'_>,
    critical_point: usize,
    r: usize,
    k_list: &[f64],
    t_list: &[f64],
    settings: &ConvergenceSettings,
) -> Result<ExperimentReport> {
    check_increasing("k_list", k_list)?;
    if t_list.is_empty() || t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Config(format!("t_list must be nonempty and positive, got {t_list:?}")));
    }
    if r > system.dim() {
        return Err(Error::Degree { degree: r, dim: system.dim() });
    }
    if k_list[0] <= 0.0 {
        return Err(Error::Config("k_list entries must be positive".into()));
    }
    for &k in k_list {
        check_resolution(system.complex, k)?;
    }
    let chart = LocalChart::new(system.complex, system.field, critical_point)?;
    let points = settings.grid.points(system.dim());
    let k_max = *k_list.last().unwrap();
    let reach = points.iter().map(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    if reach > chart.scaled_window(k_max) {
        return Err(Error::Probe(format!(
            "point grid reaches |x| = {reach}, beyond the quadratic window at k = {k_max}"
        )));
    }
    let components: Vec<MultiIndex> = MultiIndex::all(system.dim(), r).collect();
    let families = components.iter().map(|c| chart.family(c)).collect::<Result<Vec<_>>>()?;
    system.prefetch(&k_list.iter().map(|&k| (k, r)).collect::<Vec<_>>())?;

    let mut report = base_report(
        system,
        "convergence",
        &[
            "k [1]",
            "t [time]",
            "sup_abs_error [density]",
            "sup_model [density]",
            "relative_error [1]",
            "max_node_distance [scaled length]",
            "grid_in_window [bool]",
        ],
    )
    .with_manifest("critical_point", critical_point)
    .with_manifest("degree", r);

    let mut errors = vec![Vec::new(); t_list.len()];
    for &k in k_list {
        let dec = system.decomposition(k, r)?;
        // Outside the window the kernel is still evaluated, but only for reporting.
        let in_window = reach <= chart.scaled_window(k);
        for (ti, &t) in t_list.iter().enumerate() {
            let heat = dec.heat(t / k)?;
            let (mut sup_err, mut sup_model, mut node) = (0.0f64, 0.0f64, 0.0f64);
            for (component, family) in components.iter().zip(&families) {
                for x in &points {
                    for y in &points {
                        let (value, dist) = scaled_value_unchecked(&chart, &heat, k, family, x, y);
                        let model = model_kernel_component(chart.model(), component, t, x, y)?;
                        sup_err = sup_err.max((value - model).abs());
                        sup_model = sup_model.max(model.abs());
                        node = node.max(dist);
                    }
                }
            }
            let relative = sup_err / sup_model;
            errors[ti].push(relative);
            report.push_row(vec![
                k.into(),
                t.into(),
                sup_err.into(),
                sup_model.into(),
                relative.into(),
                node.into(),
                in_window.into(),
            ]);
        }
    }

    for (ti, &t) in t_list.iter().enumerate() {
        let errs = &errors[ti];
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        report.push_check(Check::new(
            format!("monotone t={t}"),
            monotone,
            format!("relative sup errors along k: {}", errs.iter().map(|e| format!("{e:.3e}")).join(" ")),
        ));
        let last = *errs.last().unwrap();
        report.push_check(Check::new(
            format!("final t={t}"),
            last < settings.final_tolerance,
            format!("relative sup error {last:.4e} at k = {k_max} (tolerance {})", settings.final_tolerance),
        ));
    }

    let derivative = time_derivative_check(system, &chart, &components[0], families[0], k_list[0], t_list[0])?;
    report.push_check(Check::new(
        "time derivative",
        derivative <= settings.derivative_tolerance,
        format!(
            "max |dA/dt + L A| / max |A| = {derivative:.3e} at k = {}, t = {} (tolerance {})",
            k_list[0], t_list[0], settings.derivative_tolerance
        ),
    ));
    // The operator-level identity needs the test Gaussian inside the window,
    // which rules out the smallest k when the window is narrow.
    let mut fitted = Vec::new();
    let mut skipped = Vec::new();
    for &k in k_list {
        match scaling_identity(system, critical_point, &components[0], k) {
            Ok(identity) => fitted.push(identity),
            Err(Error::Probe(_)) => skipped.push(k),
            Err(e) => return Err(e),
        }
    }
    let detail = fitted
        .iter()
        .map(|id| format!("k={}: defect {:.3e} (tolerance {:.3e})", id.k, id.relative_defect(), id.tolerance))
        .chain(skipped.iter().map(|k| format!("k={k}: skipped, Gaussian exceeds the window")))
        .join("; ");
    report.push_check(Check::new(
        "scaling identity",
        !fitted.is_empty() && fitted.iter().all(ScalingIdentity::passed),
        detail,
    ));
    Ok(report)
}

/// Interpolated value without the window check; used for rows at small `k`
/// whose grid points leave the window.
fn scaled_value_unchecked(
    chart: &LocalChart<'_>,
    heat: &HeatEvaluation<'_>,
    k: f64,
    family: &CellFamily,
    x: &[f64],
    y: &[f64],
) -> (f64, f64) {
    let sx = chart.stencil(family, &chart.to_manifold(x, k));
    let sy = chart.stencil(family, &chart.to_manifold(y, k));
    let mut value = 0.0;
    for &(a, wa) in &sx.nodes {
        for &(b, wb) in &sy.nodes {
            value += wa * wb * heat.entry(a, b);
        }
    }
    let prefactor = k.powf(-0.5 * chart.complex.dim() as f64);
    (prefactor * value, k.sqrt() * sx.node_distance.max(sy.node_distance))
}

/// `max |∂_t A + L A| / max |A|` at scaled points near the origin, with `∂_t`
/// a central difference and `L` the model operator applied in the first
/// argument by a fourth-order difference with a step of two grid cells.
fn time_derivative_check(
    system: &WittenSystem<'_>,
    chart: &LocalChart<'_>,
    component: &MultiIndex,
    family: &CellFamily,
    k: f64,
    t: f64,
) -> Result<f64> {
    let n = system.dim();
    let dec = system.decomposition(k, component.degree())?;
    let spacing = system.complex.spacing();
    let steps: Vec<f64> = chart.axes.iter().map(|&a| 2.0 * k.sqrt() * spacing[a]).collect();
    let reach = 2.0 * steps.iter().fold(0.0f64, |m, &s| m.max(s)) * (n as f64).sqrt();
    let window = chart.scaled_window(k);
    let y = vec![0.0; n];
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| [-1.0, -0.5, 0.0, 0.5, 1.0].into_iter())
        .multi_cartesian_product()
        .filter(|z: &Vec<f64>| z.iter().map(|v| v * v).sum::<f64>().sqrt() + reach <= window)
        .collect();
    if points.is_empty() {
        return Err(Error::Probe(format!("window too small for the derivative check at k = {k}")));
    }
    let signs = model_sign_profile(chart.model(), component);
    let dt = 1e-3 * t;
    let now = dec.heat(t / k)?;
    let later = dec.heat((t + dt) / k)?;
    let earlier = dec.heat((t - dt) / k)?;
    let value = |heat: &HeatEvaluation<'_>, x: &[f64]| chart.scaled_value(heat, k, family, x, &y).map(|v| v.0);

    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for x in &points {
        let a = value(&now, x)?;
        let da_dt = (value(&later, x)? - value(&earlier, x)?) / (2.0 * dt);
        let mut la = 0.0;
        for c in 0..n {
            let shifted = |m: f64| {
                let mut z = x.clone();
                z[c] += m * steps[c];
                value(&now, &z)
            };
            let second =
                (-shifted(2.0)? + 16.0 * shifted(1.0)? - 30.0 * a + 16.0 * shifted(-1.0)? - shifted(-2.0)?)
                    / (12.0 * steps[c] * steps[c]);
            let shift = match signs.signs()[c] {
                Sign::Minus => -1.0,
                Sign::Plus => 1.0,
            };
            la += -second + x[c] * x[c] * a + shift * a;
        }
        worst = worst.max((da_dt + la).abs());
        scale = scale.max(a.abs());
    }
    Ok(worst / scale)
}

/// Operator-level scaling check: `Δ_k` applied to `g(√k (· - p))` against
/// `k (L g)(√k (· - p))` for a narrow offset Gaussian `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingIdentity {
    pub k: f64,
    pub max_defect: f64,
    /// `max |k L g|`.
    pub scale: f64,
    pub tolerance: f64,
}

impl ScalingIdentity {
    pub fn relative_defect(&self) -> f64 {
        self.max_defect / self.scale
    }

    pub fn passed(&self) -> bool {
        self.relative_defect() <= self.tolerance
    }
}

const GAUSSIAN_WIDTH: f64 = 0.25;
const GAUSSIAN_OFFSET: f64 = 0.1;

pub fn scaling_identity(
    system: &WittenSystem<'_>,
    critical_point: usize,
    component: &MultiIndex,
    k: f64,
) -> Result<ScalingIdentity> {
    let chart = LocalChart::new(system.complex, system.field, critical_point)?;
    let family = chart.family(component)?;
    let op = system.operator(k, component.degree())?;
    let n = system.dim();
    let signs: Vec<f64> = model_sign_profile(chart.model(), component)
        .signs()
        .iter()
        .map(|s| if *s == Sign::Minus { -1.0 } else { 1.0 })
        .collect();
    let s2 = GAUSSIAN_WIDTH * GAUSSIAN_WIDTH;
    let window = chart.scaled_window(k);
    let centre = vec![GAUSSIAN_OFFSET; n];
    if centre.iter().map(|c| c * c).sum::<f64>().sqrt() + 6.0 * GAUSSIAN_WIDTH > window {
        return Err(Error::Probe(format!("Gaussian does not fit the quadratic window at k = {k}")));
    }

    let cells = system.complex.cells(component.degree());
    let mut cochain = vec![0.0; cells.len()];
    let mut expected = vec![0.0; cells.len()];
    for (i, cell) in cells.iter().enumerate() {
        let z = chart.to_chart(&cell.center, k);
        if cell.family != family_index(system.complex, family) || z.iter().map(|v| v * v).sum::<f64>().sqrt() > window
        {
            continue;
        }
        let w: Vec<f64> = z.iter().zip(&centre).map(|(a, b)| a - b).collect();
        let g = (-w.iter().map(|v| v * v).sum::<f64>() / (2.0 * s2)).exp();
        let lg: f64 = (0..n).map(|c| -(w[c] * w[c] / (s2 * s2) - 1.0 / s2) + z[c] * z[c] + signs[c]).sum::<f64>() * g;
        cochain[i] = g * cell.measure;
        expected[i] = k * lg;
    }
    let applied = op.apply(&cochain);
    let mut max_defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, cell) in cells.iter().enumerate() {
        max_defect = max_defect.max((applied[i] / cell.measure - expected[i]).abs());
        scale = scale.max(expected[i].abs());
    }
    let h = system.complex.max_spacing();
    let scaled_h2 = k * h * h / s2;
    Ok(ScalingIdentity { k, max_defect, scale, tolerance: 10.0 * (h * h + scaled_h2) })
}

fn family_index(complex: &CellComplex, family: &CellFamily) -> usize {
    complex.families(family.degree).iter().position(|f| f == family).unwrap_or(usize::MAX)
}

/// Settings of the annulus probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusSettings {
    pub k: f64,
    pub t: f64,
    /// Inner radius is `2D`.
    pub d: f64,
    pub epsilon: f64,
    pub radii: usize,
    /// Required decay exponent: fitted slope must be at most `-n0`.
    pub n0: f64,
}

impl Default for AnnulusSettings {
    fn default() -> Self {
        Self { k: 400.0, t: 1.0, d: 2.0, epsilon: DEFAULT_EPSILON, radii: 8, n0: 4.0 }
    }
}

/// Admissible annulus radii `[2D, k^ε]` in scaled units.
pub fn annulus_radii(settings: &AnnulusSettings) -> Result<Vec<f64>> {
    let lo = 2.0 * settings.d;
    let hi = settings.k.powf(settings.epsilon);
    if !(settings.d > 1.0) {
        return Err(Error::Config(format!("D must exceed 1, got {}", settings.d)));
    }
    if lo >= hi || settings.radii < 2 {
        return Err(Error::Config(format!(
            "no admissible radii: [2D, k^eps] = [{lo}, {hi:.4}] with {} samples",
            settings.radii
        )));
    }
    Ok((0..settings.radii).map(|i| lo + (hi - lo) * i as f64 / (settings.radii - 1) as f64).collect())
}

/// Diagonal of the scaled kernel along the first chart axis on `2D ≤ |x| ≤ k^ε`.
pub fn annulus_decay_probe(
    system: &WittenSystem<'_>,
    critical_point: usize,
    r: usize,
    settings: &AnnulusSettings,
) -> Result<ExperimentReport> {
    let radii = annulus_radii(settings)?;
    let chart = LocalChart::new(system.complex, system.field, critical_point)?;
    let k = settings.k;
    let hi = *radii.last().unwrap();
    if hi > chart.scaled_window(k) {
        return Err(Error::Probe(format!(
            "annulus radius {hi:.4} exceeds the scaled window {:.4} at k = {k}",
            chart.scaled_window(k)
        )));
    }
    let components: Vec<MultiIndex> = MultiIndex::all(system.dim(), r).collect();
    let families = components.iter().map(|c| chart.family(c)).collect::<Result<Vec<_>>>()?;
    let dec = system.decomposition(k, r)?;
    let heat = dec.heat(settings.t / k)?;

    let mut report = base_report(
        system,
        "annulus_decay",
        &["radius [scaled length]", "diagonal [density]", "model [density]", "node_distance [scaled length]"],
    )
    .with_manifest("critical_point", critical_point)
    .with_manifest("degree", r)
    .with_manifest("k", k)
    .with_manifest("t", settings.t)
    .with_manifest("eps", settings.epsilon)
    .with_manifest("D", settings.d);

    let mut values = Vec::with_capacity(radii.len());
    for &radius in &radii {
        let mut x = vec![0.0; system.dim()];
        x[0] = radius;
        let (mut value, mut model, mut node) = (0.0, 0.0, 0.0f64);
        for (component, family) in components.iter().zip(&families) {
            let (v, dist) = chart.scaled_value(&heat, k, family, &x, &x)?;
            value += v;
            model += model_kernel_component(chart.model(), component, settings.t, &x, &x)?;
            node = node.max(dist);
        }
        values.push(value);
        report.push_row(vec![radius.into(), value.into(), model.into(), node.into()]);
    }
    let monotone = values.windows(2).all(|w| w[1] < w[0]);
    report.push_check(Check::new("monotone", monotone, format!("{} radii", radii.len())));
    let positive = values.iter().all(|&v| v > 0.0);
    let slope = if positive {
        let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
        let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        fitted_slope(&lx, &ly)
    } else {
        f64::NAN
    };
    report.push_check(Check::new(
        "log-log slope",
        slope <= -settings.n0,
        format!("fitted slope {slope:.3} (required <= -{})", settings.n0),
    ));
    Ok(report)
}

/// Settings of the far-field probe.
#[derive(Clone, Debug, PartialEq)]
pub struct FarFieldSettings {
    pub k_list: Vec<f64>,
    pub t: f64,
    pub epsilon: f64,
    /// Required shrink factor per quadrupling of `k`.
    pub ratio: f64,
}

impl Default for FarFieldSettings {
    fn default() -> Self {
        Self { k_list: vec![16.0, 64.0, 256.0], t: 1.0, epsilon: DEFAULT_EPSILON, ratio: 10.0 }
    }
}

/// Sup of the diagonal kernel density `e^{-(t/k)Δ_k}(x, x)` over cells outside
/// every `B_{k^{-1/2+ε}}(p)`.
pub fn far_field_decay_probe(
    system: &WittenSystem<'_>,
    r: usize,
    settings: &FarFieldSettings,
) -> Result<ExperimentReport> {
    check_increasing("k_list", &settings.k_list)?;
    if settings.k_list[0] <= 0.0 {
        return Err(Error::Config("k_list entries must be positive".into()));
    }
    if r > system.dim() {
        return Err(Error::Degree { degree: r, dim: system.dim() });
    }
    let complex = system.complex;
    let cells = complex.cells(r);
    // Distance from each cell to the nearest critical point.
    let clearance: Vec<f64> = cells
        .iter()
        .map(|c| {
            system
                .field
                .critical_points
                .iter()
                .map(|cp| complex.distance(&c.center, &cp.location))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let farthest = (0..cells.len()).max_by(|&a, &b| clearance[a].total_cmp(&clearance[b])).unwrap();
    let mut outside_sets = Vec::with_capacity(settings.k_list.len());
    for &k in &settings.k_list {
        let radius = k.powf(settings.epsilon - 0.5);
        let outside: Vec<usize> = (0..cells.len()).filter(|&i| clearance[i] > radius).collect();
        if outside.is_empty() {
            return Err(Error::Config(format!(
                "windows of radius {radius:.4} at k = {k} cover the whole complex"
            )));
        }
        outside_sets.push((radius, outside));
    }
    system.prefetch(&settings.k_list.iter().map(|&k| (k, r)).collect::<Vec<_>>())?;

    let mut columns = vec!["k [1]", "window_radius [length]", "cells_outside [1]", "sup_diagonal [density]"];
    columns.extend(["sup_x [length]", "sup_y [length]"].iter().take(complex.dim()));
    columns.push("farthest_diagonal [density]");
    let mut report = base_report(system, "far_field_decay", &columns)
        .with_manifest("degree", r)
        .with_manifest("t", settings.t)
        .with_manifest("eps", settings.epsilon);

    let mut sups = Vec::new();
    let mut far_values = Vec::new();
    for (&k, (radius, outside)) in settings.k_list.iter().zip(&outside_sets) {
        let dec = system.decomposition(k, r)?;
        let diagonal = dec.heat(settings.t / k)?.diagonal();
        let arg = *outside.iter().max_by(|&&a, &&b| diagonal[a].total_cmp(&diagonal[b])).unwrap();
        let mut row: Vec<Value> = vec![k.into(), (*radius).into(), outside.len().into(), diagonal[arg].into()];
        row.extend(cells[arg].center.iter().map(|&c| Value::from(c)));
        row.push(diagonal[farthest].into());
        report.push_row(row);
        sups.push(diagonal[arg]);
        far_values.push(diagonal[farthest]);
    }
    for (i, w) in settings.k_list.windows(2).enumerate() {
        let required = settings.ratio.powf((w[1] / w[0]).log(4.0));
        let achieved = sups[i] / sups[i + 1];
        report.push_check(Check::new(
            format!("shrink k={}->{}", w[0], w[1]),
            achieved >= required,
            format!("sup ratio {achieved:.4} (required >= {required:.4})"),
        ));
    }
    let decreasing = far_values.windows(2).all(|w| w[1] < w[0]);
    report.push_check(Check::new(
        "farthest point decreasing",
        decreasing,
        format!("values {}", far_values.iter().map(|v| format!("{v:.3e}")).join(" ")),
    ));
    Ok(report)
}

/// Settings of the quadratic-form spot check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BochnerSettings {
    pub k: f64,
    /// `|x|` in scaled units; the annulus is `|x|/(2√k) ≤ |q - p| ≤ k^{-1/2+ε}`.
    pub radius: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    pub constant: f64,
}

impl Default for BochnerSettings {
    fn default() -> Self {
        Self { k: 256.0, radius: 8.0, epsilon: 0.3, trials: 50, seed: 20240601, slack: 0.1, constant: 0.25 }
    }
}

/// Cells of degree `r` in the annulus around a critical point.
pub fn annulus_cells(
    system: &WittenSystem<'_>,
    critical_point: usize,
    r: usize,
    settings: &BochnerSettings,
) -> Result<(f64, f64, Vec<usize>)> {
    let chart = LocalChart::new(system.complex, system.field, critical_point)?;
    let inner = settings.radius / (2.0 * settings.k.sqrt());
    let outer = settings.k.powf(settings.epsilon - 0.5);
    if outer > chart.point.window {
        return Err(Error::Probe(format!(
            "annulus outer radius {outer:.4} exceeds the quadratic window {}",
            chart.point.window
        )));
    }
    let location = &chart.point.location;
    let cells: Vec<usize> = system
        .complex
        .cells(r)
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let d = system.complex.distance(&c.center, location);
            d >= inner && d <= outer
        })
        .map(|(i, _)| i)
        .collect();
    if cells.is_empty() {
        return Err(Error::Config(format!(
            "empty discrete annulus [{inner:.4}, {outer:.4}] at k = {}",
            settings.k
        )));
    }
    Ok((inner, outer, cells))
}

/// Rayleigh quotients of seeded random cochains supported in the annulus,
/// divided by `k |x|²`, plus the minimum over all such cochains.
pub fn bochner_rayleigh_check(
    system: &WittenSystem<'_>,
    critical_point: usize,
    r: usize,
    settings: &BochnerSettings,
) -> Result<ExperimentReport> {
    if settings.trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let (inner, outer, support) = annulus_cells(system, critical_point, r, settings)?;
    let op = system.operator(settings.k, r)?;
    let normalizer = settings.k * settings.radius * settings.radius;
    let threshold = settings.constant * (1.0 - settings.slack);

    let mut report = base_report(system, "bochner", &["trial", "rayleigh [1/length^2]", "ratio [1]"])
        .with_manifest("critical_point", critical_point)
        .with_manifest("degree", r)
        .with_manifest("k", settings.k)
        .with_manifest("x", settings.radius)
        .with_manifest("eps", settings.epsilon)
        .with_manifest("annulus", format!("[{inner:.6},{outer:.6}]"))
        .with_manifest("support_cells", support.len())
        .with_manifest("seed", settings.seed);

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut worst = f64::INFINITY;
    let mut rejected = 0usize;
    let mut trial = 0;
    while trial < settings.trials {
        let mut omega = vec![0.0; op.dim()];
        for &cell in &support {
            omega[cell] = StandardNormal.sample(&mut rng);
        }
        let norm = op.hodge.norm_sq(&omega).sqrt();
        if !(norm > 0.0) {
            rejected += 1;
            continue;
        }
        omega.iter_mut().for_each(|v| *v /= norm);
        let q = op.rayleigh_quotient(&omega)?;
        let ratio = q / normalizer;
        worst = worst.min(ratio);
        report.push_row(vec![trial.into(), q.into(), ratio.into()]);
        trial += 1;
    }
    let dirichlet = op.restricted_minimum(&support)?;
    let dirichlet_ratio = dirichlet / normalizer;
    report.push_row(vec!["dirichlet_min".into(), dirichlet.into(), dirichlet_ratio.into()]);

    report.push_check(Check::new(
        "random trials",
        worst >= threshold,
        format!(
            "min ratio {worst:.4} over {} trials ({rejected} rejected), threshold {threshold:.4}",
            settings.trials
        ),
    ));
    report.push_check(Check::new(
        "annulus minimum",
        dirichlet_ratio >= threshold,
        format!("smallest Rayleigh quotient ratio {dirichlet_ratio:.4}, threshold {threshold:.4}"),
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_circle_complex, build_torus_complex};
    use crate::model_oscillator::oscillator_heat_kernel;
    use crate::morse_function::{blended_morse_function_1d, product_morse_function_2d, MorseParams};
    use std::f64::consts::PI;

    fn circle(n: usize) -> (CellComplex, ScalarField) {
        let c = build_circle_complex(n, 2.0 * PI).unwrap();
        let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 0.1).unwrap();
        (c, f)
    }

    #[test]
    fn k_one_is_plain_density() {
        let (c, f) = circle(128);
        let sys = WittenSystem::new(&c, &f);
        let dec = sys.decomposition(1.0, 0).unwrap();
        let heat = dec.heat(0.5).unwrap();
        // The minimum sits on vertex 32; x = 2h lands on vertex 34.
        let h = c.spacing()[0];
        let probe = scaled_kernel(&sys, 0, &MultiIndex::empty(), 1.0, 0.5, &[2.0 * h], &[0.0]).unwrap();
        assert!((probe.measured - heat.entry(34, 32)).abs() < 1e-13);
        assert!(probe.node_distance < 1e-12);
    }

    #[test]
    fn scaled_kernel_symmetry_and_window() {
        let (c, f) = circle(512);
        let sys = WittenSystem::new(&c, &f);
        let a = scaled_kernel(&sys, 0, &MultiIndex::empty(), 64.0, 1.0, &[0.3], &[-0.71]).unwrap();
        let b = scaled_kernel(&sys, 0, &MultiIndex::empty(), 64.0, 1.0, &[-0.71], &[0.3]).unwrap();
        assert!((a.measured - b.measured).abs() < 1e-10);
        assert!(a.node_distance > 0.0);
        assert!(matches!(
            scaled_kernel(&sys, 0, &MultiIndex::empty(), 64.0, 1.0, &[3.0], &[0.0]),
            Err(Error::Probe(_))
        ));
    }

    #[test]
    fn scaled_kernel_approaches_model_at_minimum() {
        let (c, f) = circle(1024);
        let sys = WittenSystem::new(&c, &f);
        let reference = oscillator_heat_kernel(Sign::Minus, 1.0, 0.0, 0.0).unwrap();
        let errs: Vec<f64> = [16.0, 100.0]
            .iter()
            .map(|&k| {
                let probe = scaled_kernel(&sys, 0, &MultiIndex::empty(), k, 1.0, &[0.0], &[0.0]).unwrap();
                assert_eq!(probe.reference, reference);
                (probe.measured - reference).abs() / reference
            })
            .collect();
        assert!(errs[1] < errs[0]);
        assert!(errs[1] < 0.01, "{errs:?}");
    }

    #[test]
    fn maximum_one_forms_use_minus_oscillator() {
        let (c, f) = circle(1024);
        let sys = WittenSystem::new(&c, &f);
        let component = MultiIndex::new(vec![1], 1).unwrap();
        let probe = scaled_kernel(&sys, 1, &component, 100.0, 1.0, &[0.4], &[-0.2]).unwrap();
        let reference = oscillator_heat_kernel(Sign::Minus, 1.0, 0.4, -0.2).unwrap();
        assert_eq!(probe.reference, reference);
        assert!((probe.measured - reference).abs() < 0.01 * reference);
    }

    #[test]
    fn torus_chart_puts_negative_axes_first() {
        let c = build_torus_complex(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let p = MorseParams { min_pos: 0.5 * PI, max_pos: 1.5 * PI, rho0: 0.35, amplitude: 0.1 };
        let f = product_morse_function_2d(&c, p, p).unwrap();
        // Critical point 2 is (min, max): negative direction is manifold axis 1.
        let chart = LocalChart::new(&c, &f, 2).unwrap();
        assert_eq!(chart.axes, vec![1, 0]);
        let first = MultiIndex::new(vec![1], 2).unwrap();
        assert_eq!(chart.family(&first).unwrap().axes, vec![1]);
        let pos = chart.to_manifold(&[2.0, 0.0], 4.0);
        assert!((pos[1] - (1.5 * PI + 1.0)).abs() < 1e-12 && (pos[0] - 0.5 * PI).abs() < 1e-12);
        let back = chart.to_chart(&pos, 4.0);
        assert!((back[0] - 2.0).abs() < 1e-12 && back[1].abs() < 1e-12);
    }

    #[test]
    fn convergence_rejects_coarse_grids_and_bad_lists() {
        let (c, f) = circle(256);
        let sys = WittenSystem::new(&c, &f);
        let s = ConvergenceSettings::default();
        assert!(matches!(convergence_report(&sys, 0, 0, &[100.0], &[1.0], &s), Err(Error::Resolution { .. })));
        assert!(matches!(convergence_report(&sys, 0, 0, &[4.0, 2.0], &[1.0], &s), Err(Error::Config(_))));
    }

    #[test]
    fn scaling_identity_holds() {
        let (c, f) = circle(2048);
        let sys = WittenSystem::new(&c, &f);
        for k in [36.0, 144.0] {
            let id = scaling_identity(&sys, 0, &MultiIndex::empty(), k).unwrap();
            assert!(id.passed(), "{id:?}");
            let id = scaling_identity(&sys, 1, &MultiIndex::new(vec![1], 1).unwrap(), k).unwrap();
            assert!(id.passed(), "{id:?}");
        }
    }

    #[test]
    fn annulus_radii_and_d_independence() {
        let base = AnnulusSettings::default();
        let radii = annulus_radii(&base).unwrap();
        assert_eq!(radii[0], 4.0);
        assert!((radii.last().unwrap() - 400f64.powf(0.25)).abs() < 1e-12);
        assert!(annulus_radii(&AnnulusSettings { d: 4.0, ..base }).is_err());
        assert!(annulus_radii(&AnnulusSettings { d: 0.5, ..base }).is_err());

        let (c, f) = circle(1024);
        let sys = WittenSystem::new(&c, &f);
        // Radii [3, 4] and [2.5, 4] at k = 256 share the samples 3, 3.5 and 4.
        let settings = AnnulusSettings { k: 256.0, d: 1.5, radii: 3, ..base };
        let a = annulus_decay_probe(&sys, 0, 0, &settings).unwrap();
        let b = annulus_decay_probe(&sys, 0, 0, &AnnulusSettings { d: 1.25, radii: 4, ..settings }).unwrap();
        let (ra, rb) = (a.real_column("radius [scaled length]"), b.real_column("radius [scaled length]"));
        let (va, vb) = (a.real_column("diagonal [density]"), b.real_column("diagonal [density]"));
        for i in 0..3 {
            assert!((ra[i] - rb[i + 1]).abs() < 1e-12);
            assert!((va[i] - vb[i + 1]).abs() <= 1e-12 * va[i].abs());
        }
        assert!(a.check("monotone").unwrap().passed);
    }

    #[test]
    fn far_field_needs_uncovered_cells() {
        let (c, f) = circle(64);
        let sys = WittenSystem::new(&c, &f);
        let settings = FarFieldSettings { k_list: vec![1e-6], ..FarFieldSettings::default() };
        assert!(matches!(far_field_decay_probe(&sys, 0, &settings), Err(Error::Config(_))));
        let settings = FarFieldSettings { k_list: vec![16.0, 64.0], ..FarFieldSettings::default() };
        let report = far_field_decay_probe(&sys, 0, &settings).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.check("farthest point decreasing").unwrap().passed);
    }

    #[test]
    fn bochner_trials_are_reproducible_and_bounded() {
        let (c, f) = circle(1024);
        let sys = WittenSystem::new(&c, &f);
        let settings = BochnerSettings { trials: 5, ..BochnerSettings::default() };
        let a = bochner_rayleigh_check(&sys, 0, 0, &settings).unwrap();
        let b = bochner_rayleigh_check(&sys, 0, 0, &settings).unwrap();
        assert_eq!(a.rows, b.rows);
        let min_ratio = a.real_column("ratio [1]");
        let dirichlet = *min_ratio.last().unwrap();
        assert!(min_ratio.iter().all(|&r| r >= dirichlet - 1e-9));
        // The literal annulus with ε = 1/4 is empty at k = 256, |x| = 8.
        let literal = BochnerSettings { epsilon: 0.25, ..settings };
        assert!(matches!(bochner_rayleigh_check(&sys, 0, 0, &literal), Err(Error::Config(_))));
    }

    #[test]
    fn point_grid_shapes() {
        let g = PointGrid { half_width: 2.0, count: 9 };
        assert_eq!(g.points(1).len(), 9);
        assert_eq!(g.points(2).len(), 81);
        assert_eq!(g.points(1)[0], vec![-2.0]);
        assert_eq!(g.points(1)[4], vec![0.0]);
    }
}
