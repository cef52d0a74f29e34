//! Harmonic-oscillator model of a nondegenerate critical point.
//!
//! Near a critical point of index `l` in a flat chart, the rescaled Witten
//! Laplacian acting on the `dx^I` component is a sum of one-dimensional
//! oscillators `L^± = -d²/dx² + x² ± 1`, one per axis. Everything here is
//! closed form: Hermite functions, Mehler's kernel, the per-axis heat kernels
//! and their trace integrals, and the products that assemble the model kernel.

use std::f64::consts::PI;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::quadrature;

/// Largest Hermite order supported by [`hermite_function`].
pub const MAX_HERMITE_ORDER: usize = 200;

/// Largest model dimension.
pub const MAX_MODEL_DIM: usize = 4;

/// Normalized Hermite function `Φ_N(x) = H_N(x) e^{-x²/2} / (π^{1/4} √(2^N N!))`.
///
/// Evaluated with the normalized three-term recurrence so that neither `H_N`
/// nor `2^N N!` is ever formed.
pub fn hermite_function(order: usize, x: f64) -> Result<f64> {
    Ok(*hermite_functions(order, x)?.last().unwrap())
}

/// `Φ_0(x), …, Φ_{max_order}(x)`.
pub fn hermite_functions(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if max_order > MAX_HERMITE_ORDER {
        return Err(Error::Range {
            what: "Hermite order",
            value: max_order.to_string(),
            range: "0..=200",
        });
    }
    let mut out = Vec::with_capacity(max_order + 1);
    let phi0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(phi0);
    if max_order >= 1 {
        out.push(2f64.sqrt() * x * phi0);
    }
    for n in 1..max_order {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    Ok(out)
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain(format!("Mehler parameter rho must lie in [0, 1), got {rho}")))
    }
}

fn mehler_kernel(rho: f64, one_minus_rho2: f64, x: f64, y: f64) -> f64 {
    let exponent = (4.0 * x * y * rho - (1.0 + rho * rho) * (x * x + y * y)) / (2.0 * one_minus_rho2);
    exponent.exp() / (PI * one_minus_rho2).sqrt()
}

/// Closed form of `Σ_N ρ^N Φ_N(x) Φ_N(y)` (Mehler's formula with the `π^{-1/2}` folded in).
pub fn mehler_closed(rho: f64, x: f64, y: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(mehler_kernel(rho, 1.0 - rho * rho, x, y))
}

/// Partial sum `Σ_{N ≤ n_max} ρ^N Φ_N(x) Φ_N(y)`.
pub fn mehler_series(rho: f64, x: f64, y: f64, n_max: usize) -> Result<f64> {
    check_rho(rho)?;
    let px = hermite_functions(n_max, x)?;
    let py = hermite_functions(n_max, y)?;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for (a, b) in px.iter().zip(&py) {
        sum += weight * a * b;
        weight *= rho;
    }
    Ok(sum)
}

/// Selects `L^- = -d² + x² - 1` (spectrum `2N`) or `L^+ = -d² + x² + 1` (spectrum `2N + 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn from_i8(s: i8) -> Option<Self> {
        match s {
            -1 => Some(Sign::Minus),
            1 => Some(Sign::Plus),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }

    fn flip(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }

    /// Eigenvalue of `L^±` on `Φ_N`.
    pub fn eigenvalue(self, n: usize) -> f64 {
        match self {
            Sign::Minus => 2.0 * n as f64,
            Sign::Plus => 2.0 * n as f64 + 2.0,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

/// Heat kernel `e^{-tL^±}(x, y)`.
pub fn oscillator_heat_kernel(sign: Sign, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    let rho = (-2.0 * t).exp();
    let base = mehler_kernel(rho, -(-4.0 * t).exp_m1(), x, y);
    Ok(match sign {
        Sign::Minus => base,
        Sign::Plus => rho * base,
    })
}

/// `∫ e^{-tL^±}(x, x) dx`, i.e. the trace of the semigroup: `1/(1-e^{-2t})` for
/// `L^-` and `1/(e^{2t}-1)` for `L^+`.
pub fn oscillator_trace_integral(sign: Sign, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(match sign {
        Sign::Minus => 1.0 / -(-2.0 * t).exp_m1(),
        Sign::Plus => 1.0 / (2.0 * t).exp_m1(),
    })
}

/// Quadrature of the diagonal of `e^{-tL^±}`, independent of the closed-form trace.
pub fn oscillator_trace_integral_quadrature(sign: Sign, t: f64, tol: f64) -> Result<f64> {
    check_time(t)?;
    // The diagonal decays like exp(-tanh(t) x²).
    let decay = t.tanh();
    quadrature::integrate_gaussian_tail(
        |x| oscillator_heat_kernel(sign, t, x, x).unwrap_or(f64::NAN),
        decay,
        tol,
    )
}

/// Dimension and Morse index of a model critical point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelCriticalPoint {
    n: usize,
    l: usize,
}

impl ModelCriticalPoint {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if n == 0 || n > MAX_MODEL_DIM {
            return Err(Error::Range {
                what: "model dimension",
                value: n.to_string(),
                range: "1..=4",
            });
        }
        if l > n {
            return Err(Error::Domain(format!("Morse index {l} exceeds dimension {n}")));
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> usize {
        self.l
    }
}

/// Strictly increasing multi-index `I = (i_1 < … < i_r)` with entries in `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        let increasing = entries.windows(2).all(|w| w[0] < w[1]);
        let in_range = entries.iter().all(|&i| (1..=n).contains(&i));
        if !(increasing && in_range) {
            return Err(Error::Domain(format!(
                "multi-index {entries:?} must be strictly increasing with entries in 1..={n}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// All multi-indices of length `r` for dimension `n`, in lexicographic order.
    pub fn all(n: usize, r: usize) -> impl Iterator<Item = MultiIndex> {
        (1..=n).combinations(r).map(MultiIndex)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0.binary_search(&axis).is_ok()
    }
}

/// Per-axis oscillator selection `s_i = ε_i ε_i^I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignProfile(Vec<Sign>);

impl SignProfile {
    pub fn signs(&self) -> &[Sign] {
        &self.0
    }
}

/// `ε_i = -1` iff `i ≤ l`; `ε_i^I = +1` iff `i ∈ I`.
pub fn model_sign_profile(p: ModelCriticalPoint, multi_index: &MultiIndex) -> SignProfile {
    let signs = (1..=p.n)
        .map(|i| {
            let hessian = if i <= p.l { Sign::Minus } else { Sign::Plus };
            if multi_index.contains(i) {
                hessian
            } else {
                hessian.flip()
            }
        })
        .collect();
    SignProfile(signs)
}

fn check_multi_index(p: ModelCriticalPoint, multi_index: &MultiIndex) -> Result<()> {
    MultiIndex::new(multi_index.0.clone(), p.n).map(|_| ())
}

fn check_point(p: ModelCriticalPoint, x: &[f64]) -> Result<()> {
    if x.len() != p.n {
        return Err(Error::Shape { expected: p.n, got: x.len() });
    }
    Ok(())
}

/// `e^{-tΔ^I_{f,p}}(x, y)`, the product of the per-axis oscillator kernels.
pub fn model_kernel_component(
    p: ModelCriticalPoint,
    multi_index: &MultiIndex,
    t: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_time(t)?;
    check_multi_index(p, multi_index)?;
    check_point(p, x)?;
    check_point(p, y)?;
    let profile = model_sign_profile(p, multi_index);
    profile
        .0
        .iter()
        .zip(x.iter().zip(y))
        .try_fold(1.0, |acc, (&s, (&xi, &yi))| Ok(acc * oscillator_heat_kernel(s, t, xi, yi)?))
}

/// Eigenvalue of `Δ^I_{f,p}` on `Φ_{N_1} ⊗ … ⊗ Φ_{N_n}`.
pub fn model_eigenvalue(p: ModelCriticalPoint, multi_index: &MultiIndex, orders: &[usize]) -> Result<f64> {
    check_multi_index(p, multi_index)?;
    if orders.len() != p.n {
        return Err(Error::Shape { expected: p.n, got: orders.len() });
    }
    let profile = model_sign_profile(p, multi_index);
    Ok(profile.0.iter().zip(orders).map(|(s, &n)| s.eigenvalue(n)).sum())
}

fn check_degree(p: ModelCriticalPoint, r: usize) -> Result<()> {
    if r > p.n {
        return Err(Error::Degree { degree: r, dim: p.n });
    }
    Ok(())
}

/// Pointwise trace `Σ'_{|I| = r} e^{-tΔ^I_{f,p}}(x, x)`.
pub fn model_trace(p: ModelCriticalPoint, r: usize, t: f64, x: &[f64]) -> Result<f64> {
    check_degree(p, r)?;
    MultiIndex::all(p.n, r).try_fold(0.0, |acc, multi_index| {
        Ok(acc + model_kernel_component(p, &multi_index, t, x, x)?)
    })
}

/// `∫_{ℝⁿ} tr e^{-tΔ^{(r)}_{f,p}}(x, x) dx`; tends to `1` if `r = l` and to `0` otherwise.
pub fn model_trace_integral(p: ModelCriticalPoint, r: usize, t: f64) -> Result<f64> {
    check_time(t)?;
    check_degree(p, r)?;
    MultiIndex::all(p.n, r).try_fold(0.0, |acc, multi_index| {
        let profile = model_sign_profile(p, &multi_index);
        let component = profile
            .0
            .iter()
            .try_fold(1.0, |prod, &s| Ok::<_, Error>(prod * oscillator_trace_integral(s, t)?))?;
        Ok(acc + component)
    })
}
