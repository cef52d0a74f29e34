//! Witten Laplacians, their spectra and heat kernels.
//!
//! Cochains carry the diagonal Hodge inner product `⟨a, b⟩_r = Σ w_r(σ) a_σ b_σ`
//! with `w_r(σ) = |⋆σ| / |σ|`. With `W_r` the weight matrix and
//! `D_r = W_{r+1}^{1/2} d_{k,r} W_r^{-1/2}`, the Witten Laplacian is similar to
//! the symmetric matrix `S_r = D_rᵀ D_r + D_{r-1} D_{r-1}ᵀ`, which is what is
//! assembled and diagonalized. An eigenvector `u` of `S_r` gives the
//! Hodge-orthonormal eigencochain `W_r^{-1/2} u`.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use faer::{Mat, Side};
use rayon::prelude::*;

use crate::coboundary::{check_k, deformed_coboundary};
use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::morse_function::ScalarField;

/// Diagonal Hodge inner product on `r`-cochains.
#[derive(Clone, Debug, PartialEq)]
pub struct HodgeInner {
    pub degree: usize,
    pub weights: Vec<f64>,
}

impl HodgeInner {
    pub fn new(complex: &CellComplex, degree: usize) -> Self {
        let weights = complex.cells(degree).iter().map(|c| c.dual_measure / c.measure).collect();
        Self { degree, weights }
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }
}

/// Assembled `Δ_k^{(r)}` in its symmetrized form.
#[derive(Clone, Debug)]
pub struct WittenOperator {
    pub k: f64,
    pub degree: usize,
    pub hodge: HodgeInner,
    /// Volume `|σ| |⋆σ|` of each cell, the weight of a density sample.
    pub volumes: Vec<f64>,
    /// `1 / (√w_σ |σ|)`: converts a symmetric-basis component into a form coefficient.
    pub density_scale: Vec<f64>,
    pub sym: Mat<f64>,
}

/// Builds `Δ_k^{(r)} = d_k* d_k + d_k d_k*` for the field `f`.
pub fn assemble_witten_laplacian(
    complex: &CellComplex,
    f: &ScalarField,
    k: f64,
    r: usize,
) -> Result<WittenOperator> {
    if r > complex.dim() {
        return Err(Error::Degree { degree: r, dim: complex.dim() });
    }
    check_k(complex, f, k)?;
    let n = complex.count(r);
    let hodge = HodgeInner::new(complex, r);
    let sqrt_w: Vec<f64> = hodge.weights.iter().map(|w| w.sqrt()).collect();
    let mut sym = Mat::<f64>::zeros(n, n);

    if r < complex.dim() {
        let d = deformed_coboundary(complex, f, k, r)?;
        let upper = HodgeInner::new(complex, r + 1);
        for (row, entries) in d.rows.iter().enumerate() {
            let su = upper.weights[row].sqrt();
            let scaled: Vec<(usize, f64)> = entries.iter().map(|&(c, v)| (c, su * v / sqrt_w[c])).collect();
            for &(i, a) in &scaled {
                for &(j, b) in &scaled {
                    sym[(i, j)] += a * b;
                }
            }
        }
    }
    if r > 0 {
        let d = deformed_coboundary(complex, f, k, r - 1)?;
        let lower = HodgeInner::new(complex, r - 1);
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d.n_cols];
        for (row, entries) in d.rows.iter().enumerate() {
            for &(col, v) in entries {
                columns[col].push((row, sqrt_w[row] * v / lower.weights[col].sqrt()));
            }
        }
        for scaled in &columns {
            for &(i, a) in scaled {
                for &(j, b) in scaled {
                    sym[(i, j)] += a * b;
                }
            }
        }
    }

    let cells = complex.cells(r);
    let volumes = cells.iter().map(|c| c.measure * c.dual_measure).collect();
    let density_scale = cells.iter().zip(&sqrt_w).map(|(c, s)| 1.0 / (s * c.measure)).collect();
    Ok(WittenOperator { k, degree: r, hodge, volumes, density_scale, sym })
}

impl WittenOperator {
    pub fn dim(&self) -> usize {
        self.sym.nrows()
    }

    /// `max |S - Sᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((self.sym[(i, j)] - self.sym[(j, i)]).abs());
            }
        }
        worst
    }

    /// `Δ ω` for a cochain `ω`.
    pub fn apply(&self, omega: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let sqrt_w: Vec<f64> = self.hodge.weights.iter().map(|w| w.sqrt()).collect();
        let u: Vec<f64> = omega.iter().zip(&sqrt_w).map(|(x, s)| x * s).collect();
        (0..n)
            .map(|i| (0..n).map(|j| self.sym[(i, j)] * u[j]).sum::<f64>() / sqrt_w[i])
            .collect()
    }

    /// `(Δ ω | ω) / ‖ω‖²` in the Hodge inner product.
    pub fn rayleigh_quotient(&self, omega: &[f64]) -> Result<f64> {
        let norm_sq = self.hodge.norm_sq(omega);
        if !(norm_sq > 0.0) {
            return Err(Error::Domain("Rayleigh quotient of the zero cochain is undefined".into()));
        }
        let delta = self.apply(omega);
        Ok(self.hodge.inner(&delta, omega) / norm_sq)
    }

    /// Smallest eigenvalue of `Δ` restricted to cochains supported on `cells`
    /// (the compressed operator `P Δ P`).
    pub fn restricted_minimum(&self, cells: &[usize]) -> Result<f64> {
        let m = cells.len();
        if m == 0 {
            return Err(Error::Domain("empty support".into()));
        }
        let sub = Mat::<f64>::from_fn(m, m, |i, j| self.sym[(cells[i], cells[j])]);
        let values = sub
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::EigenSolver { n: m, dump: PathBuf::new() })?;
        Ok(values[0])
    }

    fn dump(&self) -> PathBuf {
        let path = std::env::temp_dir().join(format!(
            "wittenlab-operator-k{}-r{}-{}.csv",
            self.k,
            self.degree,
            std::process::id()
        ));
        let write = || -> std::io::Result<()> {
            let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
            for i in 0..self.dim() {
                let row: Vec<String> = (0..self.dim()).map(|j| format!("{:e}", self.sym[(i, j)])).collect();
                writeln!(out, "{}", row.join(","))?;
            }
            out.flush()
        };
        // A failed dump still reports the intended path.
        let _ = write();
        path
    }
}

/// Full eigendecomposition of one `Δ_k^{(r)}`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub k: f64,
    pub degree: usize,
    /// Non-decreasing.
    pub eigenvalues: Vec<f64>,
    /// Row-major `n × n`: entry `[a * n + j]` is component `a` of eigenvector `j`
    /// in the symmetric basis.
    vectors: Vec<f64>,
    pub hodge: HodgeInner,
    pub volumes: Vec<f64>,
    pub density_scale: Vec<f64>,
}

/// Diagonalizes the assembled operator.
pub fn eigendecompose(op: &WittenOperator) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let evd = op
        .sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenSolver { n, dump: op.dump() })?;
    let values = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut vectors = vec![0.0; n * n];
    let mut eigenvalues = Vec::with_capacity(n);
    for (j, &src) in order.iter().enumerate() {
        eigenvalues.push(values[src]);
        let col = u.col(src);
        let leading = (0..n).map(|a| col[a]).find(|v| v.abs() > 1e-10).unwrap_or(1.0);
        let sign = if leading < 0.0 { -1.0 } else { 1.0 };
        for a in 0..n {
            vectors[a * n + j] = sign * col[a];
        }
    }
    Ok(SpectralDecomposition {
        k: op.k,
        degree: op.degree,
        eigenvalues,
        vectors,
        hodge: op.hodge.clone(),
        volumes: op.volumes.clone(),
        density_scale: op.density_scale.clone(),
    })
}

/// Invariant check results for a decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionCheck {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max_j ‖S u_j - λ_j u_j‖ / ‖S‖`.
    pub max_relative_residual: f64,
    /// `max |UᵀU - I|`.
    pub gram_defect: f64,
}

impl DecompositionCheck {
    pub fn passes(&self) -> bool {
        self.min_eigenvalue >= -1e-10 * self.max_eigenvalue.abs().max(1.0)
            && self.max_relative_residual <= 1e-9
            && self.gram_defect <= 1e-10
    }
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Component `a` of symmetric-basis eigenvector `j`.
    pub fn vector_component(&self, a: usize, j: usize) -> f64 {
        self.vectors[a * self.dim() + j]
    }

    /// Hodge-orthonormal eigencochain `j`.
    pub fn eigencochain(&self, j: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.vector_component(a, j) / self.hodge.weights[a].sqrt())
            .collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Checks the PSD, residual and orthonormality invariants against `op`.
    pub fn verify(&self, op: &WittenOperator) -> DecompositionCheck {
        let n = self.dim();
        let u = Mat::<f64>::from_fn(n, n, |a, j| self.vector_component(a, j));
        let su = &op.sym * &u;
        let gram = u.transpose() * &u;
        let norm = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut residual: f64 = 0.0;
        let mut gram_defect: f64 = 0.0;
        for j in 0..n {
            let mut r2 = 0.0;
            for a in 0..n {
                let d = su[(a, j)] - self.eigenvalues[j] * u[(a, j)];
                r2 += d * d;
                let target = if a == j { 1.0 } else { 0.0 };
                gram_defect = gram_defect.max((gram[(a, j)] - target).abs());
            }
            residual = residual.max(r2.sqrt() / norm);
        }
        DecompositionCheck {
            min_eigenvalue: self.eigenvalues[0],
            max_eigenvalue: self.max_eigenvalue(),
            max_relative_residual: residual,
            gram_defect,
        }
    }

    /// Heat semigroup `e^{-t_eff Δ}` ready for kernel evaluation.
    pub fn heat(&self, t_eff: f64) -> Result<HeatEvaluation<'_>> {
        if !(t_eff > 0.0) {
            return Err(Error::Domain(format!("t_eff must be positive, got {t_eff}")));
        }
        let decay = self.eigenvalues.iter().map(|l| (-t_eff * l).exp()).collect();
        Ok(HeatEvaluation { dec: self, t_eff, decay })
    }
}

/// `e^{-t_eff Δ}` for a fixed decomposition and time.
#[derive(Clone, Debug)]
pub struct HeatEvaluation<'a> {
    dec: &'a SpectralDecomposition,
    pub t_eff: f64,
    decay: Vec<f64>,
}

impl HeatEvaluation<'_> {
    /// Kernel density between cells `a` and `b`: the cochain-basis kernel
    /// divided by the cell measures, so that it approximates the continuum
    /// kernel of form coefficients against `dV`.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let n = self.dec.dim();
        let ra = &self.dec.vectors[a * n..(a + 1) * n];
        let rb = &self.dec.vectors[b * n..(b + 1) * n];
        let sum: f64 = self.decay.iter().zip(ra.iter().zip(rb)).map(|(e, (x, y))| e * x * y).sum();
        sum * self.dec.density_scale[a] * self.dec.density_scale[b]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dec.dim()).map(|a| self.entry(a, a)).collect()
    }

    /// `Σ_λ e^{-t_eff λ}`.
    pub fn trace(&self) -> f64 {
        self.decay.iter().sum()
    }

    /// `Σ_σ K(σ, σ) |σ||⋆σ|`, the discrete trace integral of the diagonal.
    pub fn diagonal_integral(&self) -> f64 {
        self.diagonal().iter().zip(&self.dec.volumes).map(|(k, v)| k * v).sum()
    }
}

/// Convenience wrapper for a single entry.
pub fn heat_kernel_entry(dec: &SpectralDecomposition, t_eff: f64, a: usize, b: usize) -> Result<f64> {
    Ok(dec.heat(t_eff)?.entry(a, b))
}

/// `Σ_λ e^{-t_eff λ}` counted with multiplicity.
pub fn heat_trace(dec: &SpectralDecomposition, t_eff: f64) -> Result<f64> {
    if !(t_eff > 0.0) {
        return Err(Error::Domain(format!("t_eff must be positive, got {t_eff}")));
    }
    Ok(dec.eigenvalues.iter().map(|l| (-t_eff * l).exp()).sum())
}

/// How "zero" eigenvalues are separated from the rest of the spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapPolicy {
    /// Eigenvalues below `floor_rel · λ_max` are clamped to that floor.
    pub floor_rel: f64,
    /// Smallest ratio accepted as a gap.
    pub min_jump: f64,
    /// The winning jump must exceed the runner-up by this factor.
    pub dominance: f64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self { floor_rel: 1e-9, min_jump: 1e3, dominance: 1e2 }
    }
}

/// Number of eigenvalues below the spectral gap.
///
/// The gap is the largest multiplicative jump among the eigenvalues up to
/// the median, with eigenvalues clamped to an absolute floor. A virtual
/// eigenvalue at the floor is prepended so that a trivial kernel is found
/// as a jump at position zero.
pub fn kernel_dimension(dec: &SpectralDecomposition, policy: &GapPolicy) -> Result<usize> {
    kernel_dimension_of(&dec.eigenvalues, policy)
}

pub fn kernel_dimension_of(eigenvalues: &[f64], policy: &GapPolicy) -> Result<usize> {
    if eigenvalues.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let lambda_max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    if lambda_max <= 0.0 {
        return Ok(eigenvalues.len());
    }
    let floor = policy.floor_rel * lambda_max;
    let clamp = |v: f64| v.max(floor);
    let median = eigenvalues.len() / 2;
    let mut jumps: Vec<(f64, usize)> = (0..=median)
        .map(|i| {
            let below = if i == 0 { floor } else { clamp(eigenvalues[i - 1]) };
            (clamp(eigenvalues[i]) / below, i)
        })
        .collect();
    jumps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best, count) = jumps[0];
    let runner_up = jumps.get(1).copied().unwrap_or((1.0, count));
    if best < policy.min_jump || best < policy.dominance * runner_up.0 {
        return Err(Error::GapAmbiguous { first: count, second: runner_up.1 });
    }
    Ok(count)
}

/// Outcome of the supersymmetric pairing check across all degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct PairingReport {
    pub clusters: usize,
    /// `(cluster value, r, partial alternating sum)` for every failed condition.
    pub violations: Vec<(f64, usize, i64)>,
}

impl PairingReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Clusters the nonzero eigenvalues of all degrees (relative tolerance
/// `rel_tol`) and checks `Σ_{j≤r} (-1)^{r-j} dim E_μ^{(j)} ≥ 0`, with
/// equality in the top degree.
pub fn supersymmetric_pairing(
    decs: &[Arc<SpectralDecomposition>],
    policy: &GapPolicy,
    rel_tol: f64,
) -> Result<PairingReport> {
    let top = decs.len() - 1;
    let mut tagged: Vec<(f64, usize)> = Vec::new();
    for (r, dec) in decs.iter().enumerate() {
        let kernel = kernel_dimension(dec, policy)?;
        tagged.extend(dec.eigenvalues[kernel..].iter().map(|&v| (v, r)));
    }
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut clusters: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (value, r) in tagged {
        if clusters.is_empty() || value - last > rel_tol * value.abs() {
            clusters.push((value, vec![0; top + 1]));
        }
        clusters.last_mut().unwrap().1[r] += 1;
        last = value;
    }

    let mut violations = Vec::new();
    for (value, dims) in &clusters {
        for r in 0..=top {
            let partial: i64 = (0..=r).map(|j| if (r - j) % 2 == 0 { dims[j] } else { -dims[j] }).sum();
            if partial < 0 || (r == top && partial != 0) {
                violations.push((*value, r, partial));
            }
        }
    }
    Ok(PairingReport { clusters: clusters.len(), violations })
}

/// A complex and field with a cache of decompositions keyed by `(k, r)`.
pub struct WittenSystem<'a> {
    pub complex: &'a CellComplex,
    pub field: &'a ScalarField,
    cache: Mutex<HashMap<(u64, usize), Arc<SpectralDecomposition>>>,
}

impl<'a> WittenSystem<'a> {
    pub fn new(complex: &'a CellComplex, field: &'a ScalarField) -> Self {
        Self { complex, field, cache: Mutex::new(HashMap::new()) }
    }

    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn operator(&self, k: f64, r: usize) -> Result<WittenOperator> {
        assemble_witten_laplacian(self.complex, self.field, k, r)
    }

    /// Decomposition of `Δ_k^{(r)}`, computed once.
    pub fn decomposition(&self, k: f64, r: usize) -> Result<Arc<SpectralDecomposition>> {
        let key = (k.to_bits(), r);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let dec = Arc::new(eigendecompose(&self.operator(k, r)?)?);
        self.cache.lock().unwrap().insert(key, dec.clone());
        Ok(dec)
    }

    /// Computes any missing decompositions in parallel.
    pub fn prefetch(&self, jobs: &[(f64, usize)]) -> Result<()> {
        jobs.par_iter().try_for_each(|&(k, r)| self.decomposition(k, r).map(|_| ()))
    }

    /// Decompositions for every degree at one `k`.
    pub fn all_degrees(&self, k: f64) -> Result<Vec<Arc<SpectralDecomposition>>> {
        (0..=self.dim()).map(|r| self.decomposition(k, r)).collect()
    }
}
