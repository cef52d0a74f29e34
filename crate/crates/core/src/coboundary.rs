//! The deformed coboundary `d_k = e^{-kf} d e^{kf}`.
//!
//! Entries are built from local exponent differences `k (f(σ_r) - f(σ_{r+1}))`
//! so that nothing of size `e^{k max f}` is ever formed.

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::morse_function::ScalarField;

/// Largest admissible local exponent.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Sparse `d_k` from degree `r` to `r + 1`, stored by row.
#[derive(Clone, Debug)]
pub struct DeformedCoboundary {
    pub k: f64,
    pub degree: usize,
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Largest `|f(σ_r) - f(σ_{r+1})|` over incident pairs in any degree.
pub fn max_local_difference(complex: &CellComplex, f: &ScalarField) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..complex.dim() {
        let incidence = complex.incidence(r).expect("degree below dimension");
        for (row, entries) in incidence.rows.iter().enumerate() {
            for &(col, _) in entries {
                worst = worst.max((f.values[r][col] - f.values[r + 1][row]).abs());
            }
        }
    }
    worst
}

/// Largest `k` that passes the overflow guard on this grid.
pub fn max_admissible_k(complex: &CellComplex, f: &ScalarField) -> f64 {
    let diff = max_local_difference(complex, f);
    if diff == 0.0 {
        f64::INFINITY
    } else {
        EXPONENT_GUARD / diff
    }
}

/// Checks `k` against the overflow guard.
pub fn check_k(complex: &CellComplex, f: &ScalarField, k: f64) -> Result<()> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("k must be non-negative and finite, got {k}")));
    }
    let diff = max_local_difference(complex, f);
    if k * diff > EXPONENT_GUARD {
        return Err(Error::OverflowGuard { k, exponent: k * diff, max_k: EXPONENT_GUARD / diff });
    }
    Ok(())
}

/// Builds `d_k` on `r`-cochains.
pub fn deformed_coboundary(
    complex: &CellComplex,
    f: &ScalarField,
    k: f64,
    r: usize,
) -> Result<DeformedCoboundary> {
    let incidence = complex.incidence(r)?;
    check_k(complex, f, k)?;
    let rows = incidence
        .rows
        .iter()
        .enumerate()
        .map(|(row, entries)| {
            let top = f.values[r + 1][row];
            entries
                .iter()
                .map(|&(col, sign)| (col, sign as f64 * (k * (f.values[r][col] - top)).exp()))
                .collect()
        })
        .collect();
    Ok(DeformedCoboundary { k, degree: r, n_cols: incidence.n_cols, rows })
}

impl DeformedCoboundary {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0, |m, &(_, v)| m.max(v.abs()))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    }

    /// Sparse product `next ∘ self`.
    pub fn compose(&self, next: &DeformedCoboundary) -> Vec<Vec<(usize, f64)>> {
        next.rows
            .iter()
            .map(|row| {
                let mut acc: Vec<(usize, f64)> = Vec::new();
                for &(mid, a) in row {
                    for &(col, b) in &self.rows[mid] {
                        match acc.iter_mut().find(|(c, _)| *c == col) {
                            Some(entry) => entry.1 += a * b,
                            None => acc.push((col, a * b)),
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// `max |(d_{k,r+1} d_{k,r})_{ij}|` together with the largest entry magnitude of the factors.
pub fn nilpotency_defect(complex: &CellComplex, f: &ScalarField, k: f64, r: usize) -> Result<(f64, f64)> {
    let lower = deformed_coboundary(complex, f, k, r)?;
    let upper = deformed_coboundary(complex, f, k, r + 1)?;
    let defect = lower.compose(&upper).iter().flatten().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    let scale = lower.max_abs_entry().max(upper.max_abs_entry());
    Ok((defect, scale * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_circle_complex, build_torus_complex};
    use crate::morse_function::{blended_morse_function_1d, product_morse_function_2d, MorseParams};
    use std::f64::consts::PI;

    fn torus() -> (CellComplex, ScalarField) {
        let c = build_torus_complex(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let p = MorseParams { min_pos: 0.5 * PI, max_pos: 1.5 * PI, rho0: 0.35, amplitude: 1.0 };
        let f = product_morse_function_2d(&c, p, p).unwrap();
        (c, f)
    }

    #[test]
    fn k_zero_is_incidence() {
        let (c, f) = torus();
        for r in 0..2 {
            let d = deformed_coboundary(&c, &f, 0.0, r).unwrap();
            let inc = c.incidence(r).unwrap();
            for (row, entries) in d.rows.iter().zip(&inc.rows) {
                for (&(c1, v), &(c2, s)) in row.iter().zip(entries) {
                    assert_eq!(c1, c2);
                    assert_eq!(v, s as f64);
                }
            }
        }
    }

    #[test]
    fn constant_field_is_undeformed() {
        let c = build_circle_complex(16, 1.0).unwrap();
        let f = ScalarField {
            values: vec![vec![3.0; 16], vec![3.0; 16]],
            critical_points: vec![],
            min_gradient: 0.0,
            profile: None,
        };
        let d = deformed_coboundary(&c, &f, 50.0, 0).unwrap();
        let d0 = deformed_coboundary(&c, &f, 0.0, 0).unwrap();
        assert_eq!(d.rows, d0.rows);
        assert!(max_admissible_k(&c, &f).is_infinite());
    }

    #[test]
    fn composition_vanishes() {
        let (c, f) = torus();
        for k in [0.0, 4.0, 16.0, 64.0] {
            let (defect, scale) = nilpotency_defect(&c, &f, k, 0).unwrap();
            assert!(defect < 1e-13 * scale, "k = {k}: {defect} vs {scale}");
        }
    }

    #[test]
    fn entries_are_local() {
        let c = build_circle_complex(256, 2.0 * PI).unwrap();
        let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 1.0).unwrap();
        let h = c.max_spacing();
        let profile = f.profile.as_ref().unwrap();
        let slope_bound = (0..4096)
            .map(|i| profile.gradient(&[i as f64 * 2.0 * PI / 4096.0])[0].abs())
            .fold(0.0, f64::max)
            * 1.01;
        let k = 30.0;
        let d = deformed_coboundary(&c, &f, k, 0).unwrap();
        let bound = (k * slope_bound * h).exp();
        for &(_, v) in d.rows.iter().flatten() {
            assert!(v.abs() <= bound && v.abs() >= 1.0 / bound);
        }
    }

    #[test]
    fn overflow_guard_reports_max_k() {
        let c = build_circle_complex(16, 2.0 * PI).unwrap();
        let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 1.0).unwrap();
        let max_k = max_admissible_k(&c, &f);
        assert!(deformed_coboundary(&c, &f, 0.99 * max_k, 0).is_ok());
        match deformed_coboundary(&c, &f, 1.01 * max_k, 0) {
            Err(Error::OverflowGuard { max_k: reported, .. }) => assert!((reported - max_k).abs() < 1e-9),
            other => panic!("expected overflow guard, got {other:?}"),
        }
        assert!(matches!(deformed_coboundary(&c, &f, 1.0, 1), Err(Error::Degree { .. })));
        assert!(deformed_coboundary(&c, &f, -1.0, 0).is_err());
    }
}
