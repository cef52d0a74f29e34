//! Betti numbers, Morse counts, heat-trace identities and the Morse inequalities.

use std::fmt;

use itertools::Itertools;

use crate::complex::{betti_from_ranks, CellComplex};
use crate::error::{Error, Result};
use crate::morse_function::ScalarField;
use crate::report::{Check, ExperimentReport, Value};
use crate::spectral::{kernel_dimension, GapPolicy, WittenSystem};

/// `dim ker Δ^{(r)}` of the undeformed Hodge Laplacian for every degree.
pub fn betti_numbers(complex: &CellComplex) -> Result<Vec<usize>> {
    let flat = ScalarField {
        values: (0..=complex.dim()).map(|r| vec![0.0; complex.count(r)]).collect(),
        critical_points: Vec::new(),
        min_gradient: 0.0,
        profile: None,
    };
    betti_numbers_of(&WittenSystem::new(complex, &flat))
}

/// Same as [`betti_numbers`], reusing the `k = 0` decompositions cached in `system`.
pub fn betti_numbers_of(system: &WittenSystem<'_>) -> Result<Vec<usize>> {
    kernel_dimensions(system, 0.0)
}

/// `dim ker Δ_k^{(r)}` for every degree.
pub fn kernel_dimensions(system: &WittenSystem<'_>, k: f64) -> Result<Vec<usize>> {
    let policy = GapPolicy::default();
    (0..=system.dim()).map(|r| kernel_dimension(&*system.decomposition(k, r)?, &policy)).collect()
}

/// `m_r`: number of critical points of index `r`, for `r = 0..=dim`.
pub fn morse_counts(field: &ScalarField, dim: usize) -> Vec<usize> {
    let mut counts = vec![0; dim + 1];
    for cp in &field.critical_points {
        counts[cp.index] += 1;
    }
    counts
}

fn alternating_partial(values: &[f64], r: usize) -> f64 {
    (0..=r).map(|j| if (r - j) % 2 == 0 { values[j] } else { -values[j] }).sum()
}

fn as_f64(values: &[usize]) -> Vec<f64> {
    values.iter().map(|&v| v as f64).collect()
}

/// Heat traces `Z^r = Σ e^{-t_eff λ}` for all degrees at one `(k, t_eff)`.
pub fn heat_traces(system: &WittenSystem<'_>, k: f64, t_eff: f64) -> Result<Vec<f64>> {
    (0..=system.dim()).map(|r| Ok(system.decomposition(k, r)?.heat(t_eff)?.trace())).collect()
}

fn degree_columns(prefix: &str, dim: usize, unit: &str) -> Vec<String> {
    (0..=dim).map(|r| format!("{prefix}{r} [{unit}]")).collect()
}

/// Per `(k, t_eff)`: the traces `Z^r`, the partial alternating sums against
/// those of the Betti numbers, and the full alternating sum against `χ`.
pub fn mckean_singer_report(system: &WittenSystem<'_>, k_list: &[f64], t_eff_list: &[f64]) -> Result<ExperimentReport> {
    if k_list.is_empty() || t_eff_list.is_empty() {
        return Err(Error::Config("k_list and t_eff_list must be nonempty".into()));
    }
    let n = system.dim();
    let betti = betti_numbers_of(system)?;
    let chi = system.complex.euler_characteristic() as f64;
    let jobs: Vec<(f64, usize)> = k_list.iter().flat_map(|&k| (0..=n).map(move |r| (k, r))).collect();
    system.prefetch(&jobs)?;

    let mut columns = vec!["k [1]".to_string(), "t_eff [time]".to_string()];
    columns.extend(degree_columns("Z", n, "1"));
    columns.extend(degree_columns("partial_Z", n, "1"));
    columns.extend(degree_columns("partial_b", n, "1"));
    columns.push("euler_sum [1]".into());
    columns.push("chi [1]".into());
    let mut report = ExperimentReport::new("mckean_singer", columns)
        .with_manifest("grid", system.complex.descriptor())
        .with_manifest("betti", betti.iter().join(":"));

    let b = as_f64(&betti);
    let (mut worst_euler, mut partial_ok, mut lower_ok) = (0.0f64, true, true);
    let mut failures = Vec::new();
    for &k in k_list {
        for &t in t_eff_list {
            let z = heat_traces(system, k, t)?;
            let partial_z: Vec<f64> = (0..=n).map(|r| alternating_partial(&z, r)).collect();
            let partial_b: Vec<f64> = (0..=n).map(|r| alternating_partial(&b, r)).collect();
            let total = partial_z[n];
            let scale = z.iter().sum::<f64>();
            let defect = (total - chi).abs() / scale;
            worst_euler = worst_euler.max(defect);
            for r in 0..=n {
                // Rounding in sums of O(cells) terms.
                let slack = 1e-9 * scale;
                if partial_b[r] > partial_z[r] + slack {
                    partial_ok = false;
                    failures.push(format!("k={k} t={t} r={r}"));
                }
                if (b[r] as f64) > z[r] + slack {
                    lower_ok = false;
                }
            }
            let mut row: Vec<Value> = vec![k.into(), t.into()];
            row.extend(z.iter().map(|&v| Value::from(v)));
            row.extend(partial_z.iter().map(|&v| Value::from(v)));
            row.extend(partial_b.iter().map(|&v| Value::from(v)));
            row.push(total.into());
            row.push(chi.into());
            report.push_row(row);
        }
    }
    report.push_check(Check::new(
        "partial sums",
        partial_ok,
        if failures.is_empty() { "all (k, t, r)".to_string() } else { failures.join(", ") },
    ));
    report.push_check(Check::new("traces bound betti", lower_ok, "Z^r >= b_r"));
    report.push_check(Check::new(
        "euler",
        worst_euler <= 1e-8,
        format!("max |Σ(-1)^r Z^r - χ| / Σ Z^r = {worst_euler:.3e} (tolerance 1e-8)"),
    ));
    Ok(report)
}

/// `heat_trace(r, t/k)` over a `(k, t)` ladder against `m_r`.
pub fn trace_integral_limit_report(
    system: &WittenSystem<'_>,
    degrees: &[usize],
    k_list: &[f64],
    t_list: &[f64],
    tolerance: f64,
) -> Result<ExperimentReport> {
    for (name, list) in [("k_list", k_list), ("t_list", t_list)] {
        if list.is_empty() || !list.windows(2).all(|w| w[0] < w[1]) || list[0] <= 0.0 {
            return Err(Error::Config(format!("{name} must be positive and strictly increasing, got {list:?}")));
        }
    }
    let n = system.dim();
    if let Some(&r) = degrees.iter().find(|&&r| r > n) {
        return Err(Error::Degree { degree: r, dim: n });
    }
    let morse = morse_counts(system.field, n);
    let jobs: Vec<(f64, usize)> = k_list.iter().flat_map(|&k| degrees.iter().map(move |&r| (k, r))).collect();
    system.prefetch(&jobs)?;

    let mut report = ExperimentReport::new(
        "trace_integral_limit",
        ["k [1]", "t [time]", "degree", "trace [1]", "morse_count [1]", "deviation [1]"],
    )
    .with_manifest("grid", system.complex.descriptor())
    .with_manifest("tolerance", tolerance);
    let (k_last, t_last) = (*k_list.last().unwrap(), *t_list.last().unwrap());
    for &r in degrees {
        let mut along_t = Vec::new();
        let mut last = f64::NAN;
        for &k in k_list {
            let dec = system.decomposition(k, r)?;
            for &t in t_list {
                let z = dec.heat(t / k)?.trace();
                let deviation = (z - morse[r] as f64).abs();
                report.push_row(vec![k.into(), t.into(), r.into(), z.into(), morse[r].into(), deviation.into()]);
                if k == k_last {
                    along_t.push(deviation);
                }
                last = deviation;
            }
        }
        report.push_check(Check::new(
            format!("approach r={r}"),
            along_t.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
            format!("deviations along t at k = {k_last}: {}", along_t.iter().map(|d| format!("{d:.3e}")).join(" ")),
        ));
        report.push_check(Check::new(
            format!("final r={r}"),
            last < tolerance,
            format!("|Z - m_{r}| = {last:.4e} at k = {k_last}, t = {t_last} (tolerance {tolerance})"),
        ));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InequalityKind {
    Weak,
    Strong,
    Euler,
}

/// One inequality `lhs ≤ rhs` (or equality for [`InequalityKind::Euler`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub kind: InequalityKind,
    pub degree: Option<usize>,
    pub lhs: i64,
    pub rhs: i64,
    pub status: Status,
}

impl Verdict {
    /// `WEAK r=0`, `STRONG r=1`, `EULER`.
    pub fn label(&self) -> String {
        let name = match self.kind {
            InequalityKind::Weak => "WEAK",
            InequalityKind::Strong => "STRONG",
            InequalityKind::Euler => "EULER",
        };
        match self.degree {
            Some(r) => format!("{name} r={r}"),
            None => name.to_string(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.label(), self.status)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MorseReport {
    pub grid: String,
    /// Empty when the kernel dimensions could not be determined.
    pub betti: Vec<usize>,
    pub rank_betti: Vec<usize>,
    pub morse: Vec<usize>,
    /// `dim ker Δ_k^{(r)}` at the report's `k`.
    pub kernel_at_k: Vec<usize>,
    /// `(k, t, r, Z^r(t/k))`.
    pub traces: Vec<(f64, f64, usize, f64)>,
    pub verdicts: Vec<Verdict>,
    /// Reason the report is inconclusive, if it is.
    pub note: Option<String>,
}

impl MorseReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status == Status::Pass)
    }

    pub fn verdict_lines(&self) -> Vec<String> {
        self.verdicts.iter().map(ToString::to_string).collect()
    }

    /// Tabular form: one row per degree plus the verdicts as checks.
    pub fn to_experiment(&self) -> ExperimentReport {
        let mut report = ExperimentReport::new(
            "morse_report",
            ["degree", "betti", "rank_betti", "morse", "kernel_at_k", "k [1]", "t [time]", "trace [1]"],
        )
        .with_manifest("grid", &self.grid);
        for (i, &(k, t, r, z)) in self.traces.iter().enumerate() {
            let pick = |v: &Vec<usize>| v.get(i).map_or(Value::from("?"), |&x| Value::from(x));
            report.push_row(vec![
                r.into(),
                pick(&self.betti),
                pick(&self.rank_betti),
                pick(&self.morse),
                pick(&self.kernel_at_k),
                k.into(),
                t.into(),
                z.into(),
            ]);
        }
        for v in &self.verdicts {
            let detail = match v.kind {
                InequalityKind::Euler => format!("{} = {}", v.lhs, v.rhs),
                _ => format!("{} <= {}", v.lhs, v.rhs),
            };
            let mut check = Check::new(v.label(), v.status == Status::Pass, format!("{}: {detail}", v.status));
            if let Some(note) = &self.note {
                check.detail.push_str(&format!(" ({note})"));
            }
            report.push_check(check);
        }
        report
    }
}

/// Weak, strong and Euler forms of the Morse inequalities.
pub fn morse_inequality_report(system: &WittenSystem<'_>, k: f64, t: f64) -> Result<MorseReport> {
    let n = system.dim();
    let morse = morse_counts(system.field, n);
    let rank_betti = betti_from_ranks(system.complex);
    let mut note = None;
    let betti = match betti_numbers_of(system) {
        Ok(b) => b,
        Err(Error::GapAmbiguous { first, second }) => {
            note = Some(format!("no spectral gap at k = 0 (candidates {first}, {second})"));
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let kernel_at_k = match kernel_dimensions(system, k) {
        Ok(d) => d,
        Err(Error::GapAmbiguous { first, second }) => {
            note.get_or_insert(format!("no spectral gap at k = {k} (candidates {first}, {second})"));
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    if note.is_none() && betti != rank_betti {
        note = Some(format!("kernel dimensions {betti:?} disagree with incidence ranks {rank_betti:?}"));
    }
    if note.is_none() && kernel_at_k != betti {
        note = Some(format!("kernel dimensions at k = {k} ({kernel_at_k:?}) differ from k = 0 ({betti:?})"));
    }
    let t_eff = if k > 0.0 { t / k } else { t };
    let z = heat_traces(system, k, t_eff)?;
    let traces = (0..=n).map(|r| (k, t, r, z[r])).collect();

    let status = |holds: bool| match (&note, holds) {
        (Some(_), _) => Status::Inconclusive,
        (None, true) => Status::Pass,
        (None, false) => Status::Fail,
    };
    let b: Vec<i64> = if betti.is_empty() { vec![0; n + 1] } else { betti.iter().map(|&v| v as i64).collect() };
    let m: Vec<i64> = morse.iter().map(|&v| v as i64).collect();
    let partial = |v: &[i64], r: usize| -> i64 { (0..=r).map(|j| if (r - j) % 2 == 0 { v[j] } else { -v[j] }).sum() };

    let mut verdicts = Vec::new();
    for r in 0..=n {
        verdicts.push(Verdict {
            kind: InequalityKind::Weak,
            degree: Some(r),
            lhs: b[r],
            rhs: m[r],
            status: status(b[r] <= m[r]),
        });
    }
    for r in 0..n {
        let (lhs, rhs) = (partial(&b, r), partial(&m, r));
        verdicts.push(Verdict { kind: InequalityKind::Strong, degree: Some(r), lhs, rhs, status: status(lhs <= rhs) });
    }
    let (lhs, rhs) = (partial(&b, n), partial(&m, n));
    verdicts.push(Verdict { kind: InequalityKind::Euler, degree: None, lhs, rhs, status: status(lhs == rhs) });

    Ok(MorseReport {
        grid: system.complex.descriptor(),
        betti,
        rank_betti,
        morse,
        kernel_at_k,
        traces,
        verdicts,
        note,
    })
}
