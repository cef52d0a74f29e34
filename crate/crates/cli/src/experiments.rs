//! One function per subcommand; each returns the reports it produced.

use itertools::Itertools;
use wittenlab::asymptotics::{
    annulus_decay_probe, bochner_rayleigh_check, convergence_report, far_field_decay_probe, field_descriptor,
    AnnulusSettings, BochnerSettings, ConvergenceSettings, FarFieldSettings, PointGrid,
};
use wittenlab::coboundary::nilpotency_defect;
use wittenlab::complex::betti_from_ranks;
use wittenlab::model_oscillator::{
    mehler_closed, mehler_series, model_trace_integral, oscillator_trace_integral, oscillator_trace_integral_quadrature,
};
use wittenlab::morse::{kernel_dimensions, mckean_singer_report, morse_counts, morse_inequality_report, trace_integral_limit_report};
use wittenlab::spectral::supersymmetric_pairing;
use wittenlab::{
    kernel_dimension, CellComplex, Check, ExperimentReport, GapPolicy, ModelCriticalPoint, ScalarField, Sign, Value,
    WittenSystem,
};

use crate::config::RunConfig;
use crate::RunError;

pub const SUBCOMMANDS: [&str; 7] =
    ["model-check", "spectrum", "heat-trace", "scaled-kernel", "decay", "bochner", "morse-report"];

/// Reports of one run plus any verdict lines meant for the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    pub verdict_lines: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(ExperimentReport::passed)
    }

    pub fn report(&self, name: &str) -> Option<&ExperimentReport> {
        self.reports.iter().find(|r| r.name == name)
    }

    /// All checks as `(report, check)` pairs.
    pub fn checks(&self) -> impl Iterator<Item = (&str, &Check)> {
        self.reports.iter().flat_map(|r| r.checks.iter().map(move |c| (r.name.as_str(), c)))
    }
}

/// Runs a subcommand without writing anything.
pub fn run_experiment(name: &str, config: &RunConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    let mut outcome = if name == "model-check" {
        Outcome { reports: model_check(config)?, verdict_lines: Vec::new() }
    } else {
        if !SUBCOMMANDS.contains(&name) {
            return Err(RunError::UnknownSubcommand(name.to_string()));
        }
        let complex = config.build_complex()?;
        let field = config.build_field(&complex)?;
        config.check_guard(&complex, &field)?;
        on_grid(name, config, &complex, &field)?
    };
    for report in &mut outcome.reports {
        stamp(report, config);
    }
    Ok(outcome)
}

fn on_grid(name: &str, config: &RunConfig, complex: &CellComplex, field: &ScalarField) -> Result<Outcome, RunError> {
    let system = WittenSystem::new(complex, field);
    let reports = match name {
        "spectrum" => spectrum(config, &system)?,
        "heat-trace" => heat_trace(config, &system)?,
        "scaled-kernel" => scaled_kernel(config, &system)?,
        "decay" => decay(config, &system)?,
        "bochner" => {
            let c = &config.bochner;
            let settings = BochnerSettings {
                k: c.k,
                radius: c.radius,
                epsilon: c.epsilon,
                trials: c.trials,
                seed: c.seed,
                slack: c.slack,
                constant: c.constant,
            };
            vec![bochner_rayleigh_check(&system, c.critical_point, c.degree, &settings)?]
        }
        "morse-report" => {
            let report = morse_inequality_report(&system, config.morse_report.k, config.morse_report.t)?;
            return Ok(Outcome { verdict_lines: report.verdict_lines(), reports: vec![report.to_experiment()] });
        }
        other => return Err(RunError::UnknownSubcommand(other.to_string())),
    };
    Ok(Outcome { reports, verdict_lines: Vec::new() })
}

/// Adds the manifest keys every output carries.
fn stamp(report: &mut ExperimentReport, config: &RunConfig) {
    let present: Vec<String> = report.manifest.iter().map(|(k, _)| k.clone()).collect();
    let mut add = |key: &str, value: String| {
        if !present.iter().any(|k| k == key) {
            report.manifest.push((key.to_string(), value));
        }
    };
    add("grid", format!("{:?}:{}", config.grid.manifold, config.grid.cells.iter().join("x")).to_lowercase());
    add("f", format!("rho0={}:amplitude={}", config.morse.rho0, config.morse.amplitude));
    add("epsilon", config.decay.epsilon.to_string());
    add("D", config.decay.d.to_string());
    add("seed", config.bochner.seed.to_string());
}

fn model_check(config: &RunConfig) -> Result<Vec<ExperimentReport>, RunError> {
    let c = &config.model;
    let mut mehler = ExperimentReport::new(
        "mehler",
        ["rho [1]", "x [1]", "y [1]", "series [1]", "closed [1]", "abs_diff [1]"],
    )
    .with_manifest("n_terms", c.n_terms);
    let mut worst: f64 = 0.0;
    for &rho in &c.rho_list {
        for &x in &c.points {
            for &y in &c.points {
                let series = mehler_series(rho, x, y, c.n_terms)?;
                let closed = mehler_closed(rho, x, y)?;
                let diff = (series - closed).abs();
                worst = worst.max(diff);
                mehler.push_row(vec![rho.into(), x.into(), y.into(), series.into(), closed.into(), diff.into()]);
            }
        }
    }
    mehler.push_check(Check::new(
        "mehler identity",
        worst < c.mehler_tolerance,
        format!("max |series - closed| = {worst:.3e} (tolerance {:e})", c.mehler_tolerance),
    ));

    let mut traces = ExperimentReport::new(
        "oscillator_trace",
        ["t [time]", "sign", "quadrature [1]", "closed [1]", "abs_diff [1]"],
    );
    let mut worst: f64 = 0.0;
    for &t in &c.trace_t_list {
        for sign in [Sign::Minus, Sign::Plus] {
            let quad = oscillator_trace_integral_quadrature(sign, t, 1e-12)?;
            let closed = oscillator_trace_integral(sign, t)?;
            let diff = (quad - closed).abs();
            worst = worst.max(diff);
            traces.push_row(vec![t.into(), Value::Int(sign.as_i8().into()), quad.into(), closed.into(), diff.into()]);
        }
    }
    traces.push_check(Check::new(
        "trace integrals",
        worst < c.trace_tolerance,
        format!("max |quadrature - closed| = {worst:.3e} (tolerance {:e})", c.trace_tolerance),
    ));

    let p = ModelCriticalPoint::new(c.dim, c.index)?;
    let mut indicator = ExperimentReport::new(
        "model_trace_integral",
        ["t [time]", "degree", "value [1]", "indicator [1]", "deviation [1]"],
    )
    .with_manifest("n", c.dim)
    .with_manifest("index", c.index);
    for r in 0..=c.dim {
        let target = if r == c.index { 1.0 } else { 0.0 };
        let mut deviations = Vec::new();
        for &t in &c.indicator_t_list {
            let value = model_trace_integral(p, r, t)?;
            let deviation = (value - target).abs();
            deviations.push(deviation);
            indicator.push_row(vec![t.into(), r.into(), value.into(), target.into(), deviation.into()]);
        }
        let last = *deviations.last().unwrap();
        indicator.push_check(Check::new(
            format!("monotone r={r}"),
            deviations.windows(2).all(|w| w[1] <= w[0]),
            deviations.iter().map(|d| format!("{d:.3e}")).join(" "),
        ));
        indicator.push_check(Check::new(
            format!("final r={r}"),
            last < c.indicator_tolerance,
            format!("|value - {target}| = {last:.3e} (tolerance {:e})", c.indicator_tolerance),
        ));
    }
    Ok(vec![mehler, traces, indicator])
}

fn spectrum(config: &RunConfig, system: &WittenSystem<'_>) -> Result<Vec<ExperimentReport>, RunError> {
    let c = &config.spectrum;
    let n = system.dim();
    let ks: Vec<f64> = c.k_list.iter().chain(&c.localization_k).copied().unique_by(|k| k.to_bits()).collect();
    let jobs: Vec<(f64, usize)> = ks.iter().flat_map(|&k| (0..=n).map(move |r| (k, r))).collect();
    system.prefetch(&jobs)?;

    let complex = system.complex;
    let rank_betti = betti_from_ranks(complex);
    let morse = morse_counts(system.field, n);
    let policy = GapPolicy::default();

    let mut eigen = ExperimentReport::new("spectrum", ["k [1]", "degree", "index", "eigenvalue [1/length^2]"]);
    let mut summary = ExperimentReport::new(
        "spectrum_summary",
        [
            "k [1]",
            "degree",
            "kernel_dim",
            "rank_betti",
            "morse_count",
            "max_relative_residual [1]",
            "gram_defect [1]",
        ],
    );
    for &k in &c.k_list {
        let mut dims = Vec::new();
        let mut decomposition_ok = true;
        for r in 0..=n {
            let dec = system.decomposition(k, r)?;
            for (j, &v) in dec.eigenvalues.iter().enumerate() {
                eigen.push_row(vec![k.into(), r.into(), j.into(), v.into()]);
            }
            let dim = kernel_dimension(&dec, &policy)?;
            let check = dec.verify(&system.operator(k, r)?);
            decomposition_ok &= check.passes();
            summary.push_row(vec![
                k.into(),
                r.into(),
                dim.into(),
                rank_betti[r].into(),
                morse[r].into(),
                check.max_relative_residual.into(),
                check.gram_defect.into(),
            ]);
            dims.push(dim);
        }
        summary.push_check(Check::new(
            format!("kernel dims k={k}"),
            dims == rank_betti,
            format!("spectral {dims:?}, incidence ranks {rank_betti:?}"),
        ));
        summary.push_check(Check::new(format!("decomposition k={k}"), decomposition_ok, "PSD, residual, orthonormality"));

        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for r in 0..n.saturating_sub(1) {
            let (defect, s) = nilpotency_defect(complex, system.field, k, r)?;
            worst = worst.max(defect);
            scale = scale.max(s);
        }
        summary.push_check(Check::new(
            format!("nilpotency k={k}"),
            worst <= c.nilpotency_tolerance * scale.max(1.0),
            if n < 2 {
                "no composable pair in dimension 1".to_string()
            } else {
                format!("max |d_k d_k| = {worst:.3e}, scale {scale:.3e}")
            },
        ));

        let pairing = supersymmetric_pairing(&system.all_degrees(k)?, &policy, 1e-6)?;
        summary.push_check(Check::new(
            format!("pairing k={k}"),
            pairing.passes(),
            format!("{} clusters, {} violations", pairing.clusters, pairing.violations.len()),
        ));
    }

    let mut localization =
        ExperimentReport::new("localization", ["k [1]", "degree", "low_count", "morse_count", "threshold [1]"]);
    for &k in &c.localization_k {
        let mut counts = Vec::new();
        for r in 0..=n {
            let dec = system.decomposition(k, r)?;
            let low = dec.eigenvalues.iter().filter(|&&v| v / k < c.localization_threshold).count();
            localization.push_row(vec![k.into(), r.into(), low.into(), morse[r].into(), c.localization_threshold.into()]);
            counts.push(low);
        }
        localization.push_check(Check::new(
            format!("low spectrum k={k}"),
            counts == morse,
            format!("#{{λ/k < {}}} = {counts:?}, m = {morse:?}", c.localization_threshold),
        ));
    }
    for report in [&mut eigen, &mut summary, &mut localization] {
        report.manifest.push(("grid".into(), complex.descriptor()));
        report.manifest.push(("f".into(), field_descriptor(system.field)));
    }
    Ok(vec![eigen, summary, localization])
}

fn heat_trace(config: &RunConfig, system: &WittenSystem<'_>) -> Result<Vec<ExperimentReport>, RunError> {
    let c = &config.heat_trace;
    let degrees: Vec<usize> = if c.degrees.is_empty() { (0..=system.dim()).collect() } else { c.degrees.clone() };
    let mut mckean = mckean_singer_report(system, &c.k_list, &c.t_eff_list)?;
    // Kernel dimensions stay put along the sweep.
    let mut dims = Vec::new();
    for &k in &c.k_list {
        dims.push(kernel_dimensions(system, k)?);
    }
    mckean.push_check(Check::new(
        "kernel dims stable",
        dims.iter().all_equal(),
        dims.iter().map(|d| format!("{d:?}")).join(" "),
    ));
    let limit = trace_integral_limit_report(system, &degrees, &c.limit_k_list, &c.limit_t_list, c.tolerance)?;
    Ok(vec![mckean, limit])
}

fn scaled_kernel(config: &RunConfig, system: &WittenSystem<'_>) -> Result<Vec<ExperimentReport>, RunError> {
    let c = &config.scaled_kernel;
    let settings = ConvergenceSettings {
        grid: PointGrid { half_width: c.half_width, count: c.count },
        final_tolerance: c.final_tolerance,
        derivative_tolerance: c.derivative_tolerance,
    };
    Ok(vec![convergence_report(system, c.critical_point, c.degree, &c.k_list, &c.t_list, &settings)?])
}

fn decay(config: &RunConfig, system: &WittenSystem<'_>) -> Result<Vec<ExperimentReport>, RunError> {
    let c = &config.decay;
    let mut reports = Vec::new();
    let annulus =
        AnnulusSettings { k: c.k, t: c.t, d: c.d, epsilon: c.epsilon, radii: c.radii, n0: c.decay_order };
    for &r in &c.degrees {
        let mut report = annulus_decay_probe(system, c.critical_point, r, &annulus)?;
        report.name = format!("{}_r{r}", report.name);
        reports.push(report);
    }
    let far = FarFieldSettings { k_list: c.far_k_list.clone(), t: c.t, epsilon: c.far_epsilon, ratio: c.ratio };
    let far_degrees: Vec<usize> =
        if c.far_degrees.is_empty() { (0..=system.dim()).collect() } else { c.far_degrees.clone() };
    for r in far_degrees {
        let mut report = far_field_decay_probe(system, r, &far)?;
        report.name = format!("{}_r{r}", report.name);
        reports.push(report);
    }
    Ok(reports)
}
