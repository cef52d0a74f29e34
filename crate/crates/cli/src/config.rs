//! Run configuration.
//!
//! A TOML file with one flat table per subcommand. Every key is optional and
//! unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wittenlab::coboundary::max_admissible_k;
use wittenlab::morse_function::DEFAULT_RHO0;
use wittenlab::{
    blended_morse_function_1d, build_circle_complex, build_torus_complex, product_morse_function_2d, CellComplex,
    MorseParams, ScalarField,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error(
        "[{section}] k = {k} exceeds the overflow guard for this grid; max_k = {max_k:.6}"
    )]
    KTooLarge { section: &'static str, k: f64, max_k: f64 },

    #[error(transparent)]
    Core(#[from] wittenlab::Error),
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    #[default]
    Circle,
    Torus,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub manifold: ManifoldKind,
    /// Cells per axis; one entry per axis (a single entry is reused on the torus).
    pub cells: Vec<usize>,
    /// Period lengths; defaults to `2π` on every axis.
    pub periods: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { manifold: ManifoldKind::Circle, cells: vec![512], periods: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MorseConfig {
    /// Per-axis positions; a single entry is reused on every axis.
    pub min_pos: Vec<f64>,
    pub max_pos: Vec<f64>,
    pub rho0: f64,
    pub amplitude: f64,
}

impl Default for MorseConfig {
    fn default() -> Self {
        Self { min_pos: vec![0.5 * PI], max_pos: vec![1.5 * PI], rho0: DEFAULT_RHO0, amplitude: 0.1 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub rho_list: Vec<f64>,
    pub points: Vec<f64>,
    pub n_terms: usize,
    pub mehler_tolerance: f64,
    pub trace_t_list: Vec<f64>,
    pub trace_tolerance: f64,
    pub dim: usize,
    pub index: usize,
    pub indicator_t_list: Vec<f64>,
    pub indicator_tolerance: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rho_list: vec![0.0, 0.3, 0.6, 0.9],
            points: vec![-3.0, -1.5, 0.0, 1.5, 3.0],
            n_terms: 80,
            mehler_tolerance: 1e-9,
            trace_t_list: vec![0.5, 1.0, 2.0],
            trace_tolerance: 1e-8,
            dim: 2,
            index: 1,
            indicator_t_list: vec![2.0, 4.0, 8.0, 12.0],
            indicator_tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub k_list: Vec<f64>,
    /// `k` values at which the low spectrum of `Δ_k / k` is counted.
    pub localization_k: Vec<f64>,
    pub localization_threshold: f64,
    pub nilpotency_tolerance: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            k_list: vec![0.0, 4.0, 16.0, 64.0],
            localization_k: vec![64.0],
            localization_threshold: 0.5,
            nilpotency_tolerance: 1e-13,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HeatTraceConfig {
    pub k_list: Vec<f64>,
    pub t_eff_list: Vec<f64>,
    pub limit_k_list: Vec<f64>,
    pub limit_t_list: Vec<f64>,
    pub degrees: Vec<usize>,
    pub tolerance: f64,
}

impl Default for HeatTraceConfig {
    fn default() -> Self {
        Self {
            k_list: vec![0.0, 4.0, 16.0, 64.0],
            t_eff_list: vec![0.01, 0.1, 1.0],
            limit_k_list: vec![64.0, 256.0],
            limit_t_list: vec![1.0, 4.0, 8.0],
            degrees: Vec::new(),
            tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScaledKernelConfig {
    pub critical_point: usize,
    pub degree: usize,
    pub k_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub half_width: f64,
    pub count: usize,
    pub final_tolerance: f64,
    pub derivative_tolerance: f64,
}

impl Default for ScaledKernelConfig {
    fn default() -> Self {
        Self {
            critical_point: 0,
            degree: 0,
            k_list: vec![25.0, 50.0, 100.0, 200.0],
            t_list: vec![1.0],
            half_width: 2.0,
            count: 9,
            final_tolerance: 0.05,
            derivative_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub critical_point: usize,
    pub degrees: Vec<usize>,
    pub k: f64,
    pub t: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub epsilon: f64,
    pub radii: usize,
    pub decay_order: f64,
    pub far_k_list: Vec<f64>,
    /// Degrees of the far-field probe; empty means all.
    pub far_degrees: Vec<usize>,
    pub far_epsilon: f64,
    pub ratio: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            critical_point: 0,
            degrees: vec![0],
            k: 400.0,
            t: 1.0,
            d: 2.0,
            epsilon: wittenlab::asymptotics::DEFAULT_EPSILON,
            radii: 8,
            decay_order: 4.0,
            far_k_list: vec![16.0, 64.0, 256.0],
            far_degrees: Vec::new(),
            far_epsilon: wittenlab::asymptotics::DEFAULT_EPSILON,
            ratio: 10.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BochnerConfig {
    pub critical_point: usize,
    pub degree: usize,
    pub k: f64,
    pub radius: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    pub constant: f64,
}

impl Default for BochnerConfig {
    fn default() -> Self {
        let d = wittenlab::asymptotics::BochnerSettings::default();
        Self {
            critical_point: 0,
            degree: 0,
            k: d.k,
            radius: d.radius,
            epsilon: d.epsilon,
            trials: d.trials,
            seed: d.seed,
            slack: d.slack,
            constant: d.constant,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MorseReportConfig {
    pub k: f64,
    pub t: f64,
}

impl Default for MorseReportConfig {
    fn default() -> Self {
        Self { k: 64.0, t: 8.0 }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub morse: MorseConfig,
    pub model: ModelConfig,
    pub spectrum: SpectrumConfig,
    pub heat_trace: HeatTraceConfig,
    pub scaled_kernel: ScaledKernelConfig,
    pub decay: DecayConfig,
    pub bochner: BochnerConfig,
    pub morse_report: MorseReportConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let config = parse_config(&text).map_err(|e| match e {
        ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.into(), source },
        other => other,
    })?;
    Ok(config)
}

/// Parses and validates a configuration; errors carry line numbers.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|source| ConfigError::Parse { path: PathBuf::from("<config>"), source })?;
    config.validate()?;
    Ok(config)
}

fn nonempty<T>(name: &str, list: &[T]) -> Result<(), ConfigError> {
    if list.is_empty() {
        return Err(ConfigError::Invalid(format!("{name} must not be empty")));
    }
    Ok(())
}

fn positive(name: &str, value: f64) -> Result<(), ConfigError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(ConfigError::Invalid(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

impl RunConfig {
    /// Structural checks that do not need the grid.
    pub fn validate(&self) -> Result<(), ConfigError> {
        nonempty("grid.cells", &self.grid.cells)?;
        for (name, list) in [
            ("morse.min_pos", &self.morse.min_pos),
            ("morse.max_pos", &self.morse.max_pos),
            ("model.rho_list", &self.model.rho_list),
            ("model.points", &self.model.points),
            ("model.trace_t_list", &self.model.trace_t_list),
            ("model.indicator_t_list", &self.model.indicator_t_list),
            ("spectrum.k_list", &self.spectrum.k_list),
            ("heat_trace.k_list", &self.heat_trace.k_list),
            ("heat_trace.t_eff_list", &self.heat_trace.t_eff_list),
            ("heat_trace.limit_k_list", &self.heat_trace.limit_k_list),
            ("heat_trace.limit_t_list", &self.heat_trace.limit_t_list),
            ("scaled_kernel.k_list", &self.scaled_kernel.k_list),
            ("scaled_kernel.t_list", &self.scaled_kernel.t_list),
            ("decay.far_k_list", &self.decay.far_k_list),
        ] {
            nonempty(name, list)?;
        }
        nonempty("decay.degrees", &self.decay.degrees)?;
        for (name, value) in [
            ("model.mehler_tolerance", self.model.mehler_tolerance),
            ("model.trace_tolerance", self.model.trace_tolerance),
            ("model.indicator_tolerance", self.model.indicator_tolerance),
            ("spectrum.localization_threshold", self.spectrum.localization_threshold),
            ("spectrum.nilpotency_tolerance", self.spectrum.nilpotency_tolerance),
            ("heat_trace.tolerance", self.heat_trace.tolerance),
            ("scaled_kernel.final_tolerance", self.scaled_kernel.final_tolerance),
            ("scaled_kernel.derivative_tolerance", self.scaled_kernel.derivative_tolerance),
            ("scaled_kernel.half_width", self.scaled_kernel.half_width),
            ("decay.t", self.decay.t),
            ("decay.epsilon", self.decay.epsilon),
            ("decay.far_epsilon", self.decay.far_epsilon),
            ("decay.ratio", self.decay.ratio),
            ("decay.decay_order", self.decay.decay_order),
            ("bochner.radius", self.bochner.radius),
            ("bochner.epsilon", self.bochner.epsilon),
            ("bochner.constant", self.bochner.constant),
            ("morse_report.t", self.morse_report.t),
            ("morse.rho0", self.morse.rho0),
            ("morse.amplitude", self.morse.amplitude),
        ] {
            positive(name, value)?;
        }
        if !(0.0..1.0).contains(&self.bochner.slack) {
            return Err(ConfigError::Invalid(format!("bochner.slack must lie in [0, 1), got {}", self.bochner.slack)));
        }
        if self.scaled_kernel.count == 0 {
            return Err(ConfigError::Invalid("scaled_kernel.count must be positive".into()));
        }
        if self.grid.periods.iter().any(|&p| !(p > 0.0)) {
            return Err(ConfigError::Invalid(format!("grid.periods must be positive, got {:?}", self.grid.periods)));
        }
        Ok(())
    }

    fn axes(&self) -> usize {
        match self.grid.manifold {
            ManifoldKind::Circle => 1,
            ManifoldKind::Torus => 2,
        }
    }

    fn per_axis<T: Copy>(&self, name: &str, list: &[T]) -> Result<Vec<T>, ConfigError> {
        let n = self.axes();
        match list.len() {
            1 => Ok(vec![list[0]; n]),
            len if len == n => Ok(list.to_vec()),
            len => Err(ConfigError::Invalid(format!("{name} needs 1 or {n} entries, got {len}"))),
        }
    }

    pub fn build_complex(&self) -> Result<CellComplex, ConfigError> {
        let cells = self.per_axis("grid.cells", &self.grid.cells)?;
        let periods =
            if self.grid.periods.is_empty() { vec![2.0 * PI; self.axes()] } else { self.per_axis("grid.periods", &self.grid.periods)? };
        Ok(match self.grid.manifold {
            ManifoldKind::Circle => build_circle_complex(cells[0], periods[0])?,
            ManifoldKind::Torus => build_torus_complex(cells[0], cells[1], periods[0], periods[1])?,
        })
    }

    pub fn build_field(&self, complex: &CellComplex) -> Result<ScalarField, ConfigError> {
        let min_pos = self.per_axis("morse.min_pos", &self.morse.min_pos)?;
        let max_pos = self.per_axis("morse.max_pos", &self.morse.max_pos)?;
        let m = &self.morse;
        Ok(match self.grid.manifold {
            ManifoldKind::Circle => blended_morse_function_1d(complex, min_pos[0], max_pos[0], m.rho0, m.amplitude)?,
            ManifoldKind::Torus => {
                let axis = |i: usize| MorseParams { min_pos: min_pos[i], max_pos: max_pos[i], rho0: m.rho0, amplitude: m.amplitude };
                product_morse_function_2d(complex, axis(0), axis(1))?
            }
        })
    }

    /// Every configured `k` against the overflow guard of this grid.
    pub fn check_guard(&self, complex: &CellComplex, field: &ScalarField) -> Result<(), ConfigError> {
        let max_k = max_admissible_k(complex, field);
        let sections: [(&'static str, Vec<f64>); 6] = [
            ("spectrum", [self.spectrum.k_list.clone(), self.spectrum.localization_k.clone()].concat()),
            ("heat_trace", [self.heat_trace.k_list.clone(), self.heat_trace.limit_k_list.clone()].concat()),
            ("scaled_kernel", self.scaled_kernel.k_list.clone()),
            ("decay", [vec![self.decay.k], self.decay.far_k_list.clone()].concat()),
            ("bochner", vec![self.bochner.k]),
            ("morse_report", vec![self.morse_report.k]),
        ];
        for (section, ks) in sections {
            if let Some(&k) = ks.iter().find(|&&k| k < 0.0 || !k.is_finite()) {
                return Err(ConfigError::Invalid(format!("[{section}] k must be non-negative and finite, got {k}")));
            }
            if let Some(&k) = ks.iter().find(|&&k| k > max_k) {
                return Err(ConfigError::KTooLarge { section, k, max_k });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let config = parse_config("").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.grid.cells, vec![512]);
        assert_eq!(config.decay.d, 2.0);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("[grid]\ncells = [64]\n\n[spectrum]\nk_lst = [1.0]\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5"), "{msg}");
        assert!(msg.contains("k_lst"), "{msg}");
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(matches!(parse_config("[spectrum]\nk_list = []\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("[heat_trace]\ntolerance = -1.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("[grid]\nmanifold = \"sphere\"\n"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn torus_axes_and_guard() {
        let config = parse_config("[grid]\nmanifold = \"torus\"\ncells = [8, 10]\n[morse]\nrho0 = 0.3\n").unwrap();
        let complex = config.build_complex().unwrap();
        assert_eq!(complex.count(0), 80);
        let field = config.build_field(&complex).unwrap();
        assert_eq!(field.critical_points.len(), 4);
        config.check_guard(&complex, &field).unwrap();

        let mut big = config.clone();
        big.morse_report.k = 1e9;
        match big.check_guard(&complex, &field) {
            Err(ConfigError::KTooLarge { max_k, .. }) => assert!(big.to_owned().morse_report.k > max_k),
            other => panic!("{other:?}"),
        }
        let bad = parse_config("[grid]\nmanifold = \"torus\"\ncells = [8, 8, 8]\n").unwrap();
        assert!(bad.build_complex().is_err());
    }
}
