//! Experiment runner: configuration, orchestration, CSV output and exit codes.

pub mod config;
pub mod experiments;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use experiments::{run_experiment, Outcome, SUBCOMMANDS};

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "WITTENLAB_OUT";

pub const DEFAULT_OUT_DIR: &str = "wittenlab-out";

/// All checks passed.
pub const EXIT_PASS: i32 = 0;
/// At least one check failed, or a computation did not complete.
pub const EXIT_FAIL: i32 = 1;
/// Bad configuration or usage.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown subcommand {0:?}; expected one of {expected}", expected = SUBCOMMANDS.join(", "))]
    UnknownSubcommand(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] wittenlab::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        use wittenlab::Error as E;
        match self {
            RunError::UnknownSubcommand(_) => EXIT_USAGE,
            RunError::Config(ConfigError::Core(e)) | RunError::Core(e) => match e {
                E::Domain(_)
                | E::Range { .. }
                | E::Shape { .. }
                | E::Degree { .. }
                | E::Config(_)
                | E::Construction(_)
                | E::OverflowGuard { .. }
                | E::Probe(_)
                | E::Resolution { .. } => EXIT_USAGE,
                _ => EXIT_FAIL,
            },
            RunError::Config(_) => EXIT_USAGE,
        }
    }
}

/// Output directory: explicit flag, then `WITTENLAB_OUT`, then the config, then the default.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs `name`, writes its CSVs under `out` and prints one line per check.
/// Returns the process exit code.
pub fn run_subcommand(name: &str, config: &RunConfig, out: &Path) -> i32 {
    run_subcommand_to(name, config, out, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run_subcommand`] with explicit output streams.
pub fn run_subcommand_to(name: &str, config: &RunConfig, out: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match run_experiment(name, config) {
        Ok(outcome) => outcome,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let created = now();
    for report in &outcome.reports {
        match report.write_to_dir(out, created) {
            Ok(paths) => {
                for path in paths {
                    let _ = writeln!(stdout, "wrote {}", path.display());
                }
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_FAIL;
            }
        }
    }
    if outcome.verdict_lines.is_empty() {
        for (report, check) in outcome.checks() {
            let _ = writeln!(stdout, "{report}: {} {} ({})", check.name, check.verdict(), check.detail);
        }
    } else {
        for line in &outcome.verdict_lines {
            let _ = writeln!(stdout, "{line}");
        }
    }
    if outcome.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

#[derive(Parser)]
#[command(name = "wittenlab", version, about = "Witten Laplacian heat-kernel experiments")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides WITTENLAB_OUT and the config).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Subcommand,
}

#[derive(clap::Subcommand, Clone, Copy)]
enum Subcommand {
    /// Closed-form oscillator identities.
    ModelCheck,
    /// Spectra, kernel dimensions, nilpotency and low-spectrum counts.
    Spectrum,
    /// McKean-Singer sums and trace limits.
    HeatTrace,
    /// Scaled kernel against the model kernel.
    ScaledKernel,
    /// Annulus and far-field decay.
    Decay,
    /// Rayleigh quotients on annulus-supported cochains.
    Bochner,
    /// Weak, strong and Euler Morse inequalities.
    MorseReport,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Subcommand::ModelCheck => "model-check",
            Subcommand::Spectrum => "spectrum",
            Subcommand::HeatTrace => "heat-trace",
            Subcommand::ScaledKernel => "scaled-kernel",
            Subcommand::Decay => "decay",
            Subcommand::Bochner => "bochner",
            Subcommand::MorseReport => "morse-report",
        }
    }
}

/// Entry point of the `wittenlab` binary; `args` includes the program name.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_PASS;
        }
    };
    let config = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(config) => config,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
        },
        None => RunConfig::default(),
    };
    let out = output_dir(cli.out.as_deref(), &config);
    run_subcommand_to(cli.command.name(), &config, &out, stdout, stderr)
}
