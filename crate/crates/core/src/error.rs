use std::path::PathBuf;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} = {value} is outside the supported range {range}")]
    Range {
        what: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("shape mismatch: expected {expected} coordinates, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degree {degree} is out of range for a complex of dimension {dim}")]
    Degree { degree: usize, dim: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error(
        "overflow guard: k = {k} gives a local exponent of {exponent:.3} (> 700); \
         the maximum admissible k for this grid is {max_k:.6}"
    )]
    OverflowGuard { k: f64, exponent: f64, max_k: f64 },

    #[error("eigensolver failed to converge on a {n}x{n} operator (dump: {})", dump.display())]
    EigenSolver { n: usize, dump: PathBuf },

    #[error("no spectral gap detected; candidate kernel dimensions {first} and {second}")]
    GapAmbiguous { first: usize, second: usize },

    #[error("probe error: {0}")]
    Probe(String),

    #[error("grid too coarse: sqrt(k)*h = {scaled_spacing:.4} exceeds {limit}")]
    Resolution { scaled_spacing: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
