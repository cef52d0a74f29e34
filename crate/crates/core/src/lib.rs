//! Witten-deformed de Rham complexes on flat periodic grids, harmonic-oscillator
//! model kernels, and numerical checks of their semi-classical asymptotics.

pub mod asymptotics;
pub mod coboundary;
pub mod complex;
pub mod error;
pub mod model_oscillator;
pub mod morse;
pub mod morse_function;
pub mod quadrature;
pub mod report;
pub mod spectral;

pub use coboundary::{deformed_coboundary, max_admissible_k, DeformedCoboundary, EXPONENT_GUARD};
pub use complex::{build_circle_complex, build_torus_complex, CellComplex, Manifold};
pub use error::{Error, Result};
pub use morse::{
    betti_numbers, kernel_dimensions, mckean_singer_report, morse_counts, morse_inequality_report,
    trace_integral_limit_report, MorseReport, Status, Verdict,
};
pub use model_oscillator::{ModelCriticalPoint, MultiIndex, Sign, SignProfile};
pub use morse_function::{blended_morse_function_1d, product_morse_function_2d, MorseParams, ScalarField};
pub use spectral::{
    assemble_witten_laplacian, eigendecompose, heat_kernel_entry, heat_trace, kernel_dimension, GapPolicy,
    HeatEvaluation, HodgeInner, SpectralDecomposition, WittenOperator, WittenSystem,
};
pub use report::{Check, ExperimentReport, Value};
