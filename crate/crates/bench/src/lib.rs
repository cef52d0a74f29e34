//! Benchmark fixtures.

use std::f64::consts::PI;

use wittenlab::{
    blended_morse_function_1d, build_circle_complex, build_torus_complex, product_morse_function_2d, CellComplex,
    MorseParams, ScalarField,
};

/// Circle with `n` cells and the blended Morse function used by the shipped configs.
pub fn circle(n: usize) -> (CellComplex, ScalarField) {
    let c = build_circle_complex(n, 2.0 * PI).expect("valid circle");
    let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 0.1).expect("valid field");
    (c, f)
}

/// `n x n` torus with the product Morse function.
pub fn torus(n: usize) -> (CellComplex, ScalarField) {
    let c = build_torus_complex(n, n, 2.0 * PI, 2.0 * PI).expect("valid torus");
    let p = MorseParams { min_pos: 0.5 * PI, max_pos: 1.5 * PI, rho0: 0.35, amplitude: 0.1 };
    let f = product_morse_function_2d(&c, p, p).expect("valid field");
    (c, f)
}
