//! End-to-end checks of the public API against independent closed forms.

use std::f64::consts::PI;

use wittenlab::model_oscillator::{hermite_function, model_kernel_component, oscillator_heat_kernel};
use wittenlab::{
    assemble_witten_laplacian, betti_numbers, blended_morse_function_1d, build_circle_complex, build_torus_complex,
    eigendecompose, heat_trace, max_admissible_k, morse_inequality_report, product_morse_function_2d, Error,
    ModelCriticalPoint, MorseParams, MultiIndex, Sign, WittenSystem,
};

#[test]
fn circle_spectrum_is_circulant_in_both_degrees() {
    let n = 24;
    let length = 3.0;
    let c = build_circle_complex(n, length).unwrap();
    let f = blended_morse_function_1d(&c, 0.75, 2.25, 0.2, 0.1).unwrap();
    let h = length / n as f64;
    let mut oracle: Vec<f64> = (0..n).map(|j| 4.0 / (h * h) * (PI * j as f64 / n as f64).sin().powi(2)).collect();
    oracle.sort_by(f64::total_cmp);
    for r in 0..2 {
        let dec = eigendecompose(&assemble_witten_laplacian(&c, &f, 0.0, r).unwrap()).unwrap();
        for (a, b) in dec.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * oracle[n - 1], "r = {r}: {a} vs {b}");
        }
    }
}

#[test]
fn torus_spectrum_is_a_sum_of_circle_spectra() {
    let (nx, ny) = (8, 10);
    let c = build_torus_complex(nx, ny, 2.0 * PI, 2.0 * PI).unwrap();
    let p = MorseParams { min_pos: 0.5 * PI, max_pos: 1.5 * PI, rho0: 0.35, amplitude: 0.1 };
    let f = product_morse_function_2d(&c, p, p).unwrap();
    let axis = |m: usize| -> Vec<f64> {
        let h = 2.0 * PI / m as f64;
        (0..m).map(|j| 4.0 / (h * h) * (PI * j as f64 / m as f64).sin().powi(2)).collect()
    };
    let (ax, ay) = (axis(nx), axis(ny));
    let mut oracle: Vec<f64> = ax.iter().flat_map(|a| ay.iter().map(move |b| a + b)).collect();
    oracle.sort_by(f64::total_cmp);
    let scale = oracle.last().copied().unwrap();
    for r in [0, 2] {
        let dec = eigendecompose(&assemble_witten_laplacian(&c, &f, 0.0, r).unwrap()).unwrap();
        for (a, b) in dec.eigenvalues.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * scale, "r = {r}");
        }
    }
    // One-forms carry two copies.
    let dec = eigendecompose(&assemble_witten_laplacian(&c, &f, 0.0, 1).unwrap()).unwrap();
    let mut doubled: Vec<f64> = oracle.iter().flat_map(|&v| [v, v]).collect();
    doubled.sort_by(f64::total_cmp);
    for (a, b) in dec.eigenvalues.iter().zip(&doubled) {
        assert!((a - b).abs() < 1e-9 * scale);
    }
}

#[test]
fn betti_numbers_of_circle_and_torus() {
    assert_eq!(betti_numbers(&build_circle_complex(16, 1.0).unwrap()).unwrap(), vec![1, 1]);
    assert_eq!(betti_numbers(&build_torus_complex(8, 9, 1.0, 2.0).unwrap()).unwrap(), vec![1, 2, 1]);
}

#[test]
fn alternating_trace_sum_vanishes() {
    let c = build_torus_complex(10, 10, 2.0 * PI, 2.0 * PI).unwrap();
    let p = MorseParams { min_pos: 0.5 * PI, max_pos: 1.5 * PI, rho0: 0.35, amplitude: 0.1 };
    let f = product_morse_function_2d(&c, p, p).unwrap();
    let sys = WittenSystem::new(&c, &f);
    for k in [0.0, 3.0, 12.0] {
        let decs = sys.all_degrees(k).unwrap();
        for t in [0.001, 0.05, 2.0] {
            let z: Vec<f64> = decs.iter().map(|d| heat_trace(d, t).unwrap()).collect();
            let total = z[0] - z[1] + z[2];
            assert!(total.abs() < 1e-8 * z.iter().sum::<f64>(), "k = {k}, t = {t}: {total}");
        }
    }
}

#[test]
fn oscillator_kernel_equals_hermite_expansion() {
    // e^{-tL^∓}(x, y) = Σ e^{-t(2N + 1 ∓ 1)} Φ_N(x) Φ_N(y)
    for (sign, shift) in [(Sign::Minus, 0.0), (Sign::Plus, 2.0)] {
        for &(t, x, y) in &[(0.7, 0.3, -0.4), (1.5, 1.2, 0.9), (3.0, -2.0, 0.0)] {
            let series: f64 = (0..120)
                .map(|n| (-t * (2.0 * n as f64 + shift)).exp() * hermite_function(n, x).unwrap() * hermite_function(n, y).unwrap())
                .sum();
            let closed = oscillator_heat_kernel(sign, t, x, y).unwrap();
            assert!((series - closed).abs() < 1e-12, "{sign:?} {t} {x} {y}: {series} vs {closed}");
        }
    }
}

#[test]
fn model_component_factorizes() {
    let p = ModelCriticalPoint::new(2, 1).unwrap();
    let (x, y) = ([0.2, -0.5], [0.4, 0.1]);
    let t = 0.9;
    let k = |s, i: usize| oscillator_heat_kernel(s, t, x[i], y[i]).unwrap();
    // Index-1 point with the first axis unstable: {dx_1} sees L^- on both axes.
    let first = model_kernel_component(p, &MultiIndex::new(vec![1], 2).unwrap(), t, &x, &y).unwrap();
    assert!((first - k(Sign::Minus, 0) * k(Sign::Minus, 1)).abs() < 1e-14);
    let empty = model_kernel_component(p, &MultiIndex::empty(), t, &x, &y).unwrap();
    assert!((empty - k(Sign::Plus, 0) * k(Sign::Minus, 1)).abs() < 1e-14);
    let second = model_kernel_component(p, &MultiIndex::new(vec![2], 2).unwrap(), t, &x, &y).unwrap();
    assert!((second - k(Sign::Plus, 0) * k(Sign::Plus, 1)).abs() < 1e-14);
}

#[test]
fn guard_rejects_oversized_k() {
    let c = build_circle_complex(64, 2.0 * PI).unwrap();
    let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 0.1).unwrap();
    let max_k = max_admissible_k(&c, &f);
    assert!(max_k.is_finite() && max_k > 1000.0);
    match assemble_witten_laplacian(&c, &f, 2.0 * max_k, 0) {
        Err(Error::OverflowGuard { max_k: reported, .. }) => assert!((reported - max_k).abs() < 1e-9 * max_k),
        other => panic!("{other:?}"),
    }
}

#[test]
fn circle_morse_report_is_all_equalities() {
    let c = build_circle_complex(128, 2.0 * PI).unwrap();
    let f = blended_morse_function_1d(&c, 0.5 * PI, 1.5 * PI, 0.35, 0.1).unwrap();
    let sys = WittenSystem::new(&c, &f);
    let report = morse_inequality_report(&sys, 32.0, 8.0).unwrap();
    assert_eq!(report.betti, vec![1, 1]);
    assert_eq!(report.morse, vec![1, 1]);
    assert_eq!(report.verdict_lines(), ["WEAK r=0 PASS", "WEAK r=1 PASS", "STRONG r=0 PASS", "EULER PASS"]);
}
