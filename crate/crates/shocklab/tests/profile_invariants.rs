//! Invariants of the stationary profile `W*` and its 3D lift `W̄`.

use proptest::prelude::*;

use shocklab::profile::{barw_derivative, eta, eval_barw, eval_wstar, exact_burgers_residual};

proptest! {
    #[test]
    fn wstar_is_odd(y in -1e4f64..1e4) {
        let (a, b) = (eval_wstar(y), eval_wstar(-y));
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn wstar_solves_the_cubic(y in -1e4f64..1e4) {
        let w = eval_wstar(y);
        prop_assert!((y + w + w * w * w).abs() <= 1e-10 * (1.0 + y.abs()));
    }

    #[test]
    fn wstar_is_strictly_decreasing(y in -1e3f64..1e3, dy in 1e-6f64..10.0) {
        prop_assert!(eval_wstar(y + dy) < eval_wstar(y));
    }

    #[test]
    fn barw_is_rotation_invariant_across(y1 in -10.0f64..10.0, r in 0.0f64..5.0, th in 0.0f64..6.3) {
        let a = eval_barw([y1, r, 0.0], false).value;
        let b = eval_barw([y1, r * th.cos(), r * th.sin()], false).value;
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn barw_is_odd_along_y1(y1 in -10.0f64..10.0, y2 in -5.0f64..5.0, y3 in -5.0f64..5.0) {
        let a = eval_barw([y1, y2, y3], false).value;
        let b = eval_barw([-y1, y2, y3], false).value;
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn barw_is_a_stationary_solution(y1 in -10.0f64..10.0, y2 in -5.0f64..5.0, y3 in -5.0f64..5.0) {
        prop_assert!(exact_burgers_residual([y1, y2, y3]).abs() <= 1e-10);
    }

    #[test]
    fn eta_is_at_least_one(y1 in -50.0f64..50.0, y2 in -5.0f64..5.0, y3 in -5.0f64..5.0) {
        prop_assert!(eta([y1, y2, y3]) >= 1.0);
    }
}

#[test]
fn wstar_cube_root_asymptotics() {
    for y in [1e3, 1e6, 1e9] {
        let rel = (eval_wstar(y) / f64::cbrt(y) + 1.0).abs();
        assert!(rel <= 0.5 * y.powf(-2.0 / 3.0), "y = {y}: {rel}");
    }
}

#[test]
fn wstar_normalisation_at_origin() {
    assert_eq!(eval_wstar(0.0), 0.0);
    let h = 1e-6;
    let slope = (eval_wstar(h) - eval_wstar(-h)) / (2.0 * h);
    assert!((slope + 1.0).abs() < 1e-9);
}

#[test]
fn genericity_tensor_at_origin() {
    let cases = [([3, 0, 0], 6.0), ([1, 2, 0], 2.0), ([1, 0, 2], 2.0), ([2, 1, 0], 0.0), ([1, 1, 1], 0.0)];
    for (gamma, expected) in cases {
        let v = barw_derivative([0.0; 3], gamma).unwrap();
        assert!((v - expected).abs() <= 1e-8, "{gamma:?}: {v}");
    }
}
