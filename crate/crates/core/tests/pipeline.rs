//! End-to-end checks that exercise several modules together through the
//! public API only.

use minimax_core::boundary::*;
use minimax_core::constrained::*;
use minimax_core::continuous::*;
use minimax_core::func::*;
use minimax_core::point::*;
use nalgebra::{DMatrix, DVector};

fn spec() -> BvpSpec {
    let a = mat_fn(|t: f64| DMatrix::from_row_slice(2, 2, &[0.3, 1.0 + t, -0.5, 0.2 * t]));
    BvpSpec::homogeneous(
        1.5,
        a,
        DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        DMatrix::from_row_slice(1, 2, &[0.2, 1.0]),
    )
    .unwrap()
}

fn ellipsoid() -> EllipsoidG {
    EllipsoidG::from_inverse_weights(
        DMatrix::from_element(1, 1, 2.0),
        DMatrix::from_element(1, 1, 0.5),
        const_mat(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7])),
        vec_fn(|t: f64| DVector::from_vec(vec![t.sin(), 1.0 - t])),
        DVector::from_element(1, 0.3),
        DVector::from_element(1, -0.8),
    )
    .unwrap()
}

fn window() -> IntervalObservation {
    IntervalObservation::new(
        mat_fn(|t: f64| DMatrix::from_row_slice(1, 2, &[1.0, t])),
        const_mat(DMatrix::from_element(1, 1, 3.0)),
        0.2,
        1.1,
    )
    .unwrap()
}

fn target() -> FunctionalTarget {
    FunctionalTarget {
        a: DVector::from_vec(vec![0.7, -1.2]),
        s: 0.6,
    }
}

#[test]
fn estimator_and_filter_agree_for_either_pivot() {
    let spec = spec();
    let g = ellipsoid();
    let obs = window();
    let y = vec_fn(|t: f64| DVector::from_element(1, (3.0 * t).cos() + 0.4));
    let mut results = Vec::new();
    // Both entries of B0 and of B1 are nonzero, so every single column is a valid pivot.
    for (l, r) in [(0, 0), (1, 1), (0, 1)] {
        let alg = build_boundary_algebra_with(&spec.b0, &spec.b1, vec![l], vec![r]).unwrap();
        let sol = solve_estimator(&spec, &alg, &g, &obs, &target(), 129).unwrap();
        let cost = evaluate_cost(&sol, &alg, &g, &obs);
        assert!((cost - sol.sigma_sq).abs() < 1e-6 * sol.sigma_sq.max(1.0));
        let direct = estimate_from_observation(&sol, &y);
        let filtered = solve_filter(&spec, &alg, &g, &obs, &y, 0.6, 129)
            .unwrap()
            .estimate(&target().a);
        assert!((direct - filtered).abs() < 1e-8);
        results.push((sol.sigma, direct));
    }
    for w in results.windows(2) {
        assert!((w[0].0 - w[1].0).abs() < 1e-8);
        assert!((w[0].1 - w[1].1).abs() < 1e-8);
    }
}

#[test]
fn more_precise_observations_never_hurt() {
    let spec = spec();
    let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
    let g = ellipsoid();
    let mut last = f64::INFINITY;
    for c in [0.5, 1.0, 2.0, 8.0] {
        let obs = window().scaled_noise(c);
        let sol = solve_estimator(&spec, &alg, &g, &obs, &target(), 65).unwrap();
        assert!(sol.sigma <= last + 1e-10);
        last = sol.sigma;
    }
}

#[test]
fn unknown_boundary_data_cost_accuracy() {
    let spec = spec();
    let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
    let g = ellipsoid();
    let obs = window();
    let free = solve_estimator(&spec, &alg, &g, &obs, &target(), 65).unwrap();
    let constrained =
        solve_constrained_estimator(&spec, &alg, &g.q2_inv, &obs, &target(), 65).unwrap();
    assert!(constrained.constraint_residual < 1e-8);
    assert!(constrained.base.sigma >= free.sigma - 1e-10);
}

#[test]
fn each_added_point_observation_helps() {
    let spec = spec();
    let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
    let g = ellipsoid();
    let q = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0]);
    let mut last = f64::INFINITY;
    let times = [0.3, 0.9, 1.2, 0.45];
    for k in 1..=times.len() {
        let mut ts: Vec<f64> = times[..k].to_vec();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pts = PointObservationSet::new(ts, vec![q.clone(); k]).unwrap();
        let sol = solve_point_estimator(&spec, &alg, &g, &pts, &target().a, 0.6, 65).unwrap();
        let cost = evaluate_point_cost(&sol, &alg, &g, &pts).unwrap();
        assert!((cost - sol.sigma_sq).abs() < 1e-6 * sol.sigma_sq.max(1.0));
        assert!(sol.sigma <= last + 1e-8);
        last = sol.sigma;
    }
}
