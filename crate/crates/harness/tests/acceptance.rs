//! Acceptance run. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any of them fails. Tolerances and runtime limits are
//! pinned below and never adjusted to make a run pass.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use minimax_core::boundary::{build_boundary_algebra, green_residual, BvpSpec};
use minimax_core::continuous::{EllipsoidG, FilterSolution};
use minimax_core::func::{const_mat, const_scalar, mat_fn, scalar_fn, vec_fn, VecFn};
use minimax_core::grid::Grid;
use minimax_core::ordern::operator::{Coefficient, OrderNSpec};
use minimax_core::ordern::structure::{
    complete_and_derive_adjoint_forms, null_space_bases, solvability_residual,
};
use minimax_core::point::{
    point_estimate, solve_point_estimator, solve_point_filter, PointObservationSet,
};
use minimax_core::riccati::{
    eliminate, elimination_target, reconstruct, riccati_sweep, solve_elimination_estimator,
    solve_elimination_filter, solve_u_optimal, solve_u_optimal_filter, ElimObservation,
    WeightVariant,
};
use minimax_core::trajectory::PiecewiseTrajectory;
use minimax_harness::config::ProblemConfig;
use minimax_harness::run::{
    compare_oracle, run_problem, Command, Overrides, GUARANTEE_DRAWS, SIGNS_PER_DRAW,
};
use minimax_harness::scenario::Scenario;
use minimax_harness::worst::{random_admissible, saturation, Experiment};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ProblemConfig, String> {
    ProblemConfig::load(&configs().join(name)).map_err(|e| format!("{name}: {e}"))
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

// 1. Pairing identity of the boundary companion matrices.
const ALGEBRA_TOL: f64 = 1e-12;

fn boundary_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let m = rng.random_range(1..n);
        let b0 = uniform_matrix(&mut rng, m, n);
        let b1 = uniform_matrix(&mut rng, n - m, n);
        let alg = build_boundary_algebra(&b0, &b1).map_err(e2s)?;
        let v = uniform_vector(&mut rng, n);
        let w = uniform_vector(&mut rng, n);
        worst = worst.max(alg.pairing_residual(&b0, &b1, &v, &w));
    }
    Ok((
        worst <= ALGEBRA_TOL,
        format!("max residual {worst:.2e} over 100 draws (tol {ALGEBRA_TOL:.0e})"),
    ))
}

// 2. Green formula for the first-order operator on random smooth pairs.
const GREEN_TOL: f64 = 1e-7;
const GREEN_RATIO: (f64, f64) = (12.0, 20.0);

/// Sum of a few sinusoids per component, with its derivative.
struct Smooth {
    terms: Vec<Vec<(f64, f64, f64)>>,
}

impl Smooth {
    fn random(rng: &mut ChaCha8Rng, n: usize) -> Self {
        let terms = (0..n)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        (
                            rng.random_range(-1.0..1.0),
                            rng.random_range(1.0..6.0),
                            rng.random_range(0.0..6.3),
                        )
                    })
                    .collect()
            })
            .collect();
        Smooth { terms }
    }

    fn sample(&self, grid: &Grid) -> PiecewiseTrajectory {
        let n = self.terms.len();
        PiecewiseTrajectory::sample(grid, |_, t| {
            let mut x = DVector::zeros(2 * n);
            for (i, comp) in self.terms.iter().enumerate() {
                for &(c, w, p) in comp {
                    x[i] += c * (w * t + p).sin();
                    x[n + i] += c * w * (w * t + p).cos();
                }
            }
            x
        })
    }
}

fn green_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut coarse, mut fine) = (0.0f64, 0.0, 0.0);
    for _ in 0..20 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..n);
        let horizon = rng.random_range(0.5..2.0);
        let (a0, a1) = (
            uniform_matrix(&mut rng, n, n),
            uniform_matrix(&mut rng, n, n),
        );
        let a = mat_fn(move |t: f64| &a0 + &a1 * t);
        let spec = BvpSpec::homogeneous(
            horizon,
            a,
            uniform_matrix(&mut rng, m, n),
            uniform_matrix(&mut rng, n - m, n),
        )
        .map_err(e2s)?;
        let alg = build_boundary_algebra(&spec.b0, &spec.b1).map_err(e2s)?;
        let (phi, psi) = (Smooth::random(&mut rng, n), Smooth::random(&mut rng, n));
        let mut r = [0.0; 2];
        for (slot, nodes) in r.iter_mut().zip([513, 1025]) {
            let g = Grid::new(vec![0.0, horizon], nodes).map_err(e2s)?;
            *slot = green_residual(&spec, &alg, &phi.sample(&g), &psi.sample(&g)).map_err(e2s)?;
        }
        worst = worst.max(r[0]);
        coarse += r[0];
        fine += r[1];
    }
    let ratio = coarse / fine;
    let pass = worst <= GREEN_TOL && ratio >= GREEN_RATIO.0 && ratio <= GREEN_RATIO.1;
    Ok((
        pass,
        format!(
            "max residual {worst:.2e} at 513 nodes (tol {GREEN_TOL:.0e}); shrink under doubling {ratio:.1}x (band {}..{})",
            GREEN_RATIO.0, GREEN_RATIO.1
        ),
    ))
}

// 3 and 4. Duality and representation on the configured instances.
const DUALITY_TOL: f64 = 1e-6;
const REPRESENTATION_TOL: f64 = 1e-6;
const INSTANCES: [&str; 5] = [
    "continuous.toml",
    "continuous_coupled.toml",
    "constrained.toml",
    "point.toml",
    "elimination.toml",
];

fn duality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in INSTANCES {
        let start = Instant::now();
        let sc = Scenario::build(&load(name)?).map_err(e2s)?;
        let sol = sc.solve().map_err(e2s)?;
        let s = sc.summary(&sol).map_err(e2s)?;
        let (dual, cost) = (s.dual_gap(), s.cost_gap());
        let ok =
            dual <= DUALITY_TOL && cost <= DUALITY_TOL && start.elapsed() < Duration::from_secs(10);
        pass &= ok;
        parts.push(format!("{name}: pairing {dual:.1e} cost {cost:.1e}"));
    }
    Ok((
        pass,
        format!(
            "{} (tol {DUALITY_TOL:.0e} x max(1, sigma^2))",
            parts.join("; ")
        ),
    ))
}

fn representation() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in INSTANCES {
        let start = Instant::now();
        let cfg = load(name)?;
        let sc = Scenario::build(&cfg).map_err(e2s)?;
        let sol = sc.solve().map_err(e2s)?;
        let exp = Experiment::new(&sc, &sol).map_err(e2s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 4);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let forcing = exp.random_forcing(&mut rng).map_err(e2s)?;
            let noise = exp.random_noise(&mut rng).map_err(e2s)?;
            let y = exp.truth(&forcing).map_err(e2s)?.y.add_scaled(1.0, &noise);
            let direct = exp.estimate(&y).map_err(e2s)?;
            let filtered = sc.filter(&y).map_err(e2s)?.estimate;
            worst = worst.max((direct - filtered).abs() / direct.abs().max(1.0));
        }
        pass &= worst <= REPRESENTATION_TOL && start.elapsed() < Duration::from_secs(30);
        parts.push(format!("{name}: {worst:.1e}"));
    }
    Ok((
        pass,
        format!(
            "max gap over 100 draws {} (tol {REPRESENTATION_TOL:.0e} x max(1, |estimate|))",
            parts.join("; ")
        ),
    ))
}

// 5. Solver against the brute-force finite-dimensional minimax.
const ORACLE_TOL: f64 = 1e-3;
const ORACLE_IMPROVEMENT: f64 = 3.0;

fn oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in [
        "continuous.toml",
        "constrained.toml",
        "point.toml",
        "neumann.toml",
        "rhs.toml",
    ] {
        let start = Instant::now();
        let sc = Scenario::build(&load(name)?).map_err(e2s)?;
        let sol = sc.solve().map_err(e2s)?;
        let summary = sc.summary(&sol).map_err(e2s)?;
        let c512 = compare_oracle(&sc, &sol, &summary, 512).map_err(e2s)?;
        let c1024 = compare_oracle(&sc, &sol, &summary, 1024).map_err(e2s)?;
        let gain = c512.rel_diff / c1024.rel_diff;
        let ok = c512.rel_diff <= ORACLE_TOL
            && gain >= ORACLE_IMPROVEMENT
            && start.elapsed() < Duration::from_secs(120);
        pass &= ok;
        parts.push(format!(
            "{name}: {:.1e} -> {:.1e} ({gain:.1}x)",
            c512.rel_diff, c1024.rel_diff
        ));
    }
    Ok((
        pass,
        format!(
            "{} (tol {ORACLE_TOL:.0e} at 512, gain >= {ORACLE_IMPROVEMENT}x at 1024)",
            parts.join("; ")
        ),
    ))
}

// 6. Riccati sweep, elimination round trip and the clamped representation.
const TANH_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-6;

fn scalar_elimination() -> Result<minimax_core::riccati::EliminatedSystem, String> {
    let one = const_mat(DMatrix::from_element(1, 1, 1.0));
    let zero = const_mat(DMatrix::from_element(1, 1, 0.0));
    let sweep = Arc::new(riccati_sweep(one.clone(), 257).map_err(e2s)?);
    let c = ElimObservation {
        c11: one.clone(),
        c12: zero.clone(),
        c21: zero,
        c22: one.clone(),
    };
    eliminate(sweep, one, &DMatrix::identity(1, 1), &c).map_err(e2s)
}

fn riccati() -> Outcome {
    let sweep: minimax_core::riccati::SweepResult =
        riccati_sweep(const_mat(DMatrix::from_element(1, 1, 1.0)), 257).map_err(e2s)?;
    let mut tanh_err: f64 = 0.0;
    for (t, p) in sweep.times.iter().zip(&sweep.p) {
        tanh_err = tanh_err.max((p[(0, 0)] - t.tanh()).abs());
    }
    for t in [0.1234, 0.5, 0.8765] {
        tanh_err = tanh_err.max((sweep.p_at(t)[(0, 0)] - f64::tanh(t)).abs());
    }

    // phi'' = phi + f with phi'(0) = 0 and phi(1) = 0, solved by hand.
    let c1 = 1.0f64.cosh();
    let c3 = 3.0f64.cos() / (10.0 * c1);
    type Exact = Box<dyn Fn(f64) -> (f64, f64)>;
    let cases: Vec<(VecFn, Exact)> = vec![
        (
            vec_fn(|_t: f64| DVector::from_element(1, 1.0)),
            Box::new(move |t: f64| (t.cosh() / c1 - 1.0, t.sinh() / c1)),
        ),
        (
            vec_fn(|t: f64| DVector::from_element(1, (3.0 * t).cos())),
            Box::new(move |t: f64| {
                (
                    -(3.0 * t).cos() / 10.0 + c3 * t.cosh(),
                    0.3 * (3.0 * t).sin() + c3 * t.sinh(),
                )
            }),
        ),
    ];
    let e = scalar_elimination()?;
    let mut trip: f64 = 0.0;
    for (f, exact) in &cases {
        let (phi, dphi) = reconstruct(&e, f, 257).map_err(e2s)?;
        let g = phi.grid().clone();
        for k in 0..g.intervals() {
            for (j, &t) in g.nodes(k).iter().enumerate() {
                let (v, d) = exact(t);
                trip = trip
                    .max((phi.node(k, j)[0] - v).abs())
                    .max((dphi.node(k, j)[0] - d).abs());
            }
        }
    }

    let q1 = const_scalar(0.8);
    let b = elimination_target(
        &e.sweep,
        0.6,
        &DVector::from_element(1, 1.0),
        &DVector::from_element(1, -0.3),
    );
    let y = vec_fn(|t: f64| DVector::from_vec(vec![(2.0 * t).exp(), t * t - 0.2]));
    let mut rep: f64 = 0.0;
    let free = solve_elimination_estimator(&e, &q1, &b, 0.6, 129).map_err(e2s)?;
    let (_, xs) = solve_elimination_filter(&e, &q1, &y, 0.6, 129).map_err(e2s)?;
    rep = rep.max((free.estimate(&y) - b.dot(&xs)).abs() / (1.0 + b.norm() * xs.norm()));
    for variant in [WeightVariant::Squared, WeightVariant::Linear] {
        let sol = solve_u_optimal(&e, &q1, &b, 0.6, variant, 129).map_err(e2s)?;
        let (_, xs) = solve_u_optimal_filter(&e, &q1, &y, 0.6, variant, 129).map_err(e2s)?;
        rep = rep.max((sol.estimate(&y) - b.dot(&xs)).abs() / (1.0 + b.norm() * xs.norm()));
    }
    let pass = tanh_err <= TANH_TOL && trip <= ROUND_TRIP_TOL && rep <= ROUND_TRIP_TOL;
    Ok((
        pass,
        format!(
            "tanh {tanh_err:.1e} (tol {TANH_TOL:.0e}); round trip {trip:.1e} (tol {ROUND_TRIP_TOL:.0e}); representation {rep:.1e} (tol {ROUND_TRIP_TOL:.0e} x scale)"
        ),
    ))
}

// 7. Adding point observations never increases the error.
const MONOTONE_SLACK: f64 = 1e-8;

fn point_monotonicity() -> Outcome {
    let a = mat_fn(|t: f64| DMatrix::from_row_slice(2, 2, &[0.3, 1.0 + t, -0.5, 0.2 * t]));
    let spec = BvpSpec::homogeneous(
        1.5,
        a,
        DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        DMatrix::from_row_slice(1, 2, &[0.2, 1.0]),
    )
    .map_err(e2s)?;
    let alg = build_boundary_algebra(&spec.b0, &spec.b1).map_err(e2s)?;
    let g = EllipsoidG::from_inverse_weights(
        DMatrix::from_element(1, 1, 2.0),
        DMatrix::from_element(1, 1, 0.5),
        const_mat(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7])),
        vec_fn(|t: f64| DVector::from_vec(vec![t.sin(), 1.0 - t])),
        DVector::from_element(1, 0.3),
        DVector::from_element(1, -0.8),
    )
    .map_err(e2s)?;
    let target = DVector::from_vec(vec![0.7, -1.2]);
    let s = 0.6;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut times: Vec<f64> = Vec::new();
    while times.len() < 10 {
        let t: f64 = rng.random_range(0.05..1.45);
        if times.iter().chain([&s]).all(|x| (x - t).abs() > 0.02) {
            times.push(t);
        }
    }
    let weights: Vec<DMatrix<f64>> = (0..10)
        .map(|_| {
            let m = uniform_matrix(&mut rng, 2, 2);
            &m * m.transpose() + DMatrix::identity(2, 2) * 0.5
        })
        .collect();
    let (mut last, mut worst_rise, mut rep) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut sigmas = Vec::new();
    for k in 1..=10 {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
        let pts = PointObservationSet::new(
            order.iter().map(|&i| times[i]).collect(),
            order.iter().map(|&i| weights[i].clone()).collect(),
        )
        .map_err(e2s)?;
        let sol = solve_point_estimator(&spec, &alg, &g, &pts, &target, s, 129).map_err(e2s)?;
        worst_rise = worst_rise.max(sol.sigma - last);
        last = sol.sigma;
        sigmas.push(sol.sigma);
        for _ in 0..10 {
            let ys: Vec<DVector<f64>> = (0..k).map(|_| uniform_vector(&mut rng, 2) * 3.0).collect();
            let direct = point_estimate(&sol, &ys).map_err(e2s)?;
            let filter: FilterSolution =
                solve_point_filter(&spec, &alg, &g, &pts, &ys, s, 129).map_err(e2s)?;
            let filtered = filter.estimate(&target);
            rep = rep.max((direct - filtered).abs() / direct.abs().max(1.0));
        }
    }
    let pass = worst_rise <= MONOTONE_SLACK && rep <= REPRESENTATION_TOL;
    Ok((
        pass,
        format!(
            "sigma {:.4} -> {:.4}, largest step {worst_rise:.1e} (slack {MONOTONE_SLACK:.0e}); representation {rep:.1e} (tol {REPRESENTATION_TOL:.0e})",
            sigmas[0], sigmas[9]
        ),
    ))
}

// 8. Kernels and solvability for -phi'' with Neumann conditions.
const KERNEL_TOL: f64 = 1e-8;
const CONSISTENT_TOL: f64 = 1e-7;

fn neumann() -> Outcome {
    let (a, b): (f64, f64) = (0.5, 2.0);
    let forms = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    let spec: OrderNSpec = OrderNSpec::new(
        a,
        b,
        vec![
            Coefficient::constant(-1.0),
            Coefficient::constant(0.0),
            Coefficient::constant(0.0),
        ],
        forms,
    )
    .map_err(e2s)?;
    let st = complete_and_derive_adjoint_forms(&spec).map_err(e2s)?;
    let grid = Grid::new(vec![a, b], 513).map_err(e2s)?;
    let ns = null_space_bases(&spec, &st, &grid).map_err(e2s)?;
    let (dp, da) = (ns.primal.len(), ns.adjoint.len());
    // Both kernels are spanned by the normalized constant 1/sqrt(b - a).
    let level = 1.0 / (b - a).sqrt();
    let mut shape: f64 = 0.0;
    for k in 0..grid.intervals() {
        for j in 0..grid.nodes(k).len() {
            if dp == 1 && da == 1 {
                shape = shape
                    .max((ns.phi(0, k, j).abs() - level).abs())
                    .max((ns.psi(&spec, 0, k, j).abs() - level).abs());
            }
        }
    }
    let residual = ns.form_residual.max(shape);
    let inconsistent =
        solvability_residual(&spec, &st, &ns, &const_scalar(1.0), &DVector::zeros(2))
            .map_err(e2s)?;
    let expected = (b - a).sqrt();
    // Data generated by phi = t^2: -phi'' = -2 and phi'(a), phi'(b) = 2a, 2b.
    let consistent = solvability_residual(
        &spec,
        &st,
        &ns,
        &scalar_fn(|_t: f64| -2.0),
        &DVector::from_vec(vec![2.0 * a, 2.0 * b]),
    )
    .map_err(e2s)?;
    let r1 = inconsistent.amax();
    let r2 = consistent.amax();
    let pass = dp == 1
        && da == 1
        && residual <= KERNEL_TOL
        && (r1 - expected).abs() <= KERNEL_TOL
        && r2 <= CONSISTENT_TOL;
    Ok((
        pass,
        format!(
            "dim N = {dp}, dim N+ = {da}, kernel residual {residual:.1e} (tol {KERNEL_TOL:.0e}); f = 1 gives {r1:.6} (expected {expected:.6}); consistent data {r2:.1e} (tol {CONSISTENT_TOL:.0e})"
        ),
    ))
}

// 9. Monte Carlo at the saturating pair and at random admissible pairs.
const SATURATION_SAMPLES: usize = 10_000;
const SATURATION_FRACTION: f64 = 0.99;

fn saturation_check() -> Outcome {
    let cfg = load("continuous.toml")?;
    let sc = Scenario::build(&cfg).map_err(e2s)?;
    let sol = sc.solve().map_err(e2s)?;
    let exp = Experiment::new(&sc, &sol).map_err(e2s)?;
    let sat = saturation(&exp, SATURATION_SAMPLES, cfg.seed).map_err(e2s)?;
    let guar = random_admissible(&exp, GUARANTEE_DRAWS, SIGNS_PER_DRAW, cfg.seed).map_err(e2s)?;
    let sigma_sq = exp.sigma_sq();
    let pass = sat.within_band() && sat.reaches(SATURATION_FRACTION) && guar.passed(sigma_sq);
    Ok((
        pass,
        format!(
            "mse {:.5} vs sigma^2 {sigma_sq:.5}, stderr {:.5} (3 stderr band, >= {SATURATION_FRACTION} sigma^2), seed {}; {GUARANTEE_DRAWS} draws, worst mse - sigma^2 - 3 stderr = {:.3e}",
            sat.mc.mse, sat.mc.stderr, cfg.seed, guar.worst_excess
        ),
    ))
}

// 10. Identical inputs give identical files.
fn determinism() -> Outcome {
    let dirs = tempfile::tempdir().map_err(e2s)?;
    let mut compared = 0;
    for (cmd, name) in [
        (Command::Solve, "continuous.toml"),
        (Command::Filter, "constrained.toml"),
        (Command::Point, "point.toml"),
        (Command::Eliminate, "elimination.toml"),
        (Command::Rhs, "rhs.toml"),
        (Command::Simulate, "continuous.toml"),
        (Command::Oracle, "neumann.toml"),
    ] {
        let cfg = load(name)?;
        let ov = Overrides {
            plot: true,
            ..Overrides::default()
        };
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = dirs.path().join(format!("{name}-{cmd:?}-{rep}"));
            let o = run_problem(cmd, cfg.clone(), Some(&out), &ov).map_err(e2s)?;
            runs.push((o, out));
        }
        if runs[0].0.text != runs[1].0.text {
            return Ok((false, format!("{cmd:?} on {name}: terminal output differs")));
        }
        for f in &runs[0].0.files {
            let rel = f.strip_prefix(&runs[0].1).map_err(e2s)?;
            let a = std::fs::read(f).map_err(e2s)?;
            let b = std::fs::read(runs[1].1.join(rel)).map_err(e2s)?;
            if a != b {
                return Ok((
                    false,
                    format!("{cmd:?} on {name}: {} differs", rel.display()),
                ));
            }
            compared += 1;
        }
    }
    Ok((
        true,
        format!("{compared} files byte-identical across repeated runs"),
    ))
}

fn main() -> ExitCode {
    type Check = (u32, &'static str, fn() -> Outcome, Duration);
    let checks: [Check; 10] = [
        (
            1,
            "boundary algebra identity",
            boundary_algebra,
            Duration::from_secs(1),
        ),
        (2, "Green identity", green_identity, Duration::from_secs(5)),
        (3, "duality", duality, Duration::from_secs(50)),
        (
            4,
            "representation equivalence",
            representation,
            Duration::from_secs(30 * INSTANCES.len() as u64),
        ),
        (5, "oracle equivalence", oracle, Duration::from_secs(600)),
        (6, "Riccati elimination", riccati, Duration::from_secs(10)),
        (
            7,
            "point monotonicity",
            point_monotonicity,
            Duration::from_secs(30),
        ),
        (
            8,
            "null spaces and solvability",
            neumann,
            Duration::from_secs(10),
        ),
        (
            9,
            "worst-case saturation",
            saturation_check,
            Duration::from_secs(60),
        ),
        (10, "determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (id, name, run, limit) in checks {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok((p, d)) => (p && elapsed <= limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
