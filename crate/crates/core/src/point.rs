//! Minimax estimation from finitely many point observations
//! `y_i = phi(t_i) + xi_i`.
//!
//! The adjoint state jumps at every observation time by the optimal weight
//! `u_i = Q_i p(t_i)`, so the estimator is again one coupled two-point
//! problem, now with state-dependent interface maps.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::boundary::{BoundaryAlgebra, BvpSpec};
use crate::continuous::{coupled_problem, variance_from, EllipsoidG, Ends, FilterSolution};
use crate::error::{Error, Result};
use crate::func::VecFn;
use crate::grid::{merge_breakpoints, Grid};
use crate::linalg::{block2, spd_inverse, vjoin};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Observation times with their noise weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointObservationSet<T: Real = f64> {
    pub times: Vec<T>,
    pub weights: Vec<DMatrix<T>>,
}

impl<T: Real> PointObservationSet<T> {
    pub fn new(times: Vec<T>, weights: Vec<DMatrix<T>>) -> Result<Self> {
        if times.len() != weights.len() {
            return Err(Error::ArityMismatch {
                expected: times.len(),
                got: weights.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "observation times must be strictly increasing".into(),
            ));
        }
        for w in &weights {
            spd_inverse(w)?;
        }
        Ok(Self { times, weights })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PointMinimaxSolution<T: Real = f64> {
    /// Stacked `(z, p)`.
    pub state: PiecewiseTrajectory<T>,
    pub u_hat: Vec<DVector<T>>,
    pub c_hat: T,
    pub sigma_sq: T,
    pub sigma: T,
    pub n: usize,
    /// Breakpoint index of every observation time.
    pub point_index: Vec<usize>,
    pub target_index: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> PointMinimaxSolution<T> {
    pub fn z(&self) -> PiecewiseTrajectory<T> {
        self.state.components(0, self.n)
    }

    pub fn p(&self) -> PiecewiseTrajectory<T> {
        self.state.components(self.n, self.n)
    }
}

fn point_grid<T: Real>(
    horizon: T,
    obs: &PointObservationSet<T>,
    s: T,
    nodes: usize,
) -> Result<(Grid<T>, Vec<usize>, usize)> {
    let tol = horizon * T::lit(1e-12);
    if obs.times.iter().any(|&t| (t - s).abs() <= tol) {
        return Err(Error::PointOnTarget);
    }
    if obs.times.iter().any(|&t| t <= tol || t >= horizon - tol) || s <= T::zero() || s >= horizon {
        return Err(Error::InvalidInput(
            "observation and estimation points must lie in (0, T)".into(),
        ));
    }
    let mut pts = obs.times.clone();
    pts.push(s);
    let grid = Grid::new(merge_breakpoints(T::zero(), horizon, &pts)?, nodes)?;
    let idx = obs
        .times
        .iter()
        .map(|&t| grid.require_breakpoint(t))
        .collect::<Result<Vec<_>>>()?;
    let si = grid.require_breakpoint(s)?;
    Ok((grid, idx, si))
}

fn jump_map<T: Real>(n: usize, w: &DMatrix<T>) -> DMatrix<T> {
    block2(
        &DMatrix::identity(n, n),
        w,
        &DMatrix::zeros(n, n),
        &DMatrix::identity(n, n),
    )
}

pub fn solve_point_estimator<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &PointObservationSet<T>,
    a: &DVector<T>,
    s: T,
    nodes: usize,
) -> Result<PointMinimaxSolution<T>> {
    let n = spec.n;
    if a.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if obs.weights.iter().any(|w| w.shape() != (n, n)) {
        return Err(Error::InvalidInput("point weights must be n x n".into()));
    }
    let (grid, idx, si) = point_grid(spec.horizon, obs, s, nodes)?;
    let ends = Ends::Weighted {
        alg,
        q0_inv: &g.q0_inv,
        q1_inv: &g.q1_inv,
        rhs0: DVector::zeros(spec.m),
        rhs1: DVector::zeros(n - spec.m),
    };
    let mut prob = coupled_problem(spec, &g.q2_inv, None, 0..0, grid, ends);
    for (&b, w) in idx.iter().zip(&obs.weights) {
        prob.set_interface(b, jump_map(n, w), DVector::zeros(2 * n));
    }
    prob.set_jump(si, vjoin(&(-a), &DVector::zeros(n)));
    let sol = prob.solve()?;
    let mut warnings = sol.warnings;
    let state = sol.trajectory;
    let mut u_hat = Vec::with_capacity(obs.len());
    for (&b, w) in idx.iter().zip(&obs.weights) {
        let left = state.left_limit(b).rows(n, n).into_owned();
        let right = state.right_limit(b).rows(n, n).into_owned();
        if (&left - &right).amax() > T::lit(1e-9) * T::one().max(left.amax()) {
            warnings.push(format!("p is discontinuous at observation breakpoint {b}"));
        }
        u_hat.push(w * left);
    }
    let (sigma_sq, sigma) = variance_from(
        a,
        &state.left_limit(si).rows(n, n).into_owned(),
        &state.right_limit(si).rows(n, n).into_owned(),
        &mut warnings,
    )?;
    let z0 = state.start().rows(0, n).into_owned();
    let z1 = state.end().rows(0, n).into_owned();
    let bulk = state.integrate(|t, x| x.rows(0, n).dot(&(g.f_nom)(t)));
    let c_hat = (&alg.b0_bar * z0).dot(&g.f0_nom) - (&alg.b1_bar * z1).dot(&g.f1_nom) + bulk;
    Ok(PointMinimaxSolution {
        state,
        u_hat,
        c_hat,
        sigma_sq,
        sigma,
        n,
        point_index: idx,
        target_index: si,
        warnings,
    })
}

/// `sum (u_i, y_i) + c_hat`.
pub fn point_estimate<T: Real>(sol: &PointMinimaxSolution<T>, ys: &[DVector<T>]) -> Result<T> {
    if ys.len() != sol.u_hat.len() {
        return Err(Error::ArityMismatch {
            expected: sol.u_hat.len(),
            got: ys.len(),
        });
    }
    let mut acc = sol.c_hat;
    for (u, y) in sol.u_hat.iter().zip(ys) {
        if y.len() != u.len() {
            return Err(Error::ArityMismatch {
                expected: u.len(),
                got: y.len(),
            });
        }
        acc += u.dot(y);
    }
    Ok(acc)
}

/// Cost of the optimal weights; equals `sigma^2` at the optimum.
pub fn evaluate_point_cost<T: Real>(
    sol: &PointMinimaxSolution<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &PointObservationSet<T>,
) -> Result<T> {
    let n = sol.n;
    let b0z = &alg.b0_bar * sol.state.start().rows(0, n);
    let b1z = &alg.b1_bar * sol.state.end().rows(0, n);
    let bulk = sol.state.integrate(|t, x| {
        let z = x.rows(0, n);
        z.dot(&((g.q2_inv)(t) * z))
    });
    let mut noise = T::zero();
    for (u, w) in sol.u_hat.iter().zip(&obs.weights) {
        noise += u.dot(&(spd_inverse(w)? * u));
    }
    Ok(b0z.dot(&(&g.q0_inv * &b0z)) + b1z.dot(&(&g.q1_inv * &b1z)) + bulk + noise)
}

pub fn solve_point_filter<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &PointObservationSet<T>,
    ys: &[DVector<T>],
    s: T,
    nodes: usize,
) -> Result<FilterSolution<T>> {
    let n = spec.n;
    if ys.len() != obs.len() {
        return Err(Error::ArityMismatch {
            expected: obs.len(),
            got: ys.len(),
        });
    }
    let (grid, idx, si) = point_grid(spec.horizon, obs, s, nodes)?;
    let ends = Ends::Weighted {
        alg,
        q0_inv: &g.q0_inv,
        q1_inv: &g.q1_inv,
        rhs0: g.f0_nom.clone(),
        rhs1: g.f1_nom.clone(),
    };
    let mut prob = coupled_problem(spec, &g.q2_inv, None, 0..0, grid, ends);
    let f_nom = g.f_nom.clone();
    let drive: VecFn<T> = Arc::new(move |t| vjoin(&DVector::zeros(n), &f_nom(t)));
    prob.set_forcing_all(drive);
    for ((&b, w), y) in idx.iter().zip(&obs.weights).zip(ys) {
        if y.len() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: y.len(),
            });
        }
        prob.set_interface(b, jump_map(n, w), vjoin(&(-(w * y)), &DVector::zeros(n)));
    }
    let sol = prob.solve()?;
    let phi_at_s = sol.trajectory.left_limit(si).rows(n, n).into_owned();
    Ok(FilterSolution {
        state: sol.trajectory,
        phi_at_s,
        n,
        warnings: sol.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::build_boundary_algebra;
    use crate::func::const_mat;

    fn setup() -> (BvpSpec, BoundaryAlgebra, EllipsoidG, PointObservationSet) {
        let spec = BvpSpec::homogeneous(
            1.0,
            const_mat(DMatrix::zeros(2, 2)),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
        let obs =
            PointObservationSet::new(vec![0.3, 0.7], vec![DMatrix::identity(2, 2); 2]).unwrap();
        (spec, alg, EllipsoidG::unit(2, 1), obs)
    }

    #[test]
    fn jumps_equal_the_weights() {
        let (spec, alg, g, obs) = setup();
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_point_estimator(&spec, &alg, &g, &obs, &a, 0.5, 33).unwrap();
        for (i, &b) in sol.point_index.iter().enumerate() {
            let jump = sol.state.right_limit(b).rows(0, 2) - sol.state.left_limit(b).rows(0, 2);
            assert!((jump - &sol.u_hat[i]).amax() < 1e-9);
        }
        let cost = evaluate_point_cost(&sol, &alg, &g, &obs).unwrap();
        assert!((cost - sol.sigma_sq).abs() < 1e-8 * sol.sigma_sq.max(1.0));
    }

    #[test]
    fn point_on_target_is_rejected() {
        let (spec, alg, g, obs) = setup();
        let a = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(
            solve_point_estimator(&spec, &alg, &g, &obs, &a, 0.3, 9).unwrap_err(),
            Error::PointOnTarget
        );
    }

    #[test]
    fn arity_is_checked() {
        let (spec, alg, g, obs) = setup();
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_point_estimator(&spec, &alg, &g, &obs, &a, 0.5, 9).unwrap();
        assert!(matches!(
            point_estimate(&sol, &[DVector::zeros(2)]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn without_points_only_the_prior_remains() {
        let (spec, alg, g, _) = setup();
        let none = PointObservationSet::new(vec![], vec![]).unwrap();
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_point_estimator(&spec, &alg, &g, &none, &a, 0.5, 33).unwrap();
        assert!(sol.u_hat.is_empty());
        // phi_1' = f_1, phi_1(0) = f0: variance = Q0^{-1} + int_0^s Q2^{-1} = 1.5.
        assert!((sol.sigma_sq - 1.5).abs() < 1e-10);
    }
}
