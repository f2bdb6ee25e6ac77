//! Estimation when the boundary data are completely unknown.
//!
//! Only the forcing `f` is restricted by an ellipsoid. An estimate with finite
//! error must then use weights `u` whose adjoint response vanishes in the
//! directions that see the boundary data, which turns the optimality system
//! into one with `z(0) = 0` and `z(T) = 0` and no conditions on `p`. The
//! offset is zero.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::boundary::{BoundaryAlgebra, BvpSpec};
use crate::bvp::backward_propagator;
use crate::continuous::{
    coupled_problem, variance_from, window_grid, Ends, FilterSolution, FunctionalTarget,
    IntervalObservation, MinimaxSolution,
};
use crate::error::{Error, Result};
use crate::func::{MatFn, VecFn};
use crate::grid::Grid;
use crate::linalg::{invert, null_space, spd_inverse, vcat, vjoin};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Default node count per interval for this module.
pub const CONSTRAINED_NODES: usize = 65;

/// Endpoint values of the adjoint response as affine functions of `u`:
/// `z(0) = a1 + int Phi1 u` and `z(T) = a2 + int Phi2 u`.
#[derive(Debug, Clone)]
pub struct AffineControlMap<T: Real = f64> {
    pub grid: Grid<T>,
    pub window: Range<usize>,
    pub a1: DVector<T>,
    pub a2: DVector<T>,
    /// Kernel samples per window interval and node.
    pub phi1: Vec<Vec<DMatrix<T>>>,
    pub phi2: Vec<Vec<DMatrix<T>>>,
}

impl<T: Real> AffineControlMap<T> {
    /// `(z(0), z(T))` for the weight `u`.
    pub fn evaluate(&self, u: &VecFn<T>) -> (DVector<T>, DVector<T>) {
        let mut z0 = self.a1.clone();
        let mut z1 = self.a2.clone();
        for (w, k) in self.window.clone().enumerate() {
            let nodes = self.grid.nodes(k);
            for (j, wt) in self.grid.weights(k).into_iter().enumerate() {
                let ut = u(nodes[j]);
                z0 += &self.phi1[w][j] * &ut * wt;
                z1 += &self.phi2[w][j] * &ut * wt;
            }
        }
        (z0, z1)
    }

    /// Gramian of the constraint operator and the constraint offset.
    pub fn constraint_system(&self, alg: &BoundaryAlgebra<T>) -> (DMatrix<T>, DVector<T>) {
        let n = self.a1.len();
        let mut gram = DMatrix::zeros(n, n);
        for (w, k) in self.window.clone().enumerate() {
            for (j, wt) in self.grid.weights(k).into_iter().enumerate() {
                let kj = vcat(
                    &(&alg.b0_bar * &self.phi1[w][j]),
                    &(&alg.b1_bar * &self.phi2[w][j]),
                );
                gram += &kj * kj.transpose() * wt;
            }
        }
        let c = vjoin(&(&alg.b0_bar * &self.a1), &(&alg.b1_bar * &self.a2));
        (gram, -c)
    }
}

pub fn build_affine_maps<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    obs: &IntervalObservation<T>,
    target: &FunctionalTarget<T>,
    nodes: usize,
) -> Result<AffineControlMap<T>> {
    let n = spec.n;
    let m = spec.m;
    let (grid, window, si) = window_grid(spec.horizon, obs, target.s, nodes)?;
    let psi = backward_propagator(&spec.adjoint_drift(), &grid);
    let psi_t0 = psi[0][0].clone();
    let psi_ts = psi[si][0].clone();
    let nmat = vcat(&alg.b0_hat, &(&alg.b1_hat * &psi_t0));
    let ninv = invert(&nmat)
        .map_err(|_| Error::SingularSystem("adjoint problem is not uniquely solvable".into()))?;
    let lift = |v: DVector<T>| -> DVector<T> { &ninv * vjoin(&DVector::zeros(n - m), &v) };
    let a1 = lift(&alg.b1_hat * &psi_ts * &target.a);
    let a2 = &psi_t0 * &a1 - &psi_ts * &target.a;
    let mut phi1 = Vec::new();
    let mut phi2 = Vec::new();
    for k in window.clone() {
        let mut p1 = Vec::new();
        let mut p2 = Vec::new();
        for (j, &t) in grid.nodes(k).iter().enumerate() {
            let ht = (obs.h)(t).transpose();
            let prop = &psi[k][j] * &ht;
            let mut k1 = DMatrix::zeros(n, ht.ncols());
            for c in 0..ht.ncols() {
                let col = lift(-(&alg.b1_hat * prop.column(c)));
                k1.column_mut(c).copy_from(&col);
            }
            p2.push(&psi_t0 * &k1 + &prop);
            p1.push(k1);
        }
        phi1.push(p1);
        phi2.push(p2);
    }
    Ok(AffineControlMap {
        grid,
        window,
        a1,
        a2,
        phi1,
        phi2,
    })
}

/// Whether some weight satisfies both boundary constraints.
///
/// The offset must lie in the range of the constraint Gramian; its component
/// in the numerical null space is compared with its norm.
pub fn check_feasible<T: Real>(maps: &AffineControlMap<T>, alg: &BoundaryAlgebra<T>) -> bool {
    let (gram, c) = maps.constraint_system(alg);
    let cn = c.norm();
    if cn == T::zero() {
        return true;
    }
    let ns = null_space(&gram, T::rank_tol());
    if ns.ncols() == 0 {
        return true;
    }
    (ns.transpose() * &c).norm() <= T::lit(1e-6) * cn
}

/// Solution of the constrained problem with its multipliers.
#[derive(Debug, Clone)]
pub struct ConstrainedSolution<T: Real = f64> {
    pub base: MinimaxSolution<T>,
    pub mu1: DVector<T>,
    pub mu2: DVector<T>,
    /// `(a, p(s))`, which agrees with `sigma^2` at the optimum.
    pub dual_variance: T,
    /// Largest violation of the two boundary constraints.
    pub constraint_residual: T,
}

/// Quadratic cost `int (Q2^{-1} z, z) + int (Q^{-1} u, u)`.
pub fn constrained_cost<T: Real>(
    sol: &MinimaxSolution<T>,
    q2_inv: &MatFn<T>,
    obs: &IntervalObservation<T>,
) -> T {
    let n = sol.n;
    let bulk = sol.state.integrate(|t, x| {
        let z = x.rows(0, n);
        z.dot(&(q2_inv(t) * z))
    });
    let noise = sol.grid().integrate_over(sol.window.clone(), |k, j, t| {
        let u = sol.u_hat.node(k, j);
        u.dot(&(spd_inverse(&(obs.q)(t)).expect("Q(t) positive definite") * u))
    });
    bulk + noise
}

fn as_kkt(e: Error) -> Error {
    match e {
        Error::SingularSystem(s) => Error::SingularKkt(s),
        other => other,
    }
}

pub fn solve_constrained_estimator<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    q2_inv: &MatFn<T>,
    obs: &IntervalObservation<T>,
    target: &FunctionalTarget<T>,
    nodes: usize,
) -> Result<ConstrainedSolution<T>> {
    let n = spec.n;
    if target.a.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: target.a.len(),
        });
    }
    let maps = build_affine_maps(spec, alg, obs, target, nodes)?;
    if !check_feasible(&maps, alg) {
        return Err(Error::InfeasibleU);
    }
    let (grid, window, si) = window_grid(spec.horizon, obs, target.s, nodes)?;
    let mut prob = coupled_problem(
        spec,
        q2_inv,
        Some(obs),
        window.clone(),
        grid.clone(),
        Ends::Clamped,
    );
    prob.set_jump(si, vjoin(&(-&target.a), &DVector::zeros(n)));
    let sol = prob.solve().map_err(as_kkt)?;
    let mut warnings = sol.warnings;
    let state = sol.trajectory;
    let u_hat = PiecewiseTrajectory::sample(&grid, |k, t| {
        if window.contains(&k) {
            let j = grid
                .nodes(k)
                .iter()
                .position(|&x| x == t)
                .expect("grid node");
            (obs.q)(t) * (obs.h)(t) * state.node(k, j).rows(n, n)
        } else {
            DVector::zeros(obs.l())
        }
    });
    let (dual_variance, _) = variance_from(
        &target.a,
        &state.left_limit(si).rows(n, n).into_owned(),
        &state.right_limit(si).rows(n, n).into_owned(),
        &mut warnings,
    )?;
    let p0 = state.start().rows(n, n).into_owned();
    let p1 = state.end().rows(n, n).into_owned();
    let mu1 = &spec.b0 * p0 * T::lit(2.0);
    let mu2 = -(&spec.b1 * p1) * T::lit(2.0);
    let z0 = state.start().rows(0, n).into_owned();
    let z1 = state.end().rows(0, n).into_owned();
    let constraint_residual = (&alg.b0_bar * z0).amax().max((&alg.b1_bar * z1).amax());
    let mut base = MinimaxSolution {
        state,
        u_hat,
        window,
        target_index: si,
        c_hat: T::zero(),
        sigma_sq: T::zero(),
        sigma: T::zero(),
        n,
        warnings,
    };
    let j = constrained_cost(&base, q2_inv, obs);
    if j < -T::lit(1e-10) * T::one().max(dual_variance) {
        return Err(Error::NegativeVariance(j.as_f64()));
    }
    base.sigma_sq = j.max(T::zero());
    base.sigma = base.sigma_sq.sqrt();
    Ok(ConstrainedSolution {
        base,
        mu1,
        mu2,
        dual_variance,
        constraint_residual,
    })
}

pub fn solve_constrained_filter<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    q2_inv: &MatFn<T>,
    obs: &IntervalObservation<T>,
    y: &VecFn<T>,
    s: T,
    nodes: usize,
) -> Result<FilterSolution<T>> {
    let n = spec.n;
    for i in 0..n {
        let target = FunctionalTarget {
            a: DVector::from_fn(n, |r, _| if r == i { T::one() } else { T::zero() }),
            s,
        };
        let maps = build_affine_maps(spec, alg, obs, &target, nodes)?;
        if !check_feasible(&maps, alg) {
            return Err(Error::InfeasibleU);
        }
    }
    let (grid, window, si) = window_grid(spec.horizon, obs, s, nodes)?;
    let mut prob = coupled_problem(spec, q2_inv, Some(obs), window.clone(), grid, Ends::Clamped);
    let (h, q, y) = (obs.h.clone(), obs.q.clone(), y.clone());
    let drive: VecFn<T> = Arc::new(move |t| {
        let ht = h(t);
        vjoin(&(-(ht.transpose() * q(t) * y(t))), &DVector::zeros(n))
    });
    for k in window {
        prob.set_forcing(k, drive.clone());
    }
    let sol = prob.solve().map_err(as_kkt)?;
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
    use crate::continuous::solve_control_response;
    use crate::func::{const_mat, vec_fn};

    fn setup() -> (BvpSpec, BoundaryAlgebra, IntervalObservation) {
        let spec = BvpSpec::homogeneous(
            1.0,
            const_mat(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
        let obs = IntervalObservation::new(
            const_mat(DMatrix::identity(2, 2)),
            const_mat(DMatrix::identity(2, 2)),
            0.2,
            0.8,
        )
        .unwrap();
        (spec, alg, obs)
    }

    #[test]
    fn affine_map_matches_direct_response() {
        let (spec, alg, obs) = setup();
        let target = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, -0.5]),
            s: 0.5,
        };
        let maps = build_affine_maps(&spec, &alg, &obs, &target, 33).unwrap();
        let u = vec_fn(|t: f64| DVector::from_vec(vec![t.cos(), 1.0 - t * t]));
        let (z0, z1) = maps.evaluate(&u);
        let z = solve_control_response(&spec, &alg, &obs, &target, &u, 33).unwrap();
        assert!((z.start() - z0).amax() < 1e-8);
        assert!((z.end() - z1).amax() < 1e-8);
    }

    #[test]
    fn zero_kernels_with_offset_are_infeasible() {
        let (spec, alg, obs) = setup();
        let target = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, 0.0]),
            s: 0.5,
        };
        let mut maps = build_affine_maps(&spec, &alg, &obs, &target, 17).unwrap();
        assert!(check_feasible(&maps, &alg));
        for p in maps.phi1.iter_mut().chain(maps.phi2.iter_mut()) {
            for k in p.iter_mut() {
                k.fill(0.0);
            }
        }
        assert!(!check_feasible(&maps, &alg));
    }

    #[test]
    fn constraints_hold_at_the_optimum() {
        let (spec, alg, obs) = setup();
        let q2 = const_mat(DMatrix::identity(2, 2));
        let target = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, 0.3]),
            s: 0.5,
        };
        let sol = solve_constrained_estimator(&spec, &alg, &q2, &obs, &target, 65).unwrap();
        assert!(sol.constraint_residual < 1e-8);
        assert!((sol.dual_variance - sol.base.sigma_sq).abs() < 1e-6 * sol.base.sigma_sq.max(1.0));
        assert_eq!(sol.base.c_hat, 0.0);
    }
}
