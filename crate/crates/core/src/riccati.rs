//! Elimination for the second-order problem
//! `phi'' = A(t) phi + B(t) f` on `(0, 1)`, `phi'(0) = 0`, `phi(1) = 0`.
//!
//! Writing `phi' = P phi + psi` with `P' + P^2 = A`, `P(0) = 0` and
//! `psi' + P psi = B f`, `psi(0) = 0` turns the problem into a pair of Cauchy
//! problems. In the variables `x = (phi, psi)` the observation model becomes
//! `y = H x + xi` with `x' = A1 x + B1 f`, on which the estimators of this
//! module act.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bvp::{backward_propagator, fundamental_matrix, rk4_step, MultipointProblem};
use crate::error::{Error, Result};
use crate::func::{MatFn, ScalarFn, VecFn};
use crate::grid::Grid;
use crate::linalg::{block2, hcat, null_space, spd_inverse, vcat, vjoin};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Bound on `|P|` beyond which the sweep is declared divergent.
pub const BLOW_UP_BOUND: f64 = 1e8;

/// Riccati solution sampled on a uniform grid of `[0, 1]`.
#[derive(Clone)]
pub struct SweepResult<T: Real = f64> {
    pub times: Vec<T>,
    pub p: Vec<DMatrix<T>>,
    a: MatFn<T>,
}

impl<T: Real> std::fmt::Debug for SweepResult<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SweepResult")
            .field("nodes", &self.times.len())
            .finish()
    }
}

fn riccati_rhs<T: Real>(a: &MatFn<T>) -> impl Fn(T, &DMatrix<T>) -> DMatrix<T> + '_ {
    move |t, p| a(t) - p * p
}

/// Integrates `P' = A - P^2`, `P(0) = 0` with RK4 on `nodes` uniform points.
pub fn riccati_sweep<T: Real>(a: MatFn<T>, nodes: usize) -> Result<SweepResult<T>> {
    if nodes < 2 {
        return Err(Error::InvalidInput(
            "the sweep needs at least two nodes".into(),
        ));
    }
    let n = a(T::zero()).nrows();
    let h = T::one() / T::from_count(nodes - 1);
    let times: Vec<T> = (0..nodes)
        .map(|i| {
            if i == nodes - 1 {
                T::one()
            } else {
                h * T::from_count(i)
            }
        })
        .collect();
    let mut p = DMatrix::zeros(n, n);
    let mut out = Vec::with_capacity(nodes);
    out.push(p.clone());
    let f = riccati_rhs(&a);
    for w in times.windows(2) {
        p = rk4_step(&f, w[0], w[1] - w[0], &p);
        let nrm = p.amax();
        if !nrm.is_finite() || nrm.as_f64() > BLOW_UP_BOUND {
            return Err(Error::BlowUp(w[1].as_f64()));
        }
        out.push(p.clone());
    }
    drop(f);
    Ok(SweepResult { times, p: out, a })
}

impl<T: Real> SweepResult<T> {
    /// `P(t)`, advanced by one RK4 step from the nearest node below `t`.
    pub fn p_at(&self, t: T) -> DMatrix<T> {
        let n = self.times.len();
        let h = self.times[1] - self.times[0];
        let i = (t / h).floor().to_usize().unwrap_or(0).min(n - 1);
        let dt = t - self.times[i];
        if dt.abs() <= T::default_epsilon() * T::lit(16.0) {
            return self.p[i].clone();
        }
        rk4_step(&riccati_rhs(&self.a), self.times[i], dt, &self.p[i])
    }

    pub fn p_fn(self: &Arc<Self>) -> MatFn<T> {
        let me = self.clone();
        Arc::new(move |t| me.p_at(t))
    }

    /// Transition matrix of `psi' = -P psi` from `t` to `s`.
    pub fn psi_propagator(self: &Arc<Self>, s: T, t: T, steps: usize) -> Result<DMatrix<T>> {
        let p = self.p_fn();
        let drift: MatFn<T> = Arc::new(move |x| -p(x));
        fundamental_matrix(&drift, t, s, steps)
    }

    /// Largest `|P' + P^2 - A|` at interior nodes, with `P'` from
    /// fourth-order central differences.
    pub fn residual(&self) -> T {
        let n = self.times.len();
        let h = self.times[1] - self.times[0];
        let mut worst = T::zero();
        for i in 2..n.saturating_sub(2) {
            let d = (&self.p[i - 2] - &self.p[i - 1] * T::lit(8.0) + &self.p[i + 1] * T::lit(8.0)
                - &self.p[i + 2])
                / (h * T::lit(12.0));
            let r = d + &self.p[i] * &self.p[i] - (self.a)(self.times[i]);
            worst = worst.max(r.amax());
        }
        worst
    }
}

/// Observation blocks `y1 = C11 phi + C12 phi'`, `y2 = C21 phi + C22 phi'`.
#[derive(Clone)]
pub struct ElimObservation<T: Real = f64> {
    pub c11: MatFn<T>,
    pub c12: MatFn<T>,
    pub c21: MatFn<T>,
    pub c22: MatFn<T>,
}

/// First-order model in `x = (phi, psi)`.
#[derive(Clone)]
pub struct EliminatedSystem<T: Real = f64> {
    pub n: usize,
    pub sweep: Arc<SweepResult<T>>,
    pub a1: MatFn<T>,
    pub b1: MatFn<T>,
    pub h: MatFn<T>,
    /// `B1 Q^{-1} B1^T`.
    pub q1: MatFn<T>,
}

pub fn eliminate<T: Real>(
    sweep: Arc<SweepResult<T>>,
    b: MatFn<T>,
    q: &DMatrix<T>,
    c: &ElimObservation<T>,
) -> Result<EliminatedSystem<T>> {
    let n = sweep.p[0].nrows();
    if b(T::zero()).nrows() != n || b(T::zero()).ncols() != q.nrows() {
        return Err(Error::InvalidInput("B must be n x r with Q r x r".into()));
    }
    let q_inv = spd_inverse(q)?;
    let p = sweep.p_fn();
    let a1: MatFn<T> = {
        let p = p.clone();
        Arc::new(move |t| {
            let pt = p(t);
            block2(
                &pt,
                &DMatrix::identity(n, n),
                &DMatrix::zeros(n, n),
                &(-&pt),
            )
        })
    };
    let b1: MatFn<T> = {
        let b = b.clone();
        Arc::new(move |t| {
            let bt = b(t);
            vcat(&DMatrix::zeros(n, bt.ncols()), &bt)
        })
    };
    let q1: MatFn<T> = {
        let b1 = b1.clone();
        Arc::new(move |t| {
            let bt = b1(t);
            &bt * &q_inv * bt.transpose()
        })
    };
    let h: MatFn<T> = {
        let c = c.clone();
        Arc::new(move |t| {
            let pt = p(t);
            let (c12, c22) = ((c.c12)(t), (c.c22)(t));
            let top = hcat(&((c.c11)(t) + &c12 * &pt), &c12);
            let bottom = hcat(&((c.c21)(t) + &c22 * &pt), &c22);
            vcat(&top, &bottom)
        })
    };
    Ok(EliminatedSystem {
        n,
        sweep,
        a1,
        b1,
        h,
        q1,
    })
}

/// Coefficient vector of `(a1, phi(s)) + (a2, phi'(s))` in terms of `x(s)`.
pub fn elimination_target<T: Real>(
    sweep: &SweepResult<T>,
    s: T,
    a1: &DVector<T>,
    a2: &DVector<T>,
) -> DVector<T> {
    let p = sweep.p_at(s);
    vjoin(&(a1 + p.transpose() * a2), a2)
}

/// Solves the eliminated system for a given `f` and returns `(phi, phi')`.
pub fn reconstruct<T: Real>(
    elim: &EliminatedSystem<T>,
    f: &VecFn<T>,
    nodes: usize,
) -> Result<(PiecewiseTrajectory<T>, PiecewiseTrajectory<T>)> {
    let n = elim.n;
    let grid = Grid::new(vec![T::zero(), T::one()], nodes)?;
    let mut prob = MultipointProblem::new(grid, 2 * n, 0, elim.a1.clone());
    let (b1, f) = (elim.b1.clone(), f.clone());
    prob.set_forcing_all(Arc::new(move |t| b1(t) * f(t)));
    prob.left_rows(
        hcat(&DMatrix::zeros(n, n), &DMatrix::identity(n, n)),
        DVector::zeros(n),
    );
    prob.right_rows(
        hcat(&DMatrix::identity(n, n), &DMatrix::zeros(n, n)),
        DVector::zeros(n),
    );
    let x = prob.solve()?.trajectory;
    let phi = x.components(0, n);
    let sweep = elim.sweep.clone();
    let dphi = x.map(|t, v| sweep.p_at(t) * v.rows(0, n) + v.rows(n, n));
    Ok((phi, dphi))
}

/// How the noise level enters the optimal weights of the terminal-constrained
/// estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightVariant {
    /// `u = q1^2 H p`, the stationary point of the quadratic cost.
    Squared,
    /// `u = q1 H p`, the literal form of the optimality statement.
    Linear,
}

impl WeightVariant {
    fn apply<T: Real>(self, q1: T) -> T {
        match self {
            WeightVariant::Squared => q1 * q1,
            WeightVariant::Linear => q1,
        }
    }
}

/// Estimator state on `(0, 1)` split at `s`.
#[derive(Debug, Clone)]
pub struct ElimSolution<T: Real = f64> {
    /// Stacked `(z, p)`, each of dimension `2n`.
    pub state: PiecewiseTrajectory<T>,
    pub u_hat: PiecewiseTrajectory<T>,
    pub target_index: usize,
    /// Variance taken from the cost functional.
    pub sigma_sq: T,
    pub sigma: T,
    /// `(b, p(s))`.
    pub dual_variance: T,
    pub dim: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> ElimSolution<T> {
    /// `int (u_hat, y)` over `(0, 1)`; the offset is zero.
    pub fn estimate(&self, y: &VecFn<T>) -> T {
        self.state
            .grid()
            .integrate(|k, j, t| self.u_hat.node(k, j).dot(&y(t)))
    }
}

fn split_grid<T: Real>(s: T, nodes: usize) -> Result<(Grid<T>, usize)> {
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::InvalidInput(
            "the estimation point must lie in (0, 1)".into(),
        ));
    }
    let g = Grid::new(vec![T::zero(), s, T::one()], nodes)?;
    Ok((g, 1))
}

fn estimator_drift<T: Real>(elim: &EliminatedSystem<T>, w: ScalarFn<T>) -> MatFn<T> {
    let (a1, h, q1) = (elim.a1.clone(), elim.h.clone(), elim.q1.clone());
    Arc::new(move |t| {
        let at = a1(t);
        let ht = h(t);
        block2(
            &(-at.transpose()),
            &(ht.transpose() * &ht * w(t)),
            &q1(t),
            &at,
        )
    })
}

fn block_rows<T: Real>(n: usize, picks: &[(usize, usize)]) -> DMatrix<T> {
    // Each pick selects block `b` (of size n) of the stacked 4n state.
    let mut r = DMatrix::zeros(n * picks.len(), 4 * n);
    for (i, &(b, _)) in picks.iter().enumerate() {
        r.view_mut((i * n, b * n), (n, n)).fill_with_identity();
    }
    r
}

fn weighted_cost<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    state: &PiecewiseTrajectory<T>,
    u: &PiecewiseTrajectory<T>,
) -> T {
    let d = 2 * elim.n;
    let g = state.grid();
    g.integrate(|k, j, t| {
        let z = state.node(k, j).rows(0, d);
        let ut = u.node(k, j);
        let qt = q1(t);
        z.dot(&((elim.q1)(t) * z)) + ut.dot(ut) / (qt * qt)
    })
}

fn finish<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    w: &ScalarFn<T>,
    b: &DVector<T>,
    state: PiecewiseTrajectory<T>,
    si: usize,
    mut warnings: Vec<String>,
) -> Result<ElimSolution<T>> {
    let d = 2 * elim.n;
    let grid = state.grid().clone();
    let u_hat = PiecewiseTrajectory::sample(&grid, |k, t| {
        let j = grid
            .nodes(k)
            .iter()
            .position(|&x| x == t)
            .expect("grid node");
        (elim.h)(t) * state.node(k, j).rows(d, d) * w(t)
    });
    let pl = state.left_limit(si).rows(d, d).into_owned();
    let pr = state.right_limit(si).rows(d, d).into_owned();
    let (dual_variance, _) = crate::continuous::variance_from(b, &pl, &pr, &mut warnings)?;
    let cost = weighted_cost(elim, q1, &state, &u_hat);
    if cost < -T::lit(1e-10) {
        return Err(Error::NegativeVariance(cost.as_f64()));
    }
    let sigma_sq = cost.max(T::zero());
    Ok(ElimSolution {
        state,
        u_hat,
        target_index: si,
        sigma_sq,
        sigma: sigma_sq.sqrt(),
        dual_variance,
        dim: d,
        warnings,
    })
}

fn check_noise<T: Real>(q1: &ScalarFn<T>) -> Result<()> {
    for i in 0..=8 {
        let t = T::from_count(i) / T::lit(8.0);
        if q1(t) == T::zero() {
            return Err(Error::InvalidInput(
                "the noise level q1 must not vanish".into(),
            ));
        }
    }
    Ok(())
}

/// Minimax estimator of `(b, x(s))` from observations on all of `(0, 1)`.
pub fn solve_elimination_estimator<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    b: &DVector<T>,
    s: T,
    nodes: usize,
) -> Result<ElimSolution<T>> {
    check_noise(q1)?;
    let n = elim.n;
    if b.len() != 2 * n {
        return Err(Error::ArityMismatch {
            expected: 2 * n,
            got: b.len(),
        });
    }
    let (grid, si) = split_grid(s, nodes)?;
    let w: ScalarFn<T> = {
        let q1 = q1.clone();
        Arc::new(move |t| q1(t) * q1(t))
    };
    let mut prob = MultipointProblem::new(grid, 4 * n, 0, estimator_drift(elim, w.clone()));
    // Blocks of the 4n state: 0 = z_phi, 1 = z_psi, 2 = p_phi, 3 = p_psi.
    prob.left_rows(block_rows(n, &[(0, 0), (3, 0)]), DVector::zeros(2 * n));
    prob.right_rows(block_rows(n, &[(1, 0), (2, 0)]), DVector::zeros(2 * n));
    prob.set_jump(si, vjoin(&(-b), &DVector::zeros(2 * n)));
    let sol = prob.solve()?;
    finish(elim, q1, &w, b, sol.trajectory, si, sol.warnings)
}

/// Filtered state `(x_hat, p_hat)`; the estimate is `(b, x_hat(s))`.
pub fn solve_elimination_filter<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    y: &VecFn<T>,
    s: T,
    nodes: usize,
) -> Result<(PiecewiseTrajectory<T>, DVector<T>)> {
    check_noise(q1)?;
    let n = elim.n;
    let w: ScalarFn<T> = {
        let q1 = q1.clone();
        Arc::new(move |t| q1(t) * q1(t))
    };
    let (grid, si) = split_grid(s, nodes)?;
    let mut prob = MultipointProblem::new(grid, 4 * n, 0, filter_drift(elim, w.clone()));
    prob.set_forcing_all(filter_forcing(elim, w, y));
    // Blocks: 0 = x_phi, 1 = x_psi, 2 = p_phi, 3 = p_psi.
    prob.left_rows(block_rows(n, &[(1, 0), (2, 0)]), DVector::zeros(2 * n));
    prob.right_rows(block_rows(n, &[(0, 0), (3, 0)]), DVector::zeros(2 * n));
    let sol = prob.solve()?;
    let x_s = sol.trajectory.left_limit(si).rows(0, 2 * n).into_owned();
    Ok((sol.trajectory, x_s))
}

fn filter_drift<T: Real>(elim: &EliminatedSystem<T>, w: ScalarFn<T>) -> MatFn<T> {
    let (a1, h, q1) = (elim.a1.clone(), elim.h.clone(), elim.q1.clone());
    Arc::new(move |t| {
        let at = a1(t);
        let ht = h(t);
        block2(
            &at,
            &q1(t),
            &(ht.transpose() * &ht * w(t)),
            &(-at.transpose()),
        )
    })
}

fn filter_forcing<T: Real>(elim: &EliminatedSystem<T>, w: ScalarFn<T>, y: &VecFn<T>) -> VecFn<T> {
    let (h, y) = (elim.h.clone(), y.clone());
    let d = 2 * elim.n;
    Arc::new(move |t| vjoin(&DVector::zeros(d), &(-(h(t).transpose() * y(t)) * w(t))))
}

/// Whether some weight steers the adjoint state to zero at `t = 1`.
pub fn u_feasible<T: Real>(
    elim: &EliminatedSystem<T>,
    b: &DVector<T>,
    s: T,
    nodes: usize,
) -> Result<bool> {
    let d = 2 * elim.n;
    let (grid, si) = split_grid(s, nodes)?;
    let a1 = elim.a1.clone();
    let drift: MatFn<T> = Arc::new(move |t| -a1(t).transpose());
    let psi = backward_propagator(&drift, &grid);
    let mut gram = DMatrix::zeros(d, d);
    for (k, piece) in psi.iter().enumerate() {
        let nodes = grid.nodes(k);
        for (j, w) in grid.weights(k).into_iter().enumerate() {
            let m = &piece[j] * (elim.h)(nodes[j]).transpose();
            gram += &m * m.transpose() * w;
        }
    }
    let c = &psi[si][0] * b;
    let cn = c.norm();
    if cn == T::zero() {
        return Ok(true);
    }
    let ns = null_space(&gram, T::rank_tol());
    Ok(ns.ncols() == 0 || (ns.transpose() * &c).norm() <= T::lit(1e-6) * cn)
}

/// Estimator restricted to weights whose adjoint state vanishes at both ends.
pub fn solve_u_optimal<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    b: &DVector<T>,
    s: T,
    variant: WeightVariant,
    nodes: usize,
) -> Result<ElimSolution<T>> {
    check_noise(q1)?;
    let n = elim.n;
    if b.len() != 2 * n {
        return Err(Error::ArityMismatch {
            expected: 2 * n,
            got: b.len(),
        });
    }
    if !u_feasible(elim, b, s, nodes)? {
        return Err(Error::InfeasibleU);
    }
    let (grid, si) = split_grid(s, nodes)?;
    let w: ScalarFn<T> = {
        let q1 = q1.clone();
        Arc::new(move |t| variant.apply(q1(t)))
    };
    let mut prob = MultipointProblem::new(grid, 4 * n, 0, estimator_drift(elim, w.clone()));
    let clamp = block_rows(n, &[(0, 0), (1, 0)]);
    prob.left_rows(clamp.clone(), DVector::zeros(2 * n));
    prob.right_rows(clamp, DVector::zeros(2 * n));
    prob.set_jump(si, vjoin(&(-b), &DVector::zeros(2 * n)));
    let sol = prob.solve().map_err(|e| match e {
        Error::SingularSystem(m) => Error::SingularKkt(m),
        other => other,
    })?;
    finish(elim, q1, &w, b, sol.trajectory, si, sol.warnings)
}

/// Filter matching [`solve_u_optimal`]; returns the state and `x_hat(s)`.
pub fn solve_u_optimal_filter<T: Real>(
    elim: &EliminatedSystem<T>,
    q1: &ScalarFn<T>,
    y: &VecFn<T>,
    s: T,
    variant: WeightVariant,
    nodes: usize,
) -> Result<(PiecewiseTrajectory<T>, DVector<T>)> {
    check_noise(q1)?;
    let n = elim.n;
    let w: ScalarFn<T> = {
        let q1 = q1.clone();
        Arc::new(move |t| variant.apply(q1(t)))
    };
    let (grid, si) = split_grid(s, nodes)?;
    let mut prob = MultipointProblem::new(grid, 4 * n, 0, filter_drift(elim, w.clone()));
    prob.set_forcing_all(filter_forcing(elim, w, y));
    let clamp = block_rows(n, &[(2, 0), (3, 0)]);
    prob.left_rows(clamp.clone(), DVector::zeros(2 * n));
    prob.right_rows(clamp, DVector::zeros(2 * n));
    let sol = prob.solve().map_err(|e| match e {
        Error::SingularSystem(m) => Error::SingularKkt(m),
        other => other,
    })?;
    let x_s = sol.trajectory.left_limit(si).rows(0, 2 * n).into_owned();
    Ok((sol.trajectory, x_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{const_mat, const_scalar, vec_fn};

    fn scalar_elim() -> EliminatedSystem {
        let sweep =
            Arc::new(riccati_sweep(const_mat(DMatrix::from_element(1, 1, 1.0)), 257).unwrap());
        let one = const_mat(DMatrix::from_element(1, 1, 1.0));
        let zero = const_mat(DMatrix::from_element(1, 1, 0.0));
        let c = ElimObservation {
            c11: one.clone(),
            c12: zero.clone(),
            c21: zero,
            c22: one.clone(),
        };
        eliminate(sweep, one, &DMatrix::identity(1, 1), &c).unwrap()
    }

    #[test]
    fn scalar_sweep_is_tanh() {
        let s = riccati_sweep(const_mat(DMatrix::from_element(1, 1, 1.0)), 257).unwrap();
        let err = s
            .times
            .iter()
            .zip(&s.p)
            .map(|(t, p): (&f64, &DMatrix<f64>)| (p[(0, 0)] - t.tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8);
        assert!((s.p_at(0.3337)[(0, 0)] - 0.3337f64.tanh()).abs() < 1e-8);
        assert!(s.residual() < 1e-6);
    }

    #[test]
    fn zero_matrix_gives_zero_gain() {
        let s = riccati_sweep(const_mat(DMatrix::<f64>::zeros(2, 2)), 9).unwrap();
        assert!(s.p.iter().all(|p| p.amax() == 0.0));
    }

    #[test]
    fn negative_definite_coefficient_blows_up() {
        // P' = -4 - P^2 reaches infinity at t = pi/4 < 1.
        let r = riccati_sweep(const_mat(DMatrix::from_element(1, 1, -4.0)), 4097);
        assert!(matches!(r, Err(Error::BlowUp(_))));
    }

    #[test]
    fn observation_blocks_without_derivative_terms() {
        let e = scalar_elim();
        let h = (e.h)(0.5);
        assert_eq!(h[(0, 0)], 1.0);
        assert_eq!(h[(0, 1)], 0.0);
        assert!((h[(1, 0)] - 0.5f64.tanh()).abs() < 1e-8);
    }

    #[test]
    fn zero_target_gives_zero_weights() {
        let e = scalar_elim();
        let sol = solve_elimination_estimator(&e, &const_scalar(1.0), &DVector::zeros(2), 0.5, 17)
            .unwrap();
        assert_eq!(sol.u_hat.sup_norm(), 0.0);
        assert_eq!(sol.sigma, 0.0);
    }

    #[test]
    fn estimator_duality_and_filter_agree() {
        let e = scalar_elim();
        let q1 = const_scalar(1.5);
        let b = elimination_target(
            &e.sweep,
            0.4,
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, 0.5),
        );
        let sol = solve_elimination_estimator(&e, &q1, &b, 0.4, 65).unwrap();
        assert!((sol.sigma_sq - sol.dual_variance).abs() < 1e-8);
        let y = vec_fn(|t: f64| DVector::from_vec(vec![t.sin(), 1.0 - t]));
        let (_, xs) = solve_elimination_filter(&e, &q1, &y, 0.4, 65).unwrap();
        assert!((sol.estimate(&y) - b.dot(&xs)).abs() < 1e-8);
    }

    #[test]
    fn symmetric_coefficient_keeps_gain_symmetric() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.4, 0.7, 0.1, 0.0, -0.5, 0.9]);
        let base = &m * m.transpose();
        let a = crate::func::mat_fn(move |t: f64| &base * (1.0 + 0.5 * t));
        let s = riccati_sweep(a, 129).unwrap();
        for p in &s.p {
            assert!((p - p.transpose()).amax() < 1e-9);
        }
    }

    fn direct_solve(f: VecFn, nodes: usize) -> PiecewiseTrajectory {
        let grid = Grid::new(vec![0.0, 1.0], nodes).unwrap();
        let drift = const_mat(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let mut prob = MultipointProblem::new(grid, 2, 0, drift);
        prob.set_forcing_all(Arc::new(move |t| DVector::from_vec(vec![0.0, f(t)[0]])));
        prob.left_rows(
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DVector::zeros(1),
        );
        prob.right_rows(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(1),
        );
        prob.solve().unwrap().trajectory
    }

    #[test]
    fn round_trip_matches_direct_solve() {
        let e = scalar_elim();
        for f in [
            vec_fn(|_t: f64| DVector::from_element(1, 1.0)),
            vec_fn(|t: f64| DVector::from_element(1, (3.0 * t).cos())),
        ] {
            let (phi, dphi) = reconstruct(&e, &f, 257).unwrap();
            let direct = direct_solve(f, 257);
            for &t in &[0.0, 0.2, 0.5, 0.77, 1.0] {
                let d = direct.at(t, crate::trajectory::Side::Left).unwrap();
                assert!((phi.at(t, crate::trajectory::Side::Left).unwrap()[0] - d[0]).abs() < 1e-6);
                assert!(
                    (dphi.at(t, crate::trajectory::Side::Left).unwrap()[0] - d[1]).abs() < 1e-6
                );
            }
        }
        let (phi, _) = reconstruct(&e, &crate::func::zero_vec(1), 33).unwrap();
        assert_eq!(phi.sup_norm(), 0.0);
    }

    #[test]
    fn u_optimal_filter_representation() {
        let e = scalar_elim();
        let q1 = const_scalar(0.8);
        let b = elimination_target(
            &e.sweep,
            0.6,
            &DVector::from_element(1, 1.0),
            &DVector::from_element(1, -0.3),
        );
        let y = vec_fn(|t: f64| DVector::from_vec(vec![(2.0 * t).exp(), t * t - 0.2]));
        let free = solve_elimination_estimator(&e, &q1, &b, 0.6, 65).unwrap();
        for variant in [WeightVariant::Squared, WeightVariant::Linear] {
            let sol = solve_u_optimal(&e, &q1, &b, 0.6, variant, 65).unwrap();
            let (_, xs) = solve_u_optimal_filter(&e, &q1, &y, 0.6, variant, 65).unwrap();
            let scale = 1.0 + b.norm() * xs.norm();
            assert!(
                (sol.estimate(&y) - b.dot(&xs)).abs() < 1e-6 * scale,
                "{variant:?}"
            );
            assert!(sol.sigma_sq >= free.sigma_sq - 1e-8);
        }
        let sq = solve_u_optimal(&e, &q1, &b, 0.6, WeightVariant::Squared, 65).unwrap();
        assert!((sq.sigma_sq - sq.dual_variance).abs() < 1e-6 * sq.sigma_sq.max(1.0));
        let zero =
            solve_u_optimal(&e, &q1, &DVector::zeros(2), 0.6, WeightVariant::Squared, 33).unwrap();
        assert_eq!(zero.u_hat.sup_norm(), 0.0);
    }
}
