//! Minimax estimation from observations on a time window.
//!
//! Data: `y(t) = H(t) phi(t) + xi(t)` on `(alpha, beta)`, where `phi` solves a
//! [`BvpSpec`] whose data `(f, f0, f1)` lie in the ellipsoid [`EllipsoidG`] and
//! the noise has bounded weighted energy. The best linear estimate of
//! `(a, phi(s))` is `int (u_hat, y) + c_hat`, and its guaranteed error `sigma`
//! comes out of one coupled two-point problem for a state `(z, p)`:
//!
//! ```text
//! z' = A^T z + chi H^T Q H p      p' = -A p + Q2^{-1} z
//! z(s+) = z(s-) - a               u_hat = Q H p,  sigma^2 = (a, p(s))
//! ```
//!
//! with boundary rows `B0_hat z(0) = 0`, `B0 p(0) = Q0^{-1} B0_bar z(0)`,
//! `B1_hat z(T) = 0`, `B1 p(T) = -Q1^{-1} B1_bar z(T)`.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::boundary::{BoundaryAlgebra, BvpSpec};
use crate::bvp::MultipointProblem;
use crate::error::{Error, Result};
use crate::func::{MatFn, VecFn};
use crate::grid::{merge_breakpoints, Grid};
use crate::linalg::{block2, hcat, is_psd, spd_inverse, vjoin};
use crate::scalar::Real;
use crate::trajectory::PiecewiseTrajectory;

/// Observation operator and noise weight on a window.
#[derive(Clone)]
pub struct IntervalObservation<T: Real = f64> {
    pub h: MatFn<T>,
    pub q: MatFn<T>,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> IntervalObservation<T> {
    pub fn new(h: MatFn<T>, q: MatFn<T>, alpha: T, beta: T) -> Result<Self> {
        if !(beta > alpha) {
            return Err(Error::InvalidInput(
                "observation window must have alpha < beta".into(),
            ));
        }
        let l = h(alpha).nrows();
        for t in [alpha, (alpha + beta) * T::lit(0.5), beta] {
            let qt = q(t);
            if qt.shape() != (l, l) || h(t).nrows() != l {
                return Err(Error::InvalidInput(
                    "H and Q have inconsistent sizes".into(),
                ));
            }
            spd_inverse(&qt)?;
        }
        Ok(Self { h, q, alpha, beta })
    }

    pub fn l(&self) -> usize {
        (self.h)(self.alpha).nrows()
    }

    /// Same observation with the noise weight scaled by `c`.
    pub fn scaled_noise(&self, c: T) -> Self {
        let q = self.q.clone();
        Self {
            q: Arc::new(move |t| q(t) * c),
            ..self.clone()
        }
    }
}

/// Ellipsoidal set of admissible data, stored through inverse weights.
///
/// Inverse weights may be singular; a zero block means the corresponding
/// datum is known exactly.
#[derive(Clone)]
pub struct EllipsoidG<T: Real = f64> {
    pub f_nom: VecFn<T>,
    pub f0_nom: DVector<T>,
    pub f1_nom: DVector<T>,
    pub q0_inv: DMatrix<T>,
    pub q1_inv: DMatrix<T>,
    pub q2_inv: MatFn<T>,
}

impl<T: Real> EllipsoidG<T> {
    /// Set with SPD weights `Q0`, `Q1`, `Q2(t)`.
    pub fn from_weights(
        q0: &DMatrix<T>,
        q1: &DMatrix<T>,
        q2: MatFn<T>,
        f_nom: VecFn<T>,
        f0_nom: DVector<T>,
        f1_nom: DVector<T>,
    ) -> Result<Self> {
        let q2_inv: MatFn<T> =
            Arc::new(move |t| spd_inverse(&q2(t)).expect("Q2(t) must stay positive definite"));
        Self::from_inverse_weights(
            spd_inverse(q0)?,
            spd_inverse(q1)?,
            q2_inv,
            f_nom,
            f0_nom,
            f1_nom,
        )
    }

    pub fn from_inverse_weights(
        q0_inv: DMatrix<T>,
        q1_inv: DMatrix<T>,
        q2_inv: MatFn<T>,
        f_nom: VecFn<T>,
        f0_nom: DVector<T>,
        f1_nom: DVector<T>,
    ) -> Result<Self> {
        if !is_psd(&q0_inv) || !is_psd(&q1_inv) {
            return Err(Error::InvalidInput(
                "inverse weights must be positive semidefinite".into(),
            ));
        }
        if q0_inv.nrows() != f0_nom.len() || q1_inv.nrows() != f1_nom.len() {
            return Err(Error::InvalidInput(
                "weight sizes do not match the boundary data".into(),
            ));
        }
        Ok(Self {
            f_nom,
            f0_nom,
            f1_nom,
            q0_inv,
            q1_inv,
            q2_inv,
        })
    }

    /// Identity weights and zero nominal data.
    pub fn unit(n: usize, m: usize) -> Self {
        Self {
            f_nom: crate::func::zero_vec(n),
            f0_nom: DVector::zeros(m),
            f1_nom: DVector::zeros(n - m),
            q0_inv: DMatrix::identity(m, m),
            q1_inv: DMatrix::identity(n - m, n - m),
            q2_inv: crate::func::const_mat(DMatrix::identity(n, n)),
        }
    }

    fn check(&self, spec: &BvpSpec<T>) -> Result<()> {
        if self.f0_nom.len() != spec.m || self.f1_nom.len() != spec.n - spec.m {
            return Err(Error::InvalidInput(
                "ellipsoid does not match the problem dimensions".into(),
            ));
        }
        if (self.q2_inv)(T::zero()).shape() != (spec.n, spec.n) {
            return Err(Error::InvalidInput("Q2 has the wrong size".into()));
        }
        Ok(())
    }
}

/// Linear functional `(a, phi(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTarget<T: Real = f64> {
    pub a: DVector<T>,
    pub s: T,
}

/// Optimal estimator together with its auxiliary state.
#[derive(Debug, Clone)]
pub struct MinimaxSolution<T: Real = f64> {
    /// Stacked `(z, p)`.
    pub state: PiecewiseTrajectory<T>,
    /// Optimal weights; zero outside the observation window.
    pub u_hat: PiecewiseTrajectory<T>,
    /// Grid intervals covered by the observation window.
    pub window: Range<usize>,
    /// Breakpoint index of the estimation point.
    pub target_index: usize,
    pub c_hat: T,
    pub sigma_sq: T,
    pub sigma: T,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> MinimaxSolution<T> {
    pub fn z(&self) -> PiecewiseTrajectory<T> {
        self.state.components(0, self.n)
    }

    pub fn p(&self) -> PiecewiseTrajectory<T> {
        self.state.components(self.n, self.n)
    }

    pub fn grid(&self) -> &Grid<T> {
        self.state.grid()
    }
}

/// Solution of the filtering system.
#[derive(Debug, Clone)]
pub struct FilterSolution<T: Real = f64> {
    /// Stacked `(p_hat, phi_hat)`.
    pub state: PiecewiseTrajectory<T>,
    /// Filtered state at the requested point.
    pub phi_at_s: DVector<T>,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> FilterSolution<T> {
    pub fn p_hat(&self) -> PiecewiseTrajectory<T> {
        self.state.components(0, self.n)
    }

    pub fn phi_hat(&self) -> PiecewiseTrajectory<T> {
        self.state.components(self.n, self.n)
    }

    /// `(a, phi_hat(s))`.
    pub fn estimate(&self, a: &DVector<T>) -> T {
        a.dot(&self.phi_at_s)
    }
}

/// Boundary treatment of the coupled `(z, p)` state.
pub(crate) enum Ends<'a, T: Real> {
    /// Ellipsoidal boundary data; `rhs0`/`rhs1` are the data rows of `p`.
    Weighted {
        alg: &'a BoundaryAlgebra<T>,
        q0_inv: &'a DMatrix<T>,
        q1_inv: &'a DMatrix<T>,
        rhs0: DVector<T>,
        rhs1: DVector<T>,
    },
    /// `z(0) = 0` and `z(T) = 0`, nothing imposed on `p`.
    Clamped,
}

/// Drift `[[A^T, chi H^T Q H], [Q2^{-1}, -A]]`.
pub(crate) fn coupled_drift<T: Real>(
    a: &MatFn<T>,
    q2_inv: &MatFn<T>,
    obs: Option<&IntervalObservation<T>>,
) -> MatFn<T> {
    let a = a.clone();
    let q2_inv = q2_inv.clone();
    let obs = obs.map(|o| (o.h.clone(), o.q.clone()));
    Arc::new(move |t| {
        let at = a(t);
        let n = at.nrows();
        let gain = match &obs {
            Some((h, q)) => {
                let ht = h(t);
                ht.transpose() * q(t) * ht
            }
            None => DMatrix::zeros(n, n),
        };
        block2(&at.transpose(), &gain, &q2_inv(t), &(-at))
    })
}

/// Coupled multipoint problem with continuous interfaces.
pub(crate) fn coupled_problem<T: Real>(
    spec: &BvpSpec<T>,
    q2_inv: &MatFn<T>,
    obs: Option<&IntervalObservation<T>>,
    window: Range<usize>,
    grid: Grid<T>,
    ends: Ends<'_, T>,
) -> MultipointProblem<T> {
    let n = spec.n;
    let passive = coupled_drift(&spec.a, q2_inv, None);
    let mut prob = MultipointProblem::new(grid, 2 * n, 0, passive);
    if let Some(o) = obs {
        let active = coupled_drift(&spec.a, q2_inv, Some(o));
        for k in window {
            prob.set_drift(k, active.clone());
        }
    }
    match ends {
        Ends::Weighted {
            alg,
            q0_inv,
            q1_inv,
            rhs0,
            rhs1,
        } => {
            let (m, r) = (spec.m, n - spec.m);
            let z0 = hcat(&alg.b0_hat, &DMatrix::zeros(r, n));
            let p0 = hcat(&(-(q0_inv * &alg.b0_bar)), &spec.b0);
            prob.left_rows(
                crate::linalg::vcat(&z0, &p0),
                vjoin(&DVector::zeros(r), &rhs0),
            );
            let z1 = hcat(&alg.b1_hat, &DMatrix::zeros(m, n));
            let p1 = hcat(&(q1_inv * &alg.b1_bar), &spec.b1);
            prob.right_rows(
                crate::linalg::vcat(&z1, &p1),
                vjoin(&DVector::zeros(m), &rhs1),
            );
        }
        Ends::Clamped => {
            let clamp = hcat(&DMatrix::identity(n, n), &DMatrix::zeros(n, n));
            prob.left_rows(clamp.clone(), DVector::zeros(n));
            prob.right_rows(clamp, DVector::zeros(n));
        }
    }
    prob
}

/// Grid with breakpoints at `0, alpha, s, beta, T` and the window's intervals.
pub(crate) fn window_grid<T: Real>(
    horizon: T,
    obs: &IntervalObservation<T>,
    s: T,
    nodes: usize,
) -> Result<(Grid<T>, Range<usize>, usize)> {
    if obs.alpha < T::zero() || obs.beta > horizon {
        return Err(Error::InvalidInput(
            "observation window must lie inside [0, T]".into(),
        ));
    }
    if !(s > obs.alpha && s < obs.beta) {
        return Err(Error::InvalidInput(
            "estimation point must lie strictly inside the window".into(),
        ));
    }
    let grid = Grid::new(
        merge_breakpoints(T::zero(), horizon, &[obs.alpha, s, obs.beta])?,
        nodes,
    )?;
    let lo = grid.require_breakpoint(obs.alpha)?;
    let hi = grid.require_breakpoint(obs.beta)?;
    let si = grid.require_breakpoint(s)?;
    Ok((grid, lo..hi, si))
}

/// Variance from `(a, p(s))`, rejecting clearly negative values.
pub(crate) fn variance_from<T: Real>(
    a: &DVector<T>,
    p_left: &DVector<T>,
    p_right: &DVector<T>,
    warnings: &mut Vec<String>,
) -> Result<(T, T)> {
    let scale = T::one().max(a.norm() * p_left.norm());
    if (p_left - p_right).amax() > T::lit(1e-9) * scale {
        warnings.push("p is not continuous at the estimation point".into());
    }
    let v = a.dot(p_left);
    if v < -T::lit(1e-10) * scale {
        return Err(Error::NegativeVariance(v.as_f64()));
    }
    let v = v.max(T::zero());
    Ok((v, v.sqrt()))
}

/// Optimal weights and offset for estimating `(a, phi(s))`.
pub fn solve_estimator<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &IntervalObservation<T>,
    target: &FunctionalTarget<T>,
    nodes: usize,
) -> Result<MinimaxSolution<T>> {
    g.check(spec)?;
    let n = spec.n;
    if target.a.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: target.a.len(),
        });
    }
    let (grid, window, si) = window_grid(spec.horizon, obs, target.s, nodes)?;
    let ends = Ends::Weighted {
        alg,
        q0_inv: &g.q0_inv,
        q1_inv: &g.q1_inv,
        rhs0: DVector::zeros(spec.m),
        rhs1: DVector::zeros(n - spec.m),
    };
    let mut prob = coupled_problem(spec, &g.q2_inv, Some(obs), window.clone(), grid, ends);
    prob.set_jump(si, vjoin(&(-&target.a), &DVector::zeros(n)));
    let sol = prob.solve()?;
    let mut warnings = sol.warnings;
    let state = sol.trajectory;
    let u_hat = window_weights(&state, obs, &window, n);
    let (sigma_sq, sigma) = variance_from(
        &target.a,
        &state.left_limit(si).rows(n, n).into_owned(),
        &state.right_limit(si).rows(n, n).into_owned(),
        &mut warnings,
    )?;
    let c_hat = offset(spec, alg, g, &state);
    Ok(MinimaxSolution {
        state,
        u_hat,
        window,
        target_index: si,
        c_hat,
        sigma_sq,
        sigma,
        n,
        warnings,
    })
}

/// `u = Q H p` on the window, zero elsewhere.
fn window_weights<T: Real>(
    state: &PiecewiseTrajectory<T>,
    obs: &IntervalObservation<T>,
    window: &Range<usize>,
    n: usize,
) -> PiecewiseTrajectory<T> {
    let l = obs.l();
    let grid = state.grid().clone();
    PiecewiseTrajectory::sample(&grid, |k, t| {
        if window.contains(&k) {
            let j = grid
                .nodes(k)
                .iter()
                .position(|&x| x == t)
                .expect("sampled at grid nodes");
            let p = state.node(k, j).rows(n, n);
            (obs.q)(t) * (obs.h)(t) * p
        } else {
            DVector::zeros(l)
        }
    })
}

/// Offset built from the nominal data.
fn offset<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    state: &PiecewiseTrajectory<T>,
) -> T {
    let n = spec.n;
    let z0 = state.start().rows(0, n).into_owned();
    let z1 = state.end().rows(0, n).into_owned();
    let bulk = state.integrate(|t, x| x.rows(0, n).dot(&(g.f_nom)(t)));
    (&alg.b0_bar * z0).dot(&g.f0_nom) - (&alg.b1_bar * z1).dot(&g.f1_nom) + bulk
}

/// `int (u_hat, y) + c_hat` with `y` evaluated at the grid nodes.
pub fn estimate_from_observation<T: Real>(sol: &MinimaxSolution<T>, y: &VecFn<T>) -> T {
    let g = sol.grid();
    g.integrate_over(sol.window.clone(), |k, j, t| {
        sol.u_hat.node(k, j).dot(&y(t))
    }) + sol.c_hat
}

/// Same as [`estimate_from_observation`] for data already sampled on the grid.
pub fn estimate_from_samples<T: Real>(
    sol: &MinimaxSolution<T>,
    y: &PiecewiseTrajectory<T>,
) -> Result<T> {
    if y.grid() != sol.grid() {
        return Err(Error::GridMismatch(
            "observation samples live on another grid".into(),
        ));
    }
    let g = sol.grid();
    Ok(g.integrate_over(sol.window.clone(), |k, j, _| {
        sol.u_hat.node(k, j).dot(y.node(k, j))
    }) + sol.c_hat)
}

/// Adjoint state `z` driven by an arbitrary weight `u` on the window.
pub fn solve_control_response<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    obs: &IntervalObservation<T>,
    target: &FunctionalTarget<T>,
    u: &VecFn<T>,
    nodes: usize,
) -> Result<PiecewiseTrajectory<T>> {
    let n = spec.n;
    let (grid, window, si) = window_grid(spec.horizon, obs, target.s, nodes)?;
    let mut prob = MultipointProblem::new(grid, n, 0, spec.adjoint_drift());
    let h = obs.h.clone();
    let u = u.clone();
    let drive: VecFn<T> = Arc::new(move |t| h(t).transpose() * u(t));
    for k in window {
        prob.set_forcing(k, drive.clone());
    }
    prob.set_jump(si, -&target.a);
    prob.left_rows(alg.b0_hat.clone(), DVector::zeros(n - spec.m));
    prob.right_rows(alg.b1_hat.clone(), DVector::zeros(spec.m));
    Ok(prob.solve()?.trajectory)
}

/// Cost of a weight `u` given its adjoint response `z`.
pub fn control_cost<T: Real>(
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &IntervalObservation<T>,
    z: &PiecewiseTrajectory<T>,
    u: &VecFn<T>,
) -> Result<T> {
    let b0z = &alg.b0_bar * z.start();
    let b1z = &alg.b1_bar * z.end();
    let bulk = z.integrate(|t, x| x.dot(&((g.q2_inv)(t) * x)));
    let grid = z.grid();
    let lo = grid.require_breakpoint(obs.alpha)?;
    let hi = grid.require_breakpoint(obs.beta)?;
    let noise = grid.integrate_over(lo..hi, |_, _, t| {
        let ut = u(t);
        ut.dot(&(spd_inverse(&(obs.q)(t)).expect("Q(t) positive definite") * &ut))
    });
    Ok(b0z.dot(&(&g.q0_inv * &b0z)) + b1z.dot(&(&g.q1_inv * &b1z)) + bulk + noise)
}

/// Cost of the optimal weights evaluated directly from the solution.
pub fn evaluate_cost<T: Real>(
    sol: &MinimaxSolution<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &IntervalObservation<T>,
) -> T {
    let n = sol.n;
    let z0 = sol.state.start().rows(0, n).into_owned();
    let z1 = sol.state.end().rows(0, n).into_owned();
    let b0z = &alg.b0_bar * z0;
    let b1z = &alg.b1_bar * z1;
    let bulk = sol.state.integrate(|t, x| {
        let z = x.rows(0, n);
        z.dot(&((g.q2_inv)(t) * z))
    });
    let grid = sol.grid();
    let noise = grid.integrate_over(sol.window.clone(), |k, j, t| {
        let u = sol.u_hat.node(k, j);
        u.dot(&(spd_inverse(&(obs.q)(t)).expect("Q(t) positive definite") * u))
    });
    b0z.dot(&(&g.q0_inv * &b0z)) + b1z.dot(&(&g.q1_inv * &b1z)) + bulk + noise
}

/// Filtered state whose value at `s` reproduces the optimal estimate.
pub fn solve_filter<T: Real>(
    spec: &BvpSpec<T>,
    alg: &BoundaryAlgebra<T>,
    g: &EllipsoidG<T>,
    obs: &IntervalObservation<T>,
    y: &VecFn<T>,
    s: T,
    nodes: usize,
) -> Result<FilterSolution<T>> {
    g.check(spec)?;
    let n = spec.n;
    let (grid, window, si) = window_grid(spec.horizon, obs, s, nodes)?;
    let ends = Ends::Weighted {
        alg,
        q0_inv: &g.q0_inv,
        q1_inv: &g.q1_inv,
        rhs0: g.f0_nom.clone(),
        rhs1: g.f1_nom.clone(),
    };
    let mut prob = coupled_problem(spec, &g.q2_inv, Some(obs), window.clone(), grid, ends);
    let f_nom = g.f_nom.clone();
    let passive: VecFn<T> = {
        let f_nom = f_nom.clone();
        Arc::new(move |t| vjoin(&DVector::zeros(n), &f_nom(t)))
    };
    let (h, q, y) = (obs.h.clone(), obs.q.clone(), y.clone());
    let active: VecFn<T> = Arc::new(move |t| {
        let ht = h(t);
        vjoin(&(-(ht.transpose() * q(t) * y(t))), &f_nom(t))
    });
    for k in 0..prob.grid().intervals() {
        prob.set_forcing(
            k,
            if window.contains(&k) {
                active.clone()
            } else {
                passive.clone()
            },
        );
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

/// Data of a second-order system `-phi'' + q(t) phi = f` with Dirichlet
/// conditions, observed through `H phi` on a window.
#[derive(Clone)]
pub struct SecondOrderProblem<T: Real = f64> {
    pub horizon: T,
    pub q: MatFn<T>,
    pub f_nom: VecFn<T>,
    pub f0_nom: DVector<T>,
    pub f1_nom: DVector<T>,
    pub q0_inv: DMatrix<T>,
    pub q1_inv: DMatrix<T>,
    pub q2_inv: MatFn<T>,
    pub h: MatFn<T>,
    pub noise: MatFn<T>,
    pub alpha: T,
    pub beta: T,
    pub a: DVector<T>,
    pub s: T,
}

/// First-order form of a [`SecondOrderProblem`] in the state `(phi', phi)`.
#[derive(Clone)]
pub struct ReducedProblem<T: Real = f64> {
    pub spec: BvpSpec<T>,
    pub algebra: BoundaryAlgebra<T>,
    pub g: EllipsoidG<T>,
    pub obs: IntervalObservation<T>,
    pub target: FunctionalTarget<T>,
}

pub fn second_order_reduce<T: Real>(p: &SecondOrderProblem<T>) -> Result<ReducedProblem<T>> {
    let n = p.a.len();
    let e = DMatrix::<T>::identity(n, n);
    let zero = DMatrix::<T>::zeros(n, n);
    let q = p.q.clone();
    let a: MatFn<T> = {
        let e = e.clone();
        let zero = zero.clone();
        Arc::new(move |t| block2(&zero, &(-q(t)), &(-&e), &zero))
    };
    let sel = hcat(&zero, &e);
    let spec = BvpSpec::new(
        p.horizon,
        a,
        sel.clone(),
        sel.clone(),
        crate::func::zero_vec(2 * n),
        DVector::zeros(n),
        DVector::zeros(n),
    )?;
    let algebra = crate::boundary::build_boundary_algebra(&spec.b0, &spec.b1)?;
    let f_nom = p.f_nom.clone();
    let q2_inv = p.q2_inv.clone();
    let g = EllipsoidG::from_inverse_weights(
        p.q0_inv.clone(),
        p.q1_inv.clone(),
        Arc::new(move |t| {
            block2(
                &q2_inv(t),
                &DMatrix::zeros(n, n),
                &DMatrix::zeros(n, n),
                &DMatrix::zeros(n, n),
            )
        }),
        Arc::new(move |t| vjoin(&(-f_nom(t)), &DVector::zeros(n))),
        p.f0_nom.clone(),
        p.f1_nom.clone(),
    )?;
    let h = p.h.clone();
    let obs = IntervalObservation::new(
        Arc::new(move |t| {
            let ht = h(t);
            hcat(&DMatrix::zeros(ht.nrows(), n), &ht)
        }),
        p.noise.clone(),
        p.alpha,
        p.beta,
    )?;
    let target = FunctionalTarget {
        a: vjoin(&DVector::zeros(n), &p.a),
        s: p.s,
    };
    Ok(ReducedProblem {
        spec,
        algebra,
        g,
        obs,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::build_boundary_algebra;
    use crate::func::{const_mat, vec_fn};

    fn simple() -> (BvpSpec, BoundaryAlgebra, EllipsoidG, IntervalObservation) {
        let spec = BvpSpec::homogeneous(
            1.0,
            const_mat(DMatrix::zeros(2, 2)),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        let alg = build_boundary_algebra(&spec.b0, &spec.b1).unwrap();
        let g = EllipsoidG::unit(2, 1);
        let obs = IntervalObservation::new(
            const_mat(DMatrix::identity(2, 2)),
            const_mat(DMatrix::identity(2, 2)),
            0.25,
            0.75,
        )
        .unwrap();
        (spec, alg, g, obs)
    }

    #[test]
    fn zero_functional_has_zero_error() {
        let (spec, alg, g, obs) = simple();
        let t = FunctionalTarget {
            a: DVector::zeros(2),
            s: 0.5,
        };
        let sol = solve_estimator(&spec, &alg, &g, &obs, &t, 17).unwrap();
        assert_eq!(sol.sigma, 0.0);
        assert_eq!(sol.c_hat, 0.0);
        assert!(sol.u_hat.sup_norm() == 0.0);
    }

    #[test]
    fn linear_in_the_functional() {
        let (spec, alg, g, obs) = simple();
        let t1 = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, 0.5]),
            s: 0.5,
        };
        let t2 = FunctionalTarget {
            a: &t1.a * 2.0,
            s: 0.5,
        };
        let s1 = solve_estimator(&spec, &alg, &g, &obs, &t1, 33).unwrap();
        let s2 = solve_estimator(&spec, &alg, &g, &obs, &t2, 33).unwrap();
        assert!((s2.sigma - 2.0 * s1.sigma).abs() < 1e-12);
        assert!((s2.u_hat.node(1, 3) - s1.u_hat.node(1, 3) * 2.0).norm() < 1e-12);
    }

    #[test]
    fn duality_between_variance_and_cost() {
        let (spec, alg, g, obs) = simple();
        let t = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, 0.0]),
            s: 0.5,
        };
        let sol = solve_estimator(&spec, &alg, &g, &obs, &t, 65).unwrap();
        let cost = evaluate_cost(&sol, &alg, &g, &obs);
        assert!(sol.sigma_sq > 0.0);
        assert!((cost - sol.sigma_sq).abs() < 1e-8 * sol.sigma_sq.max(1.0));
    }

    #[test]
    fn filter_vanishes_without_data() {
        let (spec, alg, g, obs) = simple();
        let y = vec_fn(|_| DVector::zeros(2));
        let f = solve_filter(&spec, &alg, &g, &obs, &y, 0.5, 17).unwrap();
        assert_eq!(f.state.sup_norm(), 0.0);
    }

    #[test]
    fn target_must_be_inside_the_window() {
        let (spec, alg, g, obs) = simple();
        let t = FunctionalTarget {
            a: DVector::from_vec(vec![1.0, 0.0]),
            s: 0.25,
        };
        assert!(solve_estimator(&spec, &alg, &g, &obs, &t, 17).is_err());
    }
}
