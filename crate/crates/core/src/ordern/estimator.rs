//! Minimax estimators and filters for order-`n` problems.
//!
//! All four systems share one shape. A primal companion state `Y` and an
//! adjoint quasi-derivative state `W` are coupled through `Q^{-1}` and
//! through the normal operator `C^* J Q_0 C`, subject to the primal and
//! adjoint boundary forms plus one orthogonality row per kernel element.
//! They differ only in their sources, so one assembly routine serves them
//! all. The kernel observation is nonlocal; its samples `theta = C p` enter
//! the shooting system as unknown parameters.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bvp::{ConditionBlock, Endpoint, MultipointProblem};
use crate::error::{Error, Result};
use crate::func::{const_scalar, MatFn, ScalarFn, VecFn};
use crate::grid::Grid;
use crate::linalg::spd_inverse;
use crate::scalar::Real;
use crate::trajectory::{PiecewiseTrajectory, Side};

use super::observation::{window_integral, ObsData, ObsOperator};
use super::operator::OrderNSpec;
use super::structure::{
    complete_and_derive_adjoint_forms, null_space_bases, solvability_residual, AdjointStructure,
    NullSpaces,
};

/// Largest nominal solvability residual accepted.
pub const NOMINAL_TOL: f64 = 1e-6;

/// Ellipsoid weights: `Q(t)` acting by multiplication and the matrix `Q_1`.
#[derive(Clone)]
pub struct RhsWeights<T: Real = f64> {
    pub q: ScalarFn<T>,
    pub q1: DMatrix<T>,
}

/// Centre `(f0, alpha0)` of the ellipsoid.
#[derive(Clone)]
pub struct Nominal<T: Real = f64> {
    pub f0: ScalarFn<T>,
    pub alpha0: DVector<T>,
}

impl<T: Real> Nominal<T> {
    pub fn zero(m: usize) -> Self {
        Self {
            f0: const_scalar(T::zero()),
            alpha0: DVector::zeros(m),
        }
    }
}

/// Everything the order-`n` solvers need, prepared once.
#[derive(Clone)]
pub struct OrderNProblem<T: Real = f64> {
    pub spec: OrderNSpec<T>,
    pub structure: AdjointStructure<T>,
    pub obs: ObsOperator<T>,
    pub weights: RhsWeights<T>,
    pub nominal: Nominal<T>,
    pub grid: Grid<T>,
    pub nulls: NullSpaces<T>,
    q1_inv: DMatrix<T>,
}

impl<T: Real> OrderNProblem<T> {
    pub fn new(
        spec: OrderNSpec<T>,
        obs: ObsOperator<T>,
        weights: RhsWeights<T>,
        nominal: Nominal<T>,
        nodes: usize,
    ) -> Result<Self> {
        let structure = complete_and_derive_adjoint_forms(&spec)?;
        Self::with_structure(spec, structure, obs, weights, nominal, nodes)
    }

    pub fn with_structure(
        spec: OrderNSpec<T>,
        structure: AdjointStructure<T>,
        obs: ObsOperator<T>,
        weights: RhsWeights<T>,
        nominal: Nominal<T>,
        nodes: usize,
    ) -> Result<Self> {
        let m = spec.m();
        if weights.q1.nrows() != m || nominal.alpha0.len() != m {
            return Err(Error::ArityMismatch {
                expected: m,
                got: weights.q1.nrows(),
            });
        }
        let q1_inv = spd_inverse(&weights.q1)?;
        obs.validate(spec.a, spec.b)?;
        let grid = Grid::with_points(spec.a, spec.b, &obs.breakpoints(), nodes)?;
        for k in 0..grid.intervals() {
            if grid.nodes(k).iter().any(|&t| !((weights.q)(t) > T::zero())) {
                return Err(Error::InvalidInput(
                    "the weight Q(t) must be positive".into(),
                ));
            }
        }
        let nulls = null_space_bases(&spec, &structure, &grid)?;
        let basis: Vec<ScalarFn<T>> = nulls.primal.iter().map(|y| first_component(y)).collect();
        obs.check_injective(&basis, &grid)?;
        let res = solvability_residual(&spec, &structure, &nulls, &nominal.f0, &nominal.alpha0)?;
        if res.len() > 0 && res.amax() > T::lit(NOMINAL_TOL) {
            return Err(Error::InvalidInput(format!(
                "the nominal right-hand side violates the solvability condition by {:.3e}",
                res.amax().as_f64()
            )));
        }
        Ok(Self {
            spec,
            structure,
            obs,
            weights,
            nominal,
            grid,
            nulls,
            q1_inv,
        })
    }

    fn n(&self) -> usize {
        self.spec.n
    }

    fn psi_fn(&self, i: usize) -> ScalarFn<T> {
        let w = Arc::new(self.nulls.adjoint[i].clone());
        let spec = self.spec.clone();
        let n = self.n();
        Arc::new(move |t| {
            w.at(t, Side::Left)
                .map(|x| x[n - 1] / spec.leading(t))
                .unwrap_or(T::zero())
        })
    }

    fn phi_fn(&self, i: usize) -> ScalarFn<T> {
        first_component(&self.nulls.primal[i])
    }

    fn splus_psi(&self, i: usize) -> DVector<T> {
        let w = &self.nulls.adjoint[i];
        self.structure.conjugate_at(w.start(), w.end())
    }

    /// `Q_1^{-1}`.
    pub fn q1_inv(&self) -> &DMatrix<T> {
        &self.q1_inv
    }

    fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.grid.integrate(|_, _, t| f(t))
    }

    /// Whether interval `k` of the grid lies inside the observation window.
    /// Window edges are grid breakpoints, so every interval is either fully
    /// inside or fully outside.
    fn observed(&self, k: usize) -> bool {
        match &self.obs {
            ObsOperator::Window(w) => {
                let nodes = self.grid.nodes(k);
                nodes[0] >= w.lo && nodes[nodes.len() - 1] <= w.hi
            }
            ObsOperator::Kernel(_) => true,
        }
    }

    /// Integral restricted to the observed intervals.
    fn integrate_observed(&self, f: impl Fn(T) -> T) -> T {
        let mut acc = T::zero();
        for k in (0..self.grid.intervals()).filter(|&k| self.observed(k)) {
            let nodes = self.grid.nodes(k);
            for (j, w) in self.grid.weights(k).into_iter().enumerate() {
                acc += w * f(nodes[j]);
            }
        }
        acc
    }
}

fn first_component<T: Real>(y: &PiecewiseTrajectory<T>) -> ScalarFn<T> {
    let y = Arc::new(y.clone());
    Arc::new(move |t| y.at(t, Side::Left).map(|x| x[0]).unwrap_or(T::zero()))
}

/// Right-hand sides distinguishing the four systems.
struct Sources<T: Real> {
    /// `s` in `L^+ W = s - C^* J Q_0 C Y`.
    adjoint_source: ScalarFn<T>,
    /// `g` in `L Y = Q^{-1} z + g`.
    primal_source: ScalarFn<T>,
    /// Right side of `B(Y) - Q_1^{-1} S^+(W) = b`.
    forms_rhs: DVector<T>,
    /// Right sides of the adjoint-kernel orthogonality rows.
    psi_rhs: DVector<T>,
    /// The adjoint source lives on the observation window only.
    windowed: bool,
}

/// Solution of the coupled system: `x = (Y, W)` and the kernel samples.
#[derive(Debug, Clone)]
pub struct CoupledState<T: Real = f64> {
    pub state: PiecewiseTrajectory<T>,
    pub theta: DVector<T>,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> CoupledState<T> {
    /// Primal function (`p` or `phi_hat`).
    pub fn primal(&self) -> PiecewiseTrajectory<T> {
        self.state.components(0, 1)
    }

    /// Adjoint function `W_n / p_0` (`z` or `p_hat`).
    pub fn adjoint(&self, spec: &OrderNSpec<T>) -> PiecewiseTrajectory<T> {
        let n = self.n;
        self.state
            .map(|t, x| DVector::from_element(1, x[2 * n - 1] / spec.leading(t)))
    }

    fn w_ends(&self) -> (DVector<T>, DVector<T>) {
        let n = self.n;
        (
            self.state.start().rows(n, n).into_owned(),
            self.state.end().rows(n, n).into_owned(),
        )
    }
}

fn solve_coupled<T: Real>(pb: &OrderNProblem<T>, src: &Sources<T>) -> Result<CoupledState<T>> {
    let n = pb.n();
    let m = pb.spec.m();
    let dim = 2 * n;
    let grid = pb.grid.clone();
    let last = grid.intervals() - 1;
    let n_params = match &pb.obs {
        ObsOperator::Kernel(k) => k.len(),
        ObsOperator::Window(_) => 0,
    };
    let spec = pb.spec.clone();
    let q = pb.weights.q.clone();
    let base: MatFn<T> = {
        let spec = spec.clone();
        let q = q.clone();
        Arc::new(move |t| {
            let mm = spec.companion(t);
            let mut d = DMatrix::zeros(dim, dim);
            d.view_mut((0, 0), (n, n)).copy_from(&mm);
            d.view_mut((n, n), (n, n)).copy_from(&(-mm.transpose()));
            let p0 = spec.leading(t);
            d[(n - 1, dim - 1)] = T::one() / (q(t) * p0 * p0);
            d
        })
    };
    let mut prob = MultipointProblem::new(grid.clone(), dim, n_params, base.clone());
    let forcing: VecFn<T> = {
        let (spec, g, s) = (
            spec.clone(),
            src.primal_source.clone(),
            src.adjoint_source.clone(),
        );
        Arc::new(move |t| {
            let mut v = DVector::zeros(dim);
            v[n - 1] = g(t) / spec.leading(t);
            v[n] = -s(t);
            v
        })
    };
    prob.set_forcing_all(forcing);
    if src.windowed {
        let (spec, g) = (spec.clone(), src.primal_source.clone());
        let outside: VecFn<T> = Arc::new(move |t| {
            let mut v = DVector::zeros(dim);
            v[n - 1] = g(t) / spec.leading(t);
            v
        });
        for k in (0..grid.intervals()).filter(|&k| !pb.observed(k)) {
            prob.set_forcing(k, outside.clone());
        }
    }

    match &pb.obs {
        ObsOperator::Window(w) => {
            for k in 0..grid.intervals() {
                let nodes = grid.nodes(k);
                if nodes[0] >= w.lo && nodes[nodes.len() - 1] <= w.hi {
                    let (base, h, q0) = (base.clone(), w.h.clone(), w.q0.clone());
                    prob.set_drift(
                        k,
                        Arc::new(move |t| {
                            let mut d = base(t);
                            let ht = h(t);
                            d[(n, 0)] = ht.dot(&(q0(t) * &ht));
                            d
                        }),
                    );
                }
            }
        }
        ObsOperator::Kernel(ko) => {
            let nc = ko.channels();
            for (kk, &xi) in ko.nodes.iter().enumerate() {
                for j in 0..nc {
                    let col = kk * nc + j;
                    let (ko2, wk) = (ko.clone(), ko.weights[kk]);
                    let column: VecFn<T> = Arc::new(move |t| {
                        let mut v = DVector::zeros(dim);
                        let mut acc = T::zero();
                        for (i, ker) in ko2.kernels.iter().enumerate() {
                            acc += ker(xi, t) * ko2.q0[kk][(i, j)];
                        }
                        v[n] = wk * acc;
                        v
                    });
                    for k in 0..grid.intervals() {
                        prob.add_param_forcing(k, col, column.clone());
                    }
                    // theta_col = int K_j(xi_k, t) Y_1(t) dt
                    let ker = ko.kernels[j].clone();
                    let mut block = ConditionBlock::new(DVector::zeros(1))
                        .param(col, DVector::from_element(1, T::one()));
                    for k in 0..grid.intervals() {
                        let ker = ker.clone();
                        block = block.integral(
                            k,
                            Arc::new(move |t| {
                                let mut r = DMatrix::zeros(1, dim);
                                r[(0, 0)] = -ker(xi, t);
                                r
                            }),
                        );
                    }
                    prob.add_condition(block);
                }
            }
        }
    }

    let st = &pb.structure;
    let lift_w = |rows: &DMatrix<T>| {
        let mut out = DMatrix::zeros(rows.nrows(), dim);
        out.view_mut((0, n), (rows.nrows(), n)).copy_from(rows);
        out
    };
    if 2 * n > m {
        prob.add_condition(
            ConditionBlock::new(DVector::zeros(2 * n - m))
                .point(
                    0,
                    Endpoint::Start,
                    lift_w(&st.adjoint_forms.columns(0, n).into_owned()),
                )
                .point(
                    last,
                    Endpoint::End,
                    lift_w(&st.adjoint_forms.columns(n, n).into_owned()),
                ),
        );
    }
    let qs = &pb.q1_inv * &st.conjugate_forms;
    let form_rows = |c: usize| {
        let mut out = DMatrix::zeros(m, dim);
        out.view_mut((0, 0), (m, n))
            .copy_from(&pb.spec.forms.columns(c, n));
        out.view_mut((0, n), (m, n)).copy_from(&(-qs.columns(c, n)));
        out
    };
    prob.add_condition(
        ConditionBlock::new(src.forms_rhs.clone())
            .point(0, Endpoint::Start, form_rows(0))
            .point(last, Endpoint::End, form_rows(n)),
    );

    for i in 0..pb.nulls.adjoint.len() {
        let psi = pb.psi_fn(i);
        let coef = (&pb.q1_inv * pb.splus_psi(i)).transpose() * &st.conjugate_forms;
        let mut block = ConditionBlock::new(DVector::from_element(1, src.psi_rhs[i]))
            .point(
                0,
                Endpoint::Start,
                lift_w(&DMatrix::from_row_slice(
                    1,
                    n,
                    coef.columns(0, n).into_owned().as_slice(),
                )),
            )
            .point(
                last,
                Endpoint::End,
                lift_w(&DMatrix::from_row_slice(
                    1,
                    n,
                    coef.columns(n, n).into_owned().as_slice(),
                )),
            );
        for k in 0..grid.intervals() {
            let (psi, spec, q) = (psi.clone(), spec.clone(), q.clone());
            block = block.integral(
                k,
                Arc::new(move |t| {
                    let mut r = DMatrix::zeros(1, dim);
                    r[(0, dim - 1)] = psi(t) / (q(t) * spec.leading(t));
                    r
                }),
            );
        }
        prob.add_condition(block);
    }

    for i in 0..pb.nulls.primal.len() {
        let phi = pb.phi_fn(i);
        let s = src.adjoint_source.clone();
        let rhs = if src.windowed {
            pb.integrate_observed(|t| s(t) * phi(t))
        } else {
            pb.integrate(|t| s(t) * phi(t))
        };
        let mut block = ConditionBlock::new(DVector::from_element(1, rhs));
        match &pb.obs {
            ObsOperator::Window(w) => {
                for k in 0..grid.intervals() {
                    let nodes = grid.nodes(k);
                    if nodes[0] >= w.lo && nodes[nodes.len() - 1] <= w.hi {
                        let (phi, h, q0) = (phi.clone(), w.h.clone(), w.q0.clone());
                        block = block.integral(
                            k,
                            Arc::new(move |t| {
                                let ht = h(t);
                                let mut r = DMatrix::zeros(1, dim);
                                r[(0, 0)] = phi(t) * ht.dot(&(q0(t) * &ht));
                                r
                            }),
                        );
                    }
                }
            }
            ObsOperator::Kernel(ko) => {
                let nc = ko.channels();
                for (kk, &xi) in ko.nodes.iter().enumerate() {
                    for j in 0..nc {
                        let c = pb.integrate(|t| {
                            let mut acc = T::zero();
                            for (l, ker) in ko.kernels.iter().enumerate() {
                                acc += ker(xi, t) * ko.q0[kk][(l, j)];
                            }
                            ko.weights[kk] * acc * phi(t)
                        });
                        block = block.param(kk * nc + j, DVector::from_element(1, c));
                    }
                }
            }
        }
        prob.add_condition(block);
    }

    let sol = prob.solve()?;
    Ok(CoupledState {
        state: sol.trajectory,
        theta: sol.params,
        n,
        warnings: sol.warnings,
    })
}

/// Observation-space element built from the primal part of a coupled state.
fn observed_primal<T: Real>(pb: &OrderNProblem<T>, cs: &CoupledState<T>) -> ObsData<T> {
    match &pb.obs {
        ObsOperator::Window(_) => {
            let p = first_component(&cs.primal());
            pb.obs.apply(p, &pb.grid)
        }
        ObsOperator::Kernel(_) => ObsData::Samples(cs.theta.clone()),
    }
}

/// Estimator of a functional of the solution or of the right-hand side.
#[derive(Clone)]
pub struct OrderNEstimate<T: Real = f64> {
    pub coupled: CoupledState<T>,
    /// Optimal weights `u_hat = Q_0 C p`.
    pub u_hat: ObsData<T>,
    pub c_hat: T,
    /// Variance from the closed-form expression.
    pub sigma_sq: T,
    pub sigma: T,
    /// Cost functional at `u_hat`; equals `sigma_sq` at the optimum.
    pub cost: T,
    /// Largest violation of the kernel orthogonality rows.
    pub constraint_residual: T,
}

impl<T: Real> OrderNEstimate<T> {
    /// `(y, u_hat) + c_hat`.
    pub fn estimate(&self, pb: &OrderNProblem<T>, y: &ObsData<T>) -> Result<T> {
        Ok(pb.obs.inner(y, &self.u_hat, &pb.grid)? + self.c_hat)
    }

    /// `z` as a scalar trajectory.
    pub fn z(&self, pb: &OrderNProblem<T>) -> PiecewiseTrajectory<T> {
        self.coupled.adjoint(&pb.spec)
    }

    /// `p` as a scalar trajectory.
    pub fn p(&self) -> PiecewiseTrajectory<T> {
        self.coupled.primal()
    }
}

fn orthogonality_residual<T: Real>(
    pb: &OrderNProblem<T>,
    cs: &CoupledState<T>,
    l0: Option<&ScalarFn<T>>,
    lvec: Option<&DVector<T>>,
    adjoint_source: &ScalarFn<T>,
) -> Result<T> {
    let z = cs.adjoint(&pb.spec);
    let (wa, wb) = cs.w_ends();
    let mut splus = pb.structure.conjugate_at(&wa, &wb);
    if let Some(l) = lvec {
        splus += l;
    }
    let q = pb.weights.q.clone();
    let mut worst = T::zero();
    for i in 0..pb.nulls.adjoint.len() {
        let psi = pb.psi_fn(i);
        let integral = z.integrate(|t, x| {
            let extra = l0.map_or(T::zero(), |l| l(t));
            (x[0] + extra) * psi(t) / q(t)
        });
        let r = integral + (&pb.q1_inv * &splus).dot(&pb.splus_psi(i));
        worst = worst.max(r.abs());
    }
    let normal = pb
        .obs
        .adjoint_apply(&pb.obs.weight(&observed_primal(pb, cs))?)?;
    for i in 0..pb.nulls.primal.len() {
        let phi = pb.phi_fn(i);
        let r = pb.integrate(|t| adjoint_source(t) * phi(t))
            - pb.integrate_observed(|t| normal(t) * phi(t));
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Minimax estimator of `l(phi) = int l0 phi`.
pub fn solve_functional_estimator<T: Real>(
    pb: &OrderNProblem<T>,
    l0: &ScalarFn<T>,
) -> Result<OrderNEstimate<T>> {
    let m = pb.spec.m();
    let src = Sources {
        adjoint_source: l0.clone(),
        primal_source: const_scalar(T::zero()),
        forms_rhs: DVector::zeros(m),
        psi_rhs: DVector::zeros(pb.nulls.adjoint.len()),
        windowed: false,
    };
    let cs = solve_coupled(pb, &src)?;
    let z = cs.adjoint(&pb.spec);
    let p = cs.primal();
    let (wa, wb) = cs.w_ends();
    let splus = pb.structure.conjugate_at(&wa, &wb);
    let f0 = pb.nominal.f0.clone();
    let c_hat = z.integrate(|t, x| x[0] * f0(t)) + splus.dot(&pb.nominal.alpha0);
    let sigma_sq = p.integrate(|t, x| l0(t) * x[0]);
    let u_hat = pb.obs.weight(&observed_primal(pb, &cs))?;
    let q = pb.weights.q.clone();
    let cost = z.integrate(|t, x| x[0] * x[0] / q(t))
        + (&pb.q1_inv * &splus).dot(&splus)
        + pb.obs.noise_energy(&u_hat, &pb.grid)?;
    finish(pb, cs, u_hat, c_hat, sigma_sq, cost, None, None, l0.clone())
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    pb: &OrderNProblem<T>,
    cs: CoupledState<T>,
    u_hat: ObsData<T>,
    c_hat: T,
    sigma_sq: T,
    cost: T,
    l0_shift: Option<&ScalarFn<T>>,
    lvec: Option<&DVector<T>>,
    adjoint_source: ScalarFn<T>,
) -> Result<OrderNEstimate<T>> {
    let scale = sigma_sq.abs().max(T::one());
    if sigma_sq < -T::lit(1e-8) * scale {
        return Err(Error::NegativeVariance(sigma_sq.as_f64()));
    }
    let constraint_residual = orthogonality_residual(pb, &cs, l0_shift, lvec, &adjoint_source)?;
    let sigma_sq = sigma_sq.max(T::zero());
    Ok(OrderNEstimate {
        coupled: cs,
        u_hat,
        c_hat,
        sigma: sigma_sq.sqrt(),
        sigma_sq,
        cost,
        constraint_residual,
    })
}

/// Output of the filters: the filtered solution and the adjoint state.
#[derive(Debug, Clone)]
pub struct OrderNFilter<T: Real = f64> {
    pub coupled: CoupledState<T>,
    /// Companion state of `phi_hat`.
    pub phi_hat: PiecewiseTrajectory<T>,
    /// `p_hat` as a scalar trajectory.
    pub p_hat: PiecewiseTrajectory<T>,
    /// Estimated right-hand side `(f_hat, alpha_hat)`.
    pub f_hat: PiecewiseTrajectory<T>,
    pub alpha_hat: DVector<T>,
}

impl<T: Real> OrderNFilter<T> {
    /// `l(phi_hat) = int l0 phi_hat`.
    pub fn functional(&self, l0: &ScalarFn<T>) -> T {
        self.phi_hat.integrate(|t, x| l0(t) * x[0])
    }

    /// `l(F_hat) = int l0 f_hat + (l, alpha_hat)`.
    pub fn rhs_functional(&self, l0: &ScalarFn<T>, lvec: &DVector<T>) -> T {
        self.f_hat.integrate(|t, x| l0(t) * x[0]) + lvec.dot(&self.alpha_hat)
    }
}

/// Filter for both functional kinds; the systems coincide.
pub fn solve_functional_filter<T: Real>(
    pb: &OrderNProblem<T>,
    y: &ObsData<T>,
) -> Result<OrderNFilter<T>> {
    let src = Sources {
        adjoint_source: pb.obs.adjoint_apply(&pb.obs.weight(y)?)?,
        primal_source: pb.nominal.f0.clone(),
        forms_rhs: pb.nominal.alpha0.clone(),
        psi_rhs: DVector::zeros(pb.nulls.adjoint.len()),
        windowed: true,
    };
    let cs = solve_coupled(pb, &src)?;
    let p_hat = cs.adjoint(&pb.spec);
    let (wa, wb) = cs.w_ends();
    let alpha_hat = &pb.q1_inv * pb.structure.conjugate_at(&wa, &wb) + &pb.nominal.alpha0;
    let (q, f0) = (pb.weights.q.clone(), pb.nominal.f0.clone());
    let f_hat = p_hat.map(|t, x| DVector::from_element(1, x[0] / q(t) + f0(t)));
    Ok(OrderNFilter {
        phi_hat: cs.state.components(0, pb.n()),
        coupled: cs,
        p_hat,
        f_hat,
        alpha_hat,
    })
}

/// Filter returning the estimated right-hand side; identical system to
/// [`solve_functional_filter`].
pub fn solve_rhs_filter<T: Real>(pb: &OrderNProblem<T>, y: &ObsData<T>) -> Result<OrderNFilter<T>> {
    solve_functional_filter(pb, y)
}

/// Minimax estimator of `l(F) = int l0 f + (l, alpha)`.
pub fn solve_rhs_estimator<T: Real>(
    pb: &OrderNProblem<T>,
    l0: &ScalarFn<T>,
    lvec: &DVector<T>,
) -> Result<OrderNEstimate<T>> {
    let m = pb.spec.m();
    if lvec.len() != m {
        return Err(Error::ArityMismatch {
            expected: m,
            got: lvec.len(),
        });
    }
    let q = pb.weights.q.clone();
    let q1l = &pb.q1_inv * lvec;
    let psi_rhs = DVector::from_iterator(
        pb.nulls.adjoint.len(),
        (0..pb.nulls.adjoint.len()).map(|i| {
            let psi = pb.psi_fn(i);
            -pb.integrate(|t| l0(t) * psi(t) / q(t)) - q1l.dot(&pb.splus_psi(i))
        }),
    );
    let src = Sources {
        adjoint_source: const_scalar(T::zero()),
        primal_source: {
            let (l0, q) = (l0.clone(), q.clone());
            Arc::new(move |t| l0(t) / q(t))
        },
        forms_rhs: q1l.clone(),
        psi_rhs,
        windowed: false,
    };
    let cs = solve_coupled(pb, &src)?;
    let z = cs.adjoint(&pb.spec);
    let (wa, wb) = cs.w_ends();
    let shifted = pb.structure.conjugate_at(&wa, &wb) + lvec;
    let f0 = pb.nominal.f0.clone();
    let c_hat = z.integrate(|t, x| (l0(t) + x[0]) * f0(t)) + shifted.dot(&pb.nominal.alpha0);
    let sigma_sq =
        z.integrate(|t, x| l0(t) * (l0(t) + x[0]) / q(t)) + lvec.dot(&(&pb.q1_inv * &shifted));
    let u_hat = pb.obs.weight(&observed_primal(pb, &cs))?;
    let cost = z.integrate(|t, x| (l0(t) + x[0]).powi(2) / q(t))
        + (&pb.q1_inv * &shifted).dot(&shifted)
        + pb.obs.noise_energy(&u_hat, &pb.grid)?;
    finish(
        pb,
        cs,
        u_hat,
        c_hat,
        sigma_sq,
        cost,
        Some(l0),
        Some(lvec),
        const_scalar(T::zero()),
    )
}

/// Observation of a known function through the problem's operator.
pub fn observe<T: Real>(pb: &OrderNProblem<T>, phi: ScalarFn<T>) -> ObsData<T> {
    pb.obs.apply(phi, &pb.grid)
}

/// `int_lo^hi` helper exposed for callers pairing window data themselves.
pub fn window_pairing<T: Real>(pb: &OrderNProblem<T>, lo: T, hi: T, f: impl FnMut(T) -> T) -> T {
    window_integral(&pb.grid, lo, hi, f)
}
