//! Saturating and random admissible perturbations, direct simulation of the
//! true quantity, and Monte Carlo measurement of the estimation error.
//!
//! Everything works on the solver's own grid. Forcings are evaluated piece by
//! piece so that a jump of the adjoint state at a breakpoint never leaks into
//! the Runge-Kutta stages of the neighbouring interval.

use std::sync::Arc;

use minimax_core::bvp::{ConditionBlock, Endpoint, MultipointProblem};
use minimax_core::continuous::estimate_from_samples;
use minimax_core::grid::Grid;
use minimax_core::linalg::{hcat, spd_inverse, vjoin};
use minimax_core::ordern::{observe, solvability_residual, ObsData, ObsOperator};
use minimax_core::point::point_estimate;
use minimax_core::trajectory::{PiecewiseTrajectory, Side};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Mode;
use crate::error::{HResult, HarnessError};
use crate::scenario::{FirstOrderObs, Scenario, Solution};

/// Function of `(interval index, t)` on the solver grid.
pub type PieceFn = Arc<dyn Fn(usize, f64) -> DVector<f64> + Send + Sync>;

/// Right-hand side of the model: the forcing and the boundary data
/// (`(f0, f1)` stacked for first-order modes, the form values for order-n
/// modes, empty for the eliminated second-order model).
#[derive(Clone)]
pub struct Forcing {
    pub f: PieceFn,
    pub data: DVector<f64>,
}

/// Element of the observation space sampled on the solver grid.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsVec {
    Traj(PiecewiseTrajectory),
    Points(Vec<DVector<f64>>),
    Samples(DVector<f64>),
}

impl ObsVec {
    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &ObsVec) -> ObsVec {
        match (self, other) {
            (ObsVec::Traj(a), ObsVec::Traj(b)) => {
                let grid = a.grid().clone();
                let values = (0..grid.intervals())
                    .map(|k| {
                        a.piece(k)
                            .iter()
                            .zip(b.piece(k))
                            .map(|(x, y)| x + y * c)
                            .collect()
                    })
                    .collect();
                ObsVec::Traj(PiecewiseTrajectory::new(grid, values).expect("same grid"))
            }
            (ObsVec::Points(a), ObsVec::Points(b)) => {
                ObsVec::Points(a.iter().zip(b).map(|(x, y)| x + y * c).collect())
            }
            (ObsVec::Samples(a), ObsVec::Samples(b)) => ObsVec::Samples(a + b * c),
            _ => panic!("observation elements of different kinds"),
        }
    }

    pub fn scaled(&self, c: f64) -> ObsVec {
        self.add_scaled(c - 1.0, self)
    }
}

/// True value of the estimated quantity and the noise-free observation.
#[derive(Debug, Clone)]
pub struct Realization {
    pub target: f64,
    pub y: ObsVec,
}

/// Saturating element, or the nominal / zero element when the direction
/// degenerates.
#[derive(Clone)]
pub enum WorstCase<T> {
    Saturating { value: T, norm: f64 },
    Degenerate { fallback: T },
}

impl<T> WorstCase<T> {
    /// The saturating value, or `DegenerateDirection`.
    pub fn strict(self) -> HResult<T> {
        match self {
            WorstCase::Saturating { value, .. } => Ok(value),
            WorstCase::Degenerate { .. } => Err(minimax_core::Error::DegenerateDirection.into()),
        }
    }

    pub fn value(&self) -> &T {
        match self {
            WorstCase::Saturating { value, .. } => value,
            WorstCase::Degenerate { fallback } => fallback,
        }
    }
}

/// Evaluates a trajectory inside interval `k`, taking the one-sided limit
/// that belongs to that interval at its end points.
fn piece_value(traj: &PiecewiseTrajectory, k: usize, t: f64) -> DVector<f64> {
    let nodes = traj.grid().nodes(k);
    let side = if (t - nodes[0]).abs() < (t - nodes[nodes.len() - 1]).abs() {
        Side::Right
    } else {
        Side::Left
    };
    traj.at(t, side).expect("time inside the grid")
}

fn piece_fn(traj: &PiecewiseTrajectory) -> Arc<PiecewiseTrajectory> {
    Arc::new(traj.clone())
}

fn sample(grid: &Grid, f: &PieceFn) -> PiecewiseTrajectory {
    PiecewiseTrajectory::sample(grid, |k, t| f(k, t))
}

fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone()
        .pseudo_inverse(1e-13 * m.amax().max(f64::MIN_POSITIVE))
        .expect("non-negative tolerance")
}

const BASIS: usize = 6;

fn cosine_basis(t0: f64, t1: f64, j: usize, t: f64) -> f64 {
    (j as f64 * std::f64::consts::PI * (t - t0) / (t1 - t0)).cos()
}

fn random_coeffs(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

/// Smooth random function `sum_j c_j cos(j pi (t - t0) / (t1 - t0))` with
/// vector coefficients of length `dim`.
fn random_smooth(
    rng: &mut ChaCha8Rng,
    dim: usize,
    t0: f64,
    t1: f64,
) -> Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync> {
    let c = random_coeffs(rng, dim * BASIS);
    Arc::new(move |t| {
        let mut v = DVector::zeros(dim);
        for j in 0..BASIS {
            v += c.rows(j * dim, dim) * cosine_basis(t0, t1, j, t);
        }
        v
    })
}

/// A solved scenario together with everything needed to simulate it.
pub struct Experiment<'a> {
    pub scenario: &'a Scenario,
    pub solution: &'a Solution,
    grid: Grid,
    sigma_sq: f64,
    /// Maps coefficients of random order-n perturbations to the residuals of
    /// the solvability conditions; empty when the problem is always solvable.
    solvability: Option<DMatrix<f64>>,
}

impl<'a> Experiment<'a> {
    pub fn new(scenario: &'a Scenario, solution: &'a Solution) -> HResult<Self> {
        let grid = match solution {
            Solution::Continuous(s) => s.grid().clone(),
            Solution::Constrained(s) => s.base.grid().clone(),
            Solution::Point(s) => s.state.grid().clone(),
            Solution::Elimination(s) => s.state.grid().clone(),
            Solution::OrderN(_) => match scenario {
                Scenario::OrderN(o) => o.pb.grid.clone(),
                _ => {
                    return Err(HarnessError::Unsupported(
                        "mismatched scenario and solution".into(),
                    ))
                }
            },
        };
        let sigma_sq = scenario.summary(solution)?.sigma_sq;
        let mut exp = Experiment {
            scenario,
            solution,
            grid,
            sigma_sq,
            solvability: None,
        };
        exp.solvability = exp.solvability_matrix()?;
        Ok(exp)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    fn span(&self) -> (f64, f64) {
        (self.grid.start(), self.grid.end())
    }

    /// Centre of the uncertainty set.
    pub fn nominal(&self) -> Forcing {
        match self.scenario {
            Scenario::FirstOrder(f) => {
                let fnom = f.g.f_nom.clone();
                Forcing {
                    f: Arc::new(move |_, t| fnom(t)),
                    data: vjoin(&f.g.f0_nom, &f.g.f1_nom),
                }
            }
            Scenario::Elimination(e) => {
                let r = e.q.nrows();
                Forcing {
                    f: Arc::new(move |_, _| DVector::zeros(r)),
                    data: DVector::zeros(0),
                }
            }
            Scenario::OrderN(o) => {
                let f0 = o.pb.nominal.f0.clone();
                Forcing {
                    f: Arc::new(move |_, t| DVector::from_element(1, f0(t))),
                    data: o.pb.nominal.alpha0.clone(),
                }
            }
        }
    }

    /// Value of the quadratic form defining the uncertainty set at `F`.
    pub fn g_form(&self, forcing: &Forcing) -> HResult<f64> {
        let nom = self.nominal();
        let df = |k: usize, t: f64| (forcing.f)(k, t) - (nom.f)(k, t);
        let dd = &forcing.data - &nom.data;
        Ok(match self.scenario {
            Scenario::FirstOrder(f) => {
                let q2_inv = f.g.q2_inv.clone();
                let mut fail = None;
                let integral = self.grid.integrate(|k, _, t| {
                    let d = df(k, t);
                    match spd_inverse(&q2_inv(t)) {
                        Ok(q2) => d.dot(&(q2 * &d)),
                        Err(e) => {
                            fail = Some(e);
                            0.0
                        }
                    }
                });
                if let Some(e) = fail {
                    return Err(e.into());
                }
                if f.mode == Mode::Constrained {
                    integral
                } else {
                    let m = f.spec.m;
                    let (d0, d1) = (dd.rows(0, m), dd.rows(m, f.spec.n - m));
                    d0.dot(&(pinv(&f.g.q0_inv) * d0)) + d1.dot(&(pinv(&f.g.q1_inv) * d1)) + integral
                }
            }
            Scenario::Elimination(e) => self.grid.integrate(|k, _, t| {
                let d = df(k, t);
                d.dot(&(&e.q * &d))
            }),
            Scenario::OrderN(o) => {
                let q = o.pb.weights.q.clone();
                self.grid.integrate(|k, _, t| q(t) * df(k, t)[0].powi(2))
                    + dd.dot(&(&o.pb.weights.q1 * &dd))
            }
        })
    }

    /// Forcing on the boundary of the uncertainty set at which the
    /// Cauchy-Bunyakovsky bound on the deterministic error is attained.
    pub fn worst_case_f(&self) -> HResult<WorstCase<Forcing>> {
        let nominal = self.nominal();
        let (direction, data, d_sq): (PieceFn, DVector<f64>, f64) =
            match (self.scenario, self.solution) {
                (Scenario::FirstOrder(f), Solution::Continuous(_) | Solution::Point(_)) => {
                    let z = match self.solution {
                        Solution::Continuous(s) => s.z(),
                        Solution::Point(s) => s.z(),
                        _ => unreachable!(),
                    };
                    let b0 = &f.alg.b0_bar * z.start();
                    let b1 = &f.alg.b1_bar * z.end();
                    let d0 = &f.g.q0_inv * &b0;
                    let d1 = -(&f.g.q1_inv * &b1);
                    let q2_inv = f.g.q2_inv.clone();
                    let zi = z.integrate(|t, x| x.dot(&(q2_inv(t) * x)));
                    let z = piece_fn(&z);
                    (
                        Arc::new(move |k, t| q2_inv(t) * piece_value(&z, k, t)),
                        vjoin(&d0, &d1),
                        b0.dot(&d0) - b1.dot(&d1) + zi,
                    )
                }
                (Scenario::FirstOrder(f), Solution::Constrained(s)) => {
                    let z = s.base.z();
                    let q2_inv = f.g.q2_inv.clone();
                    let zi = z.integrate(|t, x| x.dot(&(q2_inv(t) * x)));
                    let z = piece_fn(&z);
                    (
                        Arc::new(move |k, t| q2_inv(t) * piece_value(&z, k, t)),
                        DVector::zeros(f.spec.n),
                        zi,
                    )
                }
                (Scenario::Elimination(e), Solution::Elimination(s)) => {
                    let d = s.dim;
                    let z = s.state.components(0, d);
                    let q1 = e.elim.q1.clone();
                    let zi = z.integrate(|t, x| x.dot(&(q1(t) * x)));
                    let q_inv = spd_inverse(&e.q)?;
                    let b1 = e.elim.b1.clone();
                    let z = piece_fn(&z);
                    (
                        Arc::new(move |k, t| &q_inv * b1(t).transpose() * piece_value(&z, k, t)),
                        DVector::zeros(0),
                        zi,
                    )
                }
                (Scenario::OrderN(o), Solution::OrderN(s)) => {
                    let n = o.pb.spec.n;
                    let z = s.z(&o.pb);
                    let w = &s.coupled.state;
                    let mut gv = o.pb.structure.conjugate_at(
                        &w.start().rows(n, n).into_owned(),
                        &w.end().rows(n, n).into_owned(),
                    );
                    let rhs = o.mode == Mode::OrdernRhs;
                    if rhs {
                        gv += &o.lvec;
                    }
                    let l0 = o.l0.clone();
                    let g = {
                        let l0 = l0.clone();
                        move |t: f64, zt: f64| if rhs { l0(t) + zt } else { zt }
                    };
                    let q = o.pb.weights.q.clone();
                    let zi = z.integrate(|t, x| g(t, x[0]).powi(2) / q(t));
                    let dalpha = o.pb.q1_inv() * &gv;
                    let z = piece_fn(&z);
                    (
                        Arc::new(move |k, t| {
                            DVector::from_element(1, g(t, piece_value(&z, k, t)[0]) / q(t))
                        }),
                        dalpha.clone(),
                        zi + gv.dot(&dalpha),
                    )
                }
                _ => {
                    return Err(HarnessError::Unsupported(
                        "mismatched scenario and solution".into(),
                    ))
                }
            };
        let norm = d_sq.max(0.0).sqrt();
        if !(norm > 1e-14 * self.sigma_sq.sqrt().max(1.0)) {
            return Ok(WorstCase::Degenerate { fallback: nominal });
        }
        let base = nominal.f.clone();
        let value = Forcing {
            f: Arc::new(move |k, t| base(k, t) + direction(k, t) / norm),
            data: if matches!(self.solution, Solution::Constrained(_)) {
                nominal.data.clone()
            } else {
                &nominal.data + data / norm
            },
        };
        Ok(WorstCase::Saturating { value, norm })
    }

    /// Optimal weights as an element of the observation space.
    pub fn u_hat(&self) -> ObsVec {
        match self.solution {
            Solution::Continuous(s) => ObsVec::Traj(s.u_hat.clone()),
            Solution::Constrained(s) => ObsVec::Traj(s.base.u_hat.clone()),
            Solution::Point(s) => ObsVec::Points(s.u_hat.clone()),
            Solution::Elimination(s) => ObsVec::Traj(s.u_hat.clone()),
            Solution::OrderN(s) => match &s.u_hat {
                ObsData::Function(u) => {
                    ObsVec::Traj(PiecewiseTrajectory::sample(&self.grid, |_, t| u(t)))
                }
                ObsData::Samples(v) => ObsVec::Samples(v.clone()),
            },
        }
    }

    /// Inner product of the observation space, matching the quadrature the
    /// estimator itself uses.
    pub fn pairing(&self, a: &ObsVec, b: &ObsVec) -> HResult<f64> {
        Ok(match (self.scenario, self.solution, a, b) {
            (
                _,
                Solution::Continuous(_) | Solution::Constrained(_),
                ObsVec::Traj(x),
                ObsVec::Traj(y),
            ) => {
                let window = match self.solution {
                    Solution::Continuous(s) => s.window.clone(),
                    Solution::Constrained(s) => s.base.window.clone(),
                    _ => unreachable!(),
                };
                self.grid
                    .integrate_over(window, |k, j, _| x.node(k, j).dot(y.node(k, j)))
            }
            (_, Solution::Point(_), ObsVec::Points(x), ObsVec::Points(y)) => {
                x.iter().zip(y).map(|(p, q)| p.dot(q)).sum()
            }
            (_, Solution::Elimination(_), ObsVec::Traj(x), ObsVec::Traj(y)) => self
                .grid
                .integrate(|k, j, _| x.node(k, j).dot(y.node(k, j))),
            (Scenario::OrderN(o), _, x, y) => {
                o.pb.obs
                    .inner(&self.obs_data(x)?, &self.obs_data(y)?, &o.pb.grid)?
            }
            _ => {
                return Err(HarnessError::Unsupported(
                    "observation element of the wrong kind".into(),
                ))
            }
        })
    }

    fn obs_data(&self, v: &ObsVec) -> HResult<ObsData<f64>> {
        Ok(match v {
            ObsVec::Traj(x) => {
                let x = Arc::new(x.clone());
                ObsData::Function(Arc::new(move |t| {
                    x.at(t, Side::Left).expect("time inside the grid")
                }))
            }
            ObsVec::Samples(v) => ObsData::Samples(v.clone()),
            ObsVec::Points(_) => {
                return Err(HarnessError::Unsupported(
                    "point data in an order-n problem".into(),
                ))
            }
        })
    }

    /// Multiplies an observation element pointwise by the noise weight `Q`
    /// (`inverse = false`) or by `Q^{-1}`.
    pub fn apply_noise_weight(&self, v: &ObsVec, inverse: bool) -> HResult<ObsVec> {
        let inv = |m: DMatrix<f64>| {
            if inverse {
                spd_inverse(&m).expect("validated noise weight")
            } else {
                m
            }
        };
        Ok(match (self.scenario, v) {
            (Scenario::FirstOrder(f), ObsVec::Traj(x)) => match &f.obs {
                FirstOrderObs::Window(w) => ObsVec::Traj(x.map(|t, v| inv((w.q)(t)) * v)),
                FirstOrderObs::Points(_) => {
                    return Err(HarnessError::Unsupported(
                        "window data in point mode".into(),
                    ))
                }
            },
            (Scenario::FirstOrder(f), ObsVec::Points(x)) => match &f.obs {
                FirstOrderObs::Points(p) => ObsVec::Points(
                    p.weights
                        .iter()
                        .zip(x)
                        .map(|(q, v)| inv(q.clone()) * v)
                        .collect(),
                ),
                FirstOrderObs::Window(_) => {
                    return Err(HarnessError::Unsupported(
                        "point data in window mode".into(),
                    ))
                }
            },
            (Scenario::Elimination(e), ObsVec::Traj(x)) => ObsVec::Traj(x.map(|t, v| {
                let q = (e.q1)(t).powi(2);
                v * if inverse { 1.0 / q } else { q }
            })),
            (Scenario::OrderN(o), ObsVec::Traj(x)) => match &o.pb.obs {
                ObsOperator::Window(w) => ObsVec::Traj(x.map(|t, v| inv((w.q0)(t)) * v)),
                ObsOperator::Kernel(_) => {
                    return Err(HarnessError::Unsupported(
                        "function data for kernel observations".into(),
                    ))
                }
            },
            (Scenario::OrderN(o), ObsVec::Samples(x)) => match &o.pb.obs {
                ObsOperator::Kernel(k) => {
                    let nc = k.channels();
                    let mut out = x.clone();
                    for (i, q) in k.q0.iter().enumerate() {
                        out.rows_mut(i * nc, nc)
                            .copy_from(&(inv(q.clone()) * x.rows(i * nc, nc)));
                    }
                    ObsVec::Samples(out)
                }
                ObsOperator::Window(_) => {
                    return Err(HarnessError::Unsupported(
                        "kernel samples for window observations".into(),
                    ))
                }
            },
            _ => {
                return Err(HarnessError::Unsupported(
                    "observation element of the wrong kind".into(),
                ))
            }
        })
    }

    /// Value of the noise constraint functional `(Q xi, xi)` at `xi`.
    pub fn noise_form(&self, xi: &ObsVec) -> HResult<f64> {
        self.pairing(xi, &self.apply_noise_weight(xi, false)?)
    }

    /// `Q^{-1} u_hat / nu` with `nu^2 = (Q^{-1} u_hat, u_hat)`; multiplied by
    /// a random sign it saturates the noise bound.
    pub fn worst_case_noise(&self) -> HResult<WorstCase<ObsVec>> {
        let u = self.u_hat();
        let shape = self.apply_noise_weight(&u, true)?;
        let nu = self.pairing(&u, &shape)?.max(0.0).sqrt();
        if !(nu > 1e-14 * self.sigma_sq.sqrt().max(1.0)) {
            return Ok(WorstCase::Degenerate {
                fallback: u.scaled(0.0),
            });
        }
        Ok(WorstCase::Saturating {
            value: shape.scaled(1.0 / nu),
            norm: nu,
        })
    }

    /// Estimate computed by the core from data `y`.
    pub fn estimate(&self, y: &ObsVec) -> HResult<f64> {
        Ok(match (self.scenario, self.solution, y) {
            (_, Solution::Continuous(s), ObsVec::Traj(y)) => estimate_from_samples(s, y)?,
            (_, Solution::Constrained(s), ObsVec::Traj(y)) => estimate_from_samples(&s.base, y)?,
            (_, Solution::Point(s), ObsVec::Points(y)) => point_estimate(s, y)?,
            (_, Solution::Elimination(s), ObsVec::Traj(y)) => {
                let y = Arc::new(y.clone());
                let y: minimax_core::func::VecFn =
                    Arc::new(move |t| y.at(t, Side::Left).expect("time inside the grid"));
                s.estimate(&y)
            }
            (Scenario::OrderN(o), Solution::OrderN(s), y) => {
                s.estimate(&o.pb, &self.obs_data(y)?)?
            }
            _ => {
                return Err(HarnessError::Unsupported(
                    "observation element of the wrong kind".into(),
                ))
            }
        })
    }

    /// Solves the model for `F` on the solver grid and returns the true
    /// quantity with its noise-free observation.
    pub fn truth(&self, forcing: &Forcing) -> HResult<Realization> {
        match self.scenario {
            Scenario::FirstOrder(f) => {
                let (n, m) = (f.spec.n, f.spec.m);
                let mut prob =
                    MultipointProblem::new(self.grid.clone(), n, 0, f.spec.primal_drift());
                for k in 0..self.grid.intervals() {
                    let ff = forcing.f.clone();
                    prob.set_forcing(k, Arc::new(move |t| ff(k, t)));
                }
                prob.left_rows(f.spec.b0.clone(), forcing.data.rows(0, m).into_owned());
                prob.right_rows(f.spec.b1.clone(), forcing.data.rows(m, n - m).into_owned());
                let phi = prob.solve()?.trajectory;
                let target = f.target.a.dot(&phi.at(f.target.s, Side::Left)?);
                let y = match &f.obs {
                    FirstOrderObs::Window(w) => ObsVec::Traj(phi.map(|t, v| (w.h)(t) * v)),
                    FirstOrderObs::Points(p) => ObsVec::Points(
                        p.times
                            .iter()
                            .map(|&t| phi.at(t, Side::Left))
                            .collect::<Result<_, _>>()?,
                    ),
                };
                Ok(Realization { target, y })
            }
            Scenario::Elimination(e) => {
                let n = e.a1.len();
                let mut prob =
                    MultipointProblem::new(self.grid.clone(), 2 * n, 0, e.elim.a1.clone());
                for k in 0..self.grid.intervals() {
                    let (ff, b1) = (forcing.f.clone(), e.elim.b1.clone());
                    prob.set_forcing(k, Arc::new(move |t| b1(t) * ff(k, t)));
                }
                let (id, zero) = (DMatrix::identity(n, n), DMatrix::zeros(n, n));
                prob.left_rows(hcat(&zero, &id), DVector::zeros(n));
                prob.right_rows(hcat(&id, &zero), DVector::zeros(n));
                let x = prob.solve()?.trajectory;
                let target = e.target.dot(&x.at(e.s, Side::Left)?);
                Ok(Realization {
                    target,
                    y: ObsVec::Traj(x.map(|t, v| (e.elim.h)(t) * v)),
                })
            }
            Scenario::OrderN(o) => {
                let spec = &o.pb.spec;
                let n = spec.n;
                let mut prob = MultipointProblem::new(self.grid.clone(), n, 0, spec.companion_fn());
                let last = self.grid.intervals() - 1;
                for k in 0..=last {
                    let (ff, sp) = (forcing.f.clone(), spec.clone());
                    prob.set_forcing(
                        k,
                        Arc::new(move |t| {
                            let mut v = DVector::zeros(n);
                            v[n - 1] = ff(k, t)[0] / sp.leading(t);
                            v
                        }),
                    );
                }
                prob.add_condition(
                    ConditionBlock::new(forcing.data.clone())
                        .point(0, Endpoint::Start, spec.forms.columns(0, n).into_owned())
                        .point(last, Endpoint::End, spec.forms.columns(n, n).into_owned()),
                );
                // Pin the component along the homogeneous solutions; the
                // estimation error does not depend on it.
                for basis in &o.pb.nulls.primal {
                    let basis = piece_fn(basis);
                    let mut block = ConditionBlock::new(DVector::zeros(1));
                    for k in 0..=last {
                        let b = basis.clone();
                        block = block.integral(
                            k,
                            Arc::new(move |t| {
                                let mut row = DMatrix::zeros(1, n);
                                row[(0, 0)] = piece_value(&b, k, t)[0];
                                row
                            }),
                        );
                    }
                    prob.add_condition(block);
                }
                let phi = prob.solve()?.trajectory.components(0, 1);
                let target = match o.mode {
                    Mode::OrdernRhs => {
                        self.grid
                            .integrate(|k, _, t| (o.l0)(t) * (forcing.f)(k, t)[0])
                            + o.lvec.dot(&forcing.data)
                    }
                    _ => phi.integrate(|t, x| (o.l0)(t) * x[0]),
                };
                let y = match &o.pb.obs {
                    ObsOperator::Window(w) => ObsVec::Traj(phi.map(|t, v| (w.h)(t) * v[0])),
                    ObsOperator::Kernel(_) => {
                        let phi = Arc::new(phi);
                        match observe(
                            &o.pb,
                            Arc::new(move |t| {
                                phi.at(t, Side::Left).expect("time inside the grid")[0]
                            }),
                        ) {
                            ObsData::Samples(v) => ObsVec::Samples(v),
                            ObsData::Function(_) => unreachable!("kernel observations are sampled"),
                        }
                    }
                };
                Ok(Realization { target, y })
            }
        }
    }

    /// Residual map of the order-n solvability conditions on the random
    /// perturbation coefficients `(c_0..c_{K-1}, alpha)`.
    fn solvability_matrix(&self) -> HResult<Option<DMatrix<f64>>> {
        let Scenario::OrderN(o) = self.scenario else {
            return Ok(None);
        };
        let k = o.pb.nulls.adjoint.len();
        if k == 0 {
            return Ok(None);
        }
        let m = o.pb.spec.m();
        let (t0, t1) = self.span();
        let q1_inv = o.pb.q1_inv().clone();
        let mut r = DMatrix::zeros(k, BASIS + m);
        for j in 0..BASIS + m {
            let (f, alpha): (minimax_core::func::ScalarFn, DVector<f64>) = if j < BASIS {
                let q = o.pb.weights.q.clone();
                (
                    Arc::new(move |t| cosine_basis(t0, t1, j, t) / q(t)),
                    DVector::zeros(m),
                )
            } else {
                (
                    minimax_core::func::const_scalar(0.0),
                    q1_inv.column(j - BASIS).into_owned(),
                )
            };
            r.set_column(
                j,
                &solvability_residual(&o.pb.spec, &o.pb.structure, &o.pb.nulls, &f, &alpha)?,
            );
        }
        Ok(Some(r))
    }

    /// Random forcing strictly inside the uncertainty set.
    pub fn random_forcing(&self, rng: &mut ChaCha8Rng) -> HResult<Forcing> {
        let nominal = self.nominal();
        let (t0, t1) = self.span();
        let (dir, data): (PieceFn, DVector<f64>) = match self.scenario {
            Scenario::FirstOrder(f) => {
                let (n, m) = (f.spec.n, f.spec.m);
                let gamma = random_smooth(rng, n, t0, t1);
                let q2_inv = f.g.q2_inv.clone();
                let data = if f.mode == Mode::Constrained {
                    // Boundary data are unrestricted here.
                    random_coeffs(rng, n) * 2.0
                } else {
                    vjoin(
                        &(&f.g.q0_inv * random_coeffs(rng, m)),
                        &(&f.g.q1_inv * random_coeffs(rng, n - m)),
                    )
                };
                (Arc::new(move |_, t| q2_inv(t) * gamma(t)), data)
            }
            Scenario::Elimination(e) => {
                let gamma = random_smooth(rng, e.q.nrows(), t0, t1);
                let q_inv = spd_inverse(&e.q)?;
                (Arc::new(move |_, t| &q_inv * gamma(t)), DVector::zeros(0))
            }
            Scenario::OrderN(o) => {
                let m = o.pb.spec.m();
                let mut c = random_coeffs(rng, BASIS + m);
                if let Some(r) = &self.solvability {
                    c -= pinv(r) * (r * &c);
                }
                let q = o.pb.weights.q.clone();
                let cf = c.rows(0, BASIS).into_owned();
                (
                    Arc::new(move |_, t| {
                        let g: f64 = (0..BASIS).map(|j| cf[j] * cosine_basis(t0, t1, j, t)).sum();
                        DVector::from_element(1, g / q(t))
                    }),
                    o.pb.q1_inv() * c.rows(BASIS, m),
                )
            }
        };
        let unit = Forcing {
            f: {
                let base = nominal.f.clone();
                let dir = dir.clone();
                Arc::new(move |k, t| base(k, t) + dir(k, t))
            },
            data: if matches!(self.solution, Solution::Constrained(_)) {
                data.clone()
            } else {
                &nominal.data + &data
            },
        };
        let form = self.g_form(&unit)?;
        let radius: f64 = rng.random_range(0.0..1.0);
        let scale = if form > 0.0 {
            radius / form.sqrt()
        } else {
            0.0
        };
        let base = nominal.f.clone();
        Ok(Forcing {
            f: Arc::new(move |k, t| base(k, t) + dir(k, t) * scale),
            data: if matches!(self.solution, Solution::Constrained(_)) {
                data
            } else {
                &nominal.data + data * scale
            },
        })
    }

    /// Random noise realization shape with `(Q xi, xi) < 1`.
    pub fn random_noise(&self, rng: &mut ChaCha8Rng) -> HResult<ObsVec> {
        let (t0, t1) = self.span();
        let gamma = match self.u_hat() {
            ObsVec::Traj(u) => {
                let g = random_smooth(rng, u.dim(), t0, t1);
                let f: PieceFn = Arc::new(move |_, t| g(t));
                ObsVec::Traj(sample(&self.grid, &f))
            }
            ObsVec::Points(u) => {
                ObsVec::Points(u.iter().map(|v| random_coeffs(rng, v.len())).collect())
            }
            ObsVec::Samples(u) => ObsVec::Samples(random_coeffs(rng, u.len())),
        };
        let xi = self.apply_noise_weight(&gamma, true)?;
        let form = self.noise_form(&xi)?;
        let radius: f64 = rng.random_range(0.0..1.0);
        Ok(xi.scaled(if form > 0.0 {
            radius / form.sqrt()
        } else {
            0.0
        }))
    }
}

/// Empirical mean-square error of the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub samples: usize,
    pub mse: f64,
    pub stderr: f64,
    pub sigma_sq: f64,
    /// Error of the estimate from noise-free data.
    pub deterministic: f64,
    /// Mean of the noise constraint functional over the samples.
    pub noise_form: f64,
}

impl McReport {
    pub fn lower(&self) -> f64 {
        self.mse - 3.0 * self.stderr
    }

    pub fn upper(&self) -> f64 {
        self.mse + 3.0 * self.stderr
    }
}

/// Relative slack for quadrature error when comparing an empirical MSE with
/// `sigma^2`.
pub const DISCRETIZATION_SLACK: f64 = 1e-8;

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

fn stats(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mean = sq.iter().sum::<f64>() / n;
    let var = if errors.len() > 1 {
        sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

/// Simulates the model for `F`, adds `eta * xi` with a fair random sign
/// `eta` per sample and averages the squared estimation error. Sample `i`
/// draws from stream `i` of a generator seeded with `seed`.
pub fn monte_carlo_error(
    exp: &Experiment,
    forcing: &Forcing,
    xi: Option<&ObsVec>,
    samples: usize,
    seed: u64,
) -> HResult<McReport> {
    let truth = exp.truth(forcing)?;
    let deterministic = truth.target - exp.estimate(&truth.y)?;
    let noise_form = match xi {
        Some(x) => exp.noise_form(x)?,
        None => 0.0,
    };
    let errors = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let y = match xi {
                Some(x) => truth.y.add_scaled(sign(&mut rng), x),
                None => truth.y.clone(),
            };
            Ok(truth.target - exp.estimate(&y)?)
        })
        .collect::<HResult<Vec<f64>>>()?;
    let (mse, stderr) = stats(&errors);
    Ok(McReport {
        samples,
        mse,
        stderr,
        sigma_sq: exp.sigma_sq(),
        deterministic,
        noise_form,
    })
}

/// Outcome of the saturation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub mc: McReport,
    /// G-form value of the saturating forcing.
    pub g_form: f64,
    /// `|e_det|` for the saturating forcing and `d` from the cost split.
    pub deterministic_gap: f64,
    pub degenerate: bool,
}

impl SaturationReport {
    pub fn within_band(&self) -> bool {
        (self.mc.mse - self.mc.sigma_sq).abs()
            <= 3.0 * self.mc.stderr + DISCRETIZATION_SLACK * self.mc.sigma_sq.max(1e-300)
    }

    pub fn reaches(&self, fraction: f64) -> bool {
        self.mc.mse >= fraction * self.mc.sigma_sq
    }
}

pub fn saturation(exp: &Experiment, samples: usize, seed: u64) -> HResult<SaturationReport> {
    let f = exp.worst_case_f()?;
    let xi = exp.worst_case_noise()?;
    let degenerate =
        matches!(f, WorstCase::Degenerate { .. }) || matches!(xi, WorstCase::Degenerate { .. });
    let g_form = exp.g_form(f.value())?;
    let noise = match &xi {
        WorstCase::Saturating { value, .. } => Some(value),
        WorstCase::Degenerate { .. } => None,
    };
    let mc = monte_carlo_error(exp, f.value(), noise, samples, seed)?;
    let d = match &f {
        WorstCase::Saturating { norm, .. } => *norm,
        WorstCase::Degenerate { .. } => 0.0,
    };
    Ok(SaturationReport {
        deterministic_gap: (mc.deterministic.abs() - d).abs(),
        mc,
        g_form,
        degenerate,
    })
}

/// Result of the random admissible draws.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeReport {
    pub draws: Vec<McReport>,
    /// Largest `mse - sigma^2 - 3 stderr` over the draws.
    pub worst_excess: f64,
    pub largest_g_form: f64,
    pub largest_noise_form: f64,
}

impl GuaranteeReport {
    pub fn passed(&self, sigma_sq: f64) -> bool {
        self.worst_excess <= DISCRETIZATION_SLACK * sigma_sq.max(1e-300)
            && self.largest_g_form <= 1.0
            && self.largest_noise_form <= 1.0
    }
}

const DRAW_DOMAIN: u64 = 0x5eed_d1a3_0000_0001;

/// `draws` random admissible pairs, each measured with `per_draw` noise
/// signs. Draw `i` uses stream `i` of a generator keyed by the seed.
pub fn random_admissible(
    exp: &Experiment,
    draws: usize,
    per_draw: usize,
    seed: u64,
) -> HResult<GuaranteeReport> {
    let results = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DRAW_DOMAIN);
            rng.set_stream(i as u64);
            let forcing = exp.random_forcing(&mut rng)?;
            let xi = exp.random_noise(&mut rng)?;
            let g = exp.g_form(&forcing)?;
            let truth = exp.truth(&forcing)?;
            let deterministic = truth.target - exp.estimate(&truth.y)?;
            let errors = (0..per_draw)
                .map(|_| Ok(truth.target - exp.estimate(&truth.y.add_scaled(sign(&mut rng), &xi))?))
                .collect::<HResult<Vec<f64>>>()?;
            let (mse, stderr) = stats(&errors);
            Ok((
                McReport {
                    samples: per_draw,
                    mse,
                    stderr,
                    sigma_sq: exp.sigma_sq(),
                    deterministic,
                    noise_form: exp.noise_form(&xi)?,
                },
                g,
            ))
        })
        .collect::<HResult<Vec<_>>>()?;
    let sigma_sq = exp.sigma_sq();
    let worst_excess = results
        .iter()
        .map(|(r, _)| r.mse - sigma_sq - 3.0 * r.stderr)
        .fold(f64::NEG_INFINITY, f64::max);
    let largest_g_form = results.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let largest_noise_form = results
        .iter()
        .map(|(r, _)| r.noise_form)
        .fold(0.0, f64::max);
    Ok(GuaranteeReport {
        draws: results.into_iter().map(|(r, _)| r).collect(),
        worst_excess,
        largest_g_form,
        largest_noise_form,
    })
}
