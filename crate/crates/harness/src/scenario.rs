//! Turning a [`ProblemConfig`] into core objects, solving it, and describing
//! the same problem to the oracle.

use std::sync::Arc;

use minimax_core::boundary::{
    build_boundary_algebra, check_unique_solvability, BoundaryAlgebra, BvpSpec,
};
use minimax_core::constrained::{
    solve_constrained_estimator, solve_constrained_filter, ConstrainedSolution,
};
use minimax_core::continuous::{
    evaluate_cost, solve_estimator, solve_filter, EllipsoidG, FunctionalTarget,
    IntervalObservation, MinimaxSolution,
};
use minimax_core::func::{const_mat, mat_fn, vec_fn, MatFn, Poly, ScalarFn};
use minimax_core::linalg::{block2, hcat, spd_inverse, vcat};
use minimax_core::ordern::{
    solve_functional_estimator, solve_functional_filter, solve_rhs_estimator, solve_rhs_filter,
    Coefficient, Kernel, KernelObservation, Nominal, ObsData, ObsOperator, OrderNEstimate,
    OrderNProblem, OrderNSpec, RhsWeights, WindowObservation,
};
use minimax_core::point::{
    evaluate_point_cost, solve_point_estimator, solve_point_filter, PointMinimaxSolution,
    PointObservationSet,
};
use minimax_core::riccati::{
    eliminate, elimination_target, riccati_sweep, solve_elimination_estimator,
    solve_elimination_filter, solve_u_optimal, ElimObservation, ElimSolution, EliminatedSystem,
    WeightVariant,
};
use minimax_core::trajectory::{PiecewiseTrajectory, Side};
use nalgebra::{DMatrix, DVector};

use crate::config::{
    matrix, Mode, ObservationConfig, OrderNObservationConfig, ProblemConfig, ScalarSpec,
    VariantConfig,
};
use crate::error::{HResult, HarnessError};
use crate::oracle::{AlphaPrior, OracleObservation, OracleProblem, OracleTarget};
use crate::worst::ObsVec;

/// First-order problem `phi' + A phi = f` with window or point data.
#[derive(Clone)]
pub struct FirstOrder {
    pub mode: Mode,
    pub spec: BvpSpec,
    pub alg: BoundaryAlgebra,
    pub g: EllipsoidG,
    pub target: FunctionalTarget,
    pub obs: FirstOrderObs,
    pub nodes: usize,
}

#[derive(Clone)]
pub enum FirstOrderObs {
    Window(IntervalObservation),
    Points(PointObservationSet),
}

/// Second-order problem reduced by the Riccati sweep.
#[derive(Clone)]
pub struct Elimination {
    pub a: MatFn,
    pub b: MatFn,
    pub q: DMatrix<f64>,
    pub c: ElimObservation,
    pub q1: ScalarFn,
    pub elim: EliminatedSystem,
    /// Target in the eliminated coordinates.
    pub target: DVector<f64>,
    pub a1: DVector<f64>,
    pub a2: DVector<f64>,
    pub s: f64,
    pub variant: WeightVariant,
    pub u_optimal: bool,
    pub nodes: usize,
}

#[derive(Clone)]
pub struct OrderN {
    pub mode: Mode,
    pub pb: OrderNProblem,
    pub l0: ScalarFn,
    pub lvec: DVector<f64>,
}

#[derive(Clone)]
pub enum Scenario {
    FirstOrder(FirstOrder),
    Elimination(Elimination),
    OrderN(OrderN),
}

pub enum Solution {
    Continuous(MinimaxSolution),
    Constrained(ConstrainedSolution),
    Point(PointMinimaxSolution),
    Elimination(ElimSolution),
    OrderN(OrderNEstimate),
}

/// Scalar diagnostics of a solved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mode: Mode,
    pub sigma: f64,
    pub sigma_sq: f64,
    pub c_hat: f64,
    /// Cost functional evaluated at the optimal weights.
    pub cost: f64,
    /// Variance from the pairing with the adjoint solution.
    pub dual_variance: f64,
    /// Mode-specific constraint residual (zero when not applicable).
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl Summary {
    /// `|sigma^2 - cost|` relative to `max(1, sigma^2)`.
    pub fn cost_gap(&self) -> f64 {
        (self.sigma_sq - self.cost).abs() / self.sigma_sq.max(1.0)
    }

    /// `|sigma^2 - dual|` relative to `max(1, sigma^2)`.
    pub fn dual_gap(&self) -> f64 {
        (self.sigma_sq - self.dual_variance).abs() / self.sigma_sq.max(1.0)
    }
}

fn vector(field: &str, v: &[f64], len: usize) -> HResult<DVector<f64>> {
    if v.len() != len {
        return Err(HarnessError::config(
            field,
            format!("expected {len} entries, got {}", v.len()),
        ));
    }
    Ok(DVector::from_vec(v.to_vec()))
}

fn check_shape(field: &str, m: &MatFn, shape: (usize, usize)) -> HResult<()> {
    let got = m(0.0).shape();
    if got != shape {
        return Err(HarnessError::config(
            field,
            format!("expected {}x{}, got {}x{}", shape.0, shape.1, got.0, got.1),
        ));
    }
    Ok(())
}

fn coefficient(field: &str, s: &ScalarSpec) -> HResult<Coefficient> {
    Ok(match s.as_poly() {
        Some(c) => Coefficient::Poly(Poly::new(c)),
        None => Coefficient::Func(s.build(field)?),
    })
}

fn gaussian(width: f64) -> Kernel {
    Arc::new(move |xi: f64, t: f64| (-(t - xi) * (t - xi) / (2.0 * width * width)).exp())
}

impl Scenario {
    pub fn build(cfg: &ProblemConfig) -> HResult<Self> {
        match cfg.mode {
            Mode::Continuous | Mode::Constrained | Mode::Point => Self::first_order(cfg),
            Mode::Elimination => Self::elimination(cfg),
            Mode::OrdernFunctional | Mode::OrdernRhs => Self::order_n(cfg),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            Scenario::FirstOrder(f) => f.mode,
            Scenario::Elimination(_) => Mode::Elimination,
            Scenario::OrderN(o) => o.mode,
        }
    }

    fn first_order(cfg: &ProblemConfig) -> HResult<Self> {
        let sys = cfg.system.as_ref().expect("checked on load");
        let unc = cfg.uncertainty.as_ref().expect("checked on load");
        let a = sys.a.build("system.a")?;
        let b0 = matrix("system.b0", &sys.b0)?;
        let b1 = matrix("system.b1", &sys.b1)?;
        let n = b0.ncols();
        let m = b0.nrows();
        check_shape("system.a", &a, (n, n))?;
        if b1.shape() != (n - m.min(n), n) {
            return Err(HarnessError::config(
                "system.b1",
                format!("expected {}x{n}", n - m.min(n)),
            ));
        }
        let spec = BvpSpec::homogeneous(sys.horizon, a, b0.clone(), b1.clone())?;
        if !check_unique_solvability(&spec, 256)? {
            return Err(minimax_core::Error::SingularSystem(
                "the boundary value problem is not uniquely solvable".into(),
            )
            .into());
        }
        let alg = build_boundary_algebra(&b0, &b1)?;
        let q2_inv = unc.q2_inv.build("uncertainty.q2_inv")?;
        check_shape("uncertainty.q2_inv", &q2_inv, (n, n))?;
        let q0_inv = matrix("uncertainty.q0_inv", &unc.q0_inv)?;
        let q1_inv = matrix("uncertainty.q1_inv", &unc.q1_inv)?;
        let f_nom = match &unc.f_nom {
            Some(v) if cfg.mode != Mode::Constrained => {
                let f = v.build("uncertainty.f_nom")?;
                if f(0.0).len() != n {
                    return Err(HarnessError::config(
                        "uncertainty.f_nom",
                        format!("expected {n} entries"),
                    ));
                }
                f
            }
            _ => minimax_core::func::zero_vec(n),
        };
        let f0_nom = match &unc.f0_nom {
            Some(v) => vector("uncertainty.f0_nom", v, m)?,
            None => DVector::zeros(m),
        };
        let f1_nom = match &unc.f1_nom {
            Some(v) => vector("uncertainty.f1_nom", v, n - m)?,
            None => DVector::zeros(n - m),
        };
        let g = EllipsoidG::from_inverse_weights(q0_inv, q1_inv, q2_inv, f_nom, f0_nom, f1_nom)
            .map_err(|e| HarnessError::config("uncertainty", e.to_string()))?;
        let tcfg = cfg.target.as_ref().expect("checked on load");
        let target = FunctionalTarget {
            a: vector("target.a", &tcfg.a, n)?,
            s: tcfg.s,
        };
        let obs = match (cfg.mode, cfg.observation.as_ref().expect("checked on load")) {
            (
                Mode::Continuous | Mode::Constrained,
                ObservationConfig::Window { h, q, alpha, beta },
            ) => {
                let h = h.build("observation.h")?;
                let l = h(0.0).nrows();
                check_shape("observation.h", &h, (l, n))?;
                let q = q.build("observation.q")?;
                check_shape("observation.q", &q, (l, l))?;
                FirstOrderObs::Window(IntervalObservation::new(h, q, *alpha, *beta)?)
            }
            (Mode::Point, ObservationConfig::Points { times, weights }) => {
                let w = weights
                    .iter()
                    .enumerate()
                    .map(|(i, rows)| matrix(&format!("observation.weights[{i}]"), rows))
                    .collect::<HResult<Vec<_>>>()?;
                if let Some(i) = w.iter().position(|x| x.shape() != (n, n)) {
                    return Err(HarnessError::config(
                        format!("observation.weights[{i}]"),
                        format!("expected {n}x{n}"),
                    ));
                }
                FirstOrderObs::Points(PointObservationSet::new(times.clone(), w)?)
            }
            (mode, _) => {
                return Err(HarnessError::config(
                    "observation.kind",
                    format!(
                        "{} mode needs {} observations",
                        mode.name(),
                        if mode == Mode::Point {
                            "points"
                        } else {
                            "window"
                        }
                    ),
                ))
            }
        };
        Ok(Scenario::FirstOrder(FirstOrder {
            mode: cfg.mode,
            spec,
            alg,
            g,
            target,
            obs,
            nodes: cfg.nodes,
        }))
    }

    fn elimination(cfg: &ProblemConfig) -> HResult<Self> {
        let e = cfg.elimination.as_ref().expect("checked on load");
        let a = e.a.build("elimination.a")?;
        let n = a(0.0).nrows();
        check_shape("elimination.a", &a, (n, n))?;
        let b = e.b.build("elimination.b")?;
        let r = b(0.0).ncols();
        check_shape("elimination.b", &b, (n, r))?;
        let q = matrix("elimination.q", &e.q)?;
        if q.shape() != (r, r) {
            return Err(HarnessError::config(
                "elimination.q",
                format!("expected {r}x{r}"),
            ));
        }
        let c11 = e.c11.build("elimination.c11")?;
        let k = c11(0.0).nrows();
        for (name, c) in [
            ("c11", &e.c11),
            ("c12", &e.c12),
            ("c21", &e.c21),
            ("c22", &e.c22),
        ] {
            check_shape(&format!("elimination.{name}"), &c.build(name)?, (k, n))?;
        }
        let c = ElimObservation {
            c11,
            c12: e.c12.build("elimination.c12")?,
            c21: e.c21.build("elimination.c21")?,
            c22: e.c22.build("elimination.c22")?,
        };
        let sweep = Arc::new(riccati_sweep(a.clone(), 8 * cfg.nodes)?);
        let elim = eliminate(sweep.clone(), b.clone(), &q, &c)?;
        let a1 = vector("elimination.a1", &e.a1, n)?;
        let a2 = vector("elimination.a2", &e.a2, n)?;
        let target = elimination_target(&sweep, e.s, &a1, &a2);
        let variant = match e.variant.unwrap_or(VariantConfig::Squared) {
            VariantConfig::Squared => WeightVariant::Squared,
            VariantConfig::Linear => WeightVariant::Linear,
        };
        Ok(Scenario::Elimination(Elimination {
            a,
            b,
            q,
            c,
            q1: e.q1.build("elimination.q1")?,
            elim,
            target,
            a1,
            a2,
            s: e.s,
            variant,
            u_optimal: e.u_optimal,
            nodes: cfg.nodes,
        }))
    }

    fn order_n(cfg: &ProblemConfig) -> HResult<Self> {
        let o = cfg.ordern.as_ref().expect("checked on load");
        let coeffs = o
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| coefficient(&format!("ordern.coeffs[{i}]"), c))
            .collect::<HResult<Vec<_>>>()?;
        let forms = matrix("ordern.forms", &o.forms)?;
        let spec = OrderNSpec::new(o.a, o.b, coeffs, forms)?;
        let m = spec.m();
        let q1 = matrix("ordern.q1", &o.q1)?;
        if q1.shape() != (m, m) {
            return Err(HarnessError::config(
                "ordern.q1",
                format!("expected {m}x{m}"),
            ));
        }
        let obs = match &o.observation {
            OrderNObservationConfig::Window { h, lo, hi, q0 } => {
                let h = h.build("ordern.observation.h")?;
                let l = h(0.0).len();
                let q0 = q0.build("ordern.observation.q0")?;
                check_shape("ordern.observation.q0", &q0, (l, l))?;
                ObsOperator::Window(WindowObservation {
                    h,
                    lo: *lo,
                    hi: *hi,
                    q0,
                })
            }
            OrderNObservationConfig::Gaussian { width, count, q0 } => {
                if !(*width > 0.0) {
                    return Err(HarnessError::config(
                        "ordern.observation.width",
                        "must be positive",
                    ));
                }
                ObsOperator::Kernel(KernelObservation::uniform(
                    vec![gaussian(*width)],
                    o.a,
                    o.b,
                    *count,
                    DMatrix::from_element(1, 1, *q0),
                )?)
            }
        };
        let nominal = Nominal {
            f0: match &o.f0 {
                Some(f) => f.build("ordern.f0")?,
                None => minimax_core::func::const_scalar(0.0),
            },
            alpha0: match &o.alpha0 {
                Some(v) => vector("ordern.alpha0", v, m)?,
                None => DVector::zeros(m),
            },
        };
        let weights = RhsWeights {
            q: o.q.build("ordern.q")?,
            q1,
        };
        let pb = OrderNProblem::new(spec, obs, weights, nominal, cfg.nodes)?;
        let lvec = match &o.lvec {
            Some(v) => vector("ordern.lvec", v, m)?,
            None => DVector::zeros(m),
        };
        Ok(Scenario::OrderN(OrderN {
            mode: cfg.mode,
            pb,
            l0: o.l0.build("ordern.l0")?,
            lvec,
        }))
    }

    pub fn solve(&self) -> HResult<Solution> {
        Ok(match self {
            Scenario::FirstOrder(f) => match (&f.obs, f.mode) {
                (FirstOrderObs::Window(obs), Mode::Continuous) => Solution::Continuous(
                    solve_estimator(&f.spec, &f.alg, &f.g, obs, &f.target, f.nodes)?,
                ),
                (FirstOrderObs::Window(obs), _) => {
                    Solution::Constrained(solve_constrained_estimator(
                        &f.spec,
                        &f.alg,
                        &f.g.q2_inv,
                        obs,
                        &f.target,
                        f.nodes,
                    )?)
                }
                (FirstOrderObs::Points(obs), _) => Solution::Point(solve_point_estimator(
                    &f.spec,
                    &f.alg,
                    &f.g,
                    obs,
                    &f.target.a,
                    f.target.s,
                    f.nodes,
                )?),
            },
            Scenario::Elimination(e) => Solution::Elimination(if e.u_optimal {
                solve_u_optimal(&e.elim, &e.q1, &e.target, e.s, e.variant, e.nodes)?
            } else {
                solve_elimination_estimator(&e.elim, &e.q1, &e.target, e.s, e.nodes)?
            }),
            Scenario::OrderN(o) => Solution::OrderN(match o.mode {
                Mode::OrdernRhs => solve_rhs_estimator(&o.pb, &o.l0, &o.lvec)?,
                _ => solve_functional_estimator(&o.pb, &o.l0)?,
            }),
        })
    }

    pub fn summary(&self, sol: &Solution) -> HResult<Summary> {
        let mode = self.mode();
        Ok(match (self, sol) {
            (Scenario::FirstOrder(f), Solution::Continuous(s)) => {
                let FirstOrderObs::Window(obs) = &f.obs else {
                    unreachable!("window solution")
                };
                Summary {
                    mode,
                    sigma: s.sigma,
                    sigma_sq: s.sigma_sq,
                    c_hat: s.c_hat,
                    cost: evaluate_cost(s, &f.alg, &f.g, obs),
                    dual_variance: s.sigma_sq,
                    residual: 0.0,
                    warnings: s.warnings.clone(),
                }
            }
            (Scenario::FirstOrder(_), Solution::Constrained(s)) => Summary {
                mode,
                sigma: s.base.sigma,
                sigma_sq: s.base.sigma_sq,
                c_hat: s.base.c_hat,
                cost: s.base.sigma_sq,
                dual_variance: s.dual_variance,
                residual: s.constraint_residual,
                warnings: s.base.warnings.clone(),
            },
            (Scenario::FirstOrder(f), Solution::Point(s)) => {
                let FirstOrderObs::Points(obs) = &f.obs else {
                    unreachable!("point solution")
                };
                Summary {
                    mode,
                    sigma: s.sigma,
                    sigma_sq: s.sigma_sq,
                    c_hat: s.c_hat,
                    cost: evaluate_point_cost(s, &f.alg, &f.g, obs)?,
                    dual_variance: s.sigma_sq,
                    residual: 0.0,
                    warnings: s.warnings.clone(),
                }
            }
            (Scenario::Elimination(_), Solution::Elimination(s)) => Summary {
                mode,
                sigma: s.sigma,
                sigma_sq: s.sigma_sq,
                c_hat: 0.0,
                cost: s.sigma_sq,
                dual_variance: s.dual_variance,
                residual: 0.0,
                warnings: s.warnings.clone(),
            },
            (Scenario::OrderN(_), Solution::OrderN(s)) => Summary {
                mode,
                sigma: s.sigma,
                sigma_sq: s.sigma_sq,
                c_hat: s.c_hat,
                cost: s.cost,
                dual_variance: s.sigma_sq,
                residual: s.constraint_residual,
                warnings: s.coupled.warnings.clone(),
            },
            _ => {
                return Err(HarnessError::Unsupported(
                    "solution does not belong to this scenario".into(),
                ))
            }
        })
    }

    /// The same minimax problem in the oracle's terms.
    pub fn oracle_problem(&self) -> HResult<OracleProblem> {
        match self {
            Scenario::FirstOrder(f) => Ok(first_order_oracle(f)),
            Scenario::Elimination(e) => elimination_oracle(e),
            Scenario::OrderN(o) => Ok(order_n_oracle(o)),
        }
    }

    /// Solver weights at time `t` (or at kernel node `t`), for comparison
    /// with the oracle's weights.
    pub fn solver_weight(&self, sol: &Solution, t: f64) -> Option<DVector<f64>> {
        match (self, sol) {
            (_, Solution::Continuous(s)) => s.u_hat.at(t, Side::Left).ok(),
            (_, Solution::Constrained(s)) => s.base.u_hat.at(t, Side::Left).ok(),
            (Scenario::FirstOrder(f), Solution::Point(s)) => match &f.obs {
                FirstOrderObs::Points(obs) => obs
                    .times
                    .iter()
                    .position(|&x| x == t)
                    .map(|i| s.u_hat[i].clone()),
                FirstOrderObs::Window(_) => None,
            },
            (_, Solution::Elimination(s)) => s.u_hat.at(t, Side::Left).ok(),
            (Scenario::OrderN(o), Solution::OrderN(s)) => match (&o.pb.obs, &s.u_hat) {
                (_, ObsData::Function(u)) => Some(u(t)),
                (ObsOperator::Kernel(k), ObsData::Samples(v)) => {
                    let nc = k.channels();
                    k.nodes
                        .iter()
                        .position(|&x| x == t)
                        .map(|i| v.rows(i * nc, nc).into_owned())
                }
                _ => None,
            },
            _ => None,
        }
    }
}

fn first_order_oracle(f: &FirstOrder) -> OracleProblem {
    let (n, m) = (f.spec.n, f.spec.m);
    let left = vcat(&f.spec.b0, &DMatrix::zeros(n - m, n));
    let right = vcat(&DMatrix::zeros(m, n), &f.spec.b1);
    let alpha = if f.mode == Mode::Constrained {
        AlphaPrior::Free
    } else {
        AlphaPrior::Weighted(block2(
            &f.g.q0_inv,
            &DMatrix::zeros(m, n - m),
            &DMatrix::zeros(n - m, m),
            &f.g.q1_inv,
        ))
    };
    let obs = match &f.obs {
        FirstOrderObs::Window(w) => {
            let q = w.q.clone();
            OracleObservation::Window {
                h: w.h.clone(),
                noise_inv: mat_fn(move |t| {
                    spd_inverse(&q(t)).expect("noise weight is positive definite")
                }),
                lo: w.alpha,
                hi: w.beta,
            }
        }
        FirstOrderObs::Points(p) => OracleObservation::Points {
            times: p.times.clone(),
            h: DMatrix::identity(n, n),
            noise_inv: p
                .weights
                .iter()
                .map(|w| spd_inverse(w).expect("validated weight"))
                .collect(),
        },
    };
    OracleProblem {
        t0: 0.0,
        t1: f.spec.horizon,
        drift: f.spec.primal_drift(),
        input: const_mat(DMatrix::identity(n, n)),
        left,
        right,
        alpha,
        f_inv: f.g.q2_inv.clone(),
        obs,
        target: OracleTarget {
            point: Some((f.target.s, f.target.a.clone())),
            ..Default::default()
        },
    }
}

fn elimination_oracle(e: &Elimination) -> HResult<OracleProblem> {
    if e.u_optimal {
        return Err(HarnessError::Unsupported(
            "the oracle does not model the clamped-weight variant".into(),
        ));
    }
    let n = e.a1.len();
    let a = e.a.clone();
    let drift = mat_fn(move |t| {
        block2(
            &DMatrix::zeros(n, n),
            &DMatrix::identity(n, n),
            &a(t),
            &DMatrix::zeros(n, n),
        )
    });
    let b = e.b.clone();
    let input = mat_fn(move |t| {
        let bt = b(t);
        vcat(&DMatrix::zeros(n, bt.ncols()), &bt)
    });
    let (id, zero) = (DMatrix::identity(n, n), DMatrix::zeros(n, n));
    let left = vcat(&hcat(&zero, &id), &DMatrix::zeros(n, 2 * n));
    let right = vcat(&DMatrix::zeros(n, 2 * n), &hcat(&id, &zero));
    let c = e.c.clone();
    let h = mat_fn(move |t| {
        vcat(
            &hcat(&(c.c11)(t), &(c.c12)(t)),
            &hcat(&(c.c21)(t), &(c.c22)(t)),
        )
    });
    let k = h(0.0).nrows();
    let q1 = e.q1.clone();
    let q_inv = spd_inverse(&e.q)?;
    Ok(OracleProblem {
        t0: 0.0,
        t1: 1.0,
        drift,
        input,
        left,
        right,
        alpha: AlphaPrior::Weighted(DMatrix::zeros(2 * n, 2 * n)),
        f_inv: const_mat(q_inv),
        obs: OracleObservation::Window {
            h,
            noise_inv: mat_fn(move |t| DMatrix::identity(k, k) / (q1(t) * q1(t))),
            lo: 0.0,
            hi: 1.0,
        },
        target: OracleTarget {
            point: Some((e.s, minimax_core::linalg::vjoin(&e.a1, &e.a2))),
            ..Default::default()
        },
    })
}

fn order_n_oracle(o: &OrderN) -> OracleProblem {
    let spec = o.pb.spec.clone();
    let n = spec.n;
    let forms = &spec.forms;
    let left = forms.columns(0, n).into_owned();
    let right = forms.columns(n, n).into_owned();
    let input = {
        let spec = spec.clone();
        mat_fn(move |t| {
            let mut b = DMatrix::zeros(n, 1);
            b[(n - 1, 0)] = 1.0 / spec.leading(t);
            b
        })
    };
    let q = o.pb.weights.q.clone();
    let f_inv = mat_fn(move |t| DMatrix::from_element(1, 1, 1.0 / q(t)));
    let mut row = DMatrix::zeros(1, n);
    row[(0, 0)] = 1.0;
    let obs = match &o.pb.obs {
        ObsOperator::Window(w) => {
            let (h, q0) = (w.h.clone(), w.q0.clone());
            let r = row.clone();
            OracleObservation::Window {
                h: mat_fn(move |t| h(t) * &r),
                noise_inv: mat_fn(move |t| spd_inverse(&q0(t)).expect("validated noise weight")),
                lo: w.lo,
                hi: w.hi,
            }
        }
        ObsOperator::Kernel(k) => OracleObservation::Kernel {
            nodes: k.nodes.clone(),
            weights: k.weights.clone(),
            kernels: k.kernels.clone(),
            noise_inv: k
                .q0
                .iter()
                .map(|q| spd_inverse(q).expect("validated noise weight"))
                .collect(),
            row,
        },
    };
    let l0 = o.l0.clone();
    let target = match o.mode {
        Mode::OrdernRhs => OracleTarget {
            input_density: Some(vec_fn(move |t| DVector::from_element(1, l0(t)))),
            alpha: Some(o.lvec.clone()),
            ..Default::default()
        },
        _ => OracleTarget {
            state_density: Some(vec_fn(move |t| {
                let mut v = DVector::zeros(n);
                v[0] = l0(t);
                v
            })),
            ..Default::default()
        },
    };
    OracleProblem {
        t0: spec.a,
        t1: spec.b,
        drift: spec.companion_fn(),
        input,
        left,
        right,
        alpha: AlphaPrior::Weighted(o.pb.q1_inv().clone()),
        f_inv,
        obs,
        target,
    }
}

/// Filtered trajectory and the value of the target computed from it.
pub struct FilterOutput {
    pub estimate: f64,
    pub trajectory: PiecewiseTrajectory,
    pub labels: Vec<String>,
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

impl Scenario {
    /// Runs the filter on data `y` and reads the target off the filtered
    /// state.
    pub fn filter(&self, y: &ObsVec) -> HResult<FilterOutput> {
        let as_fn = |y: &PiecewiseTrajectory| -> minimax_core::func::VecFn {
            let y = Arc::new(y.clone());
            Arc::new(move |t| y.at(t, Side::Left).expect("time inside the grid"))
        };
        match (self, y) {
            (Scenario::FirstOrder(f), y) => {
                let sol = match (&f.obs, y) {
                    (FirstOrderObs::Window(obs), ObsVec::Traj(y)) if f.mode == Mode::Continuous => {
                        solve_filter(&f.spec, &f.alg, &f.g, obs, &as_fn(y), f.target.s, f.nodes)?
                    }
                    (FirstOrderObs::Window(obs), ObsVec::Traj(y)) => solve_constrained_filter(
                        &f.spec,
                        &f.alg,
                        &f.g.q2_inv,
                        obs,
                        &as_fn(y),
                        f.target.s,
                        f.nodes,
                    )?,
                    (FirstOrderObs::Points(obs), ObsVec::Points(ys)) => {
                        solve_point_filter(&f.spec, &f.alg, &f.g, obs, ys, f.target.s, f.nodes)?
                    }
                    _ => {
                        return Err(HarnessError::Unsupported(
                            "observation data do not match the scenario".into(),
                        ))
                    }
                };
                Ok(FilterOutput {
                    estimate: sol.estimate(&f.target.a),
                    trajectory: sol.phi_hat(),
                    labels: labels("phi_hat_", f.spec.n),
                })
            }
            (Scenario::Elimination(e), ObsVec::Traj(y)) => {
                let (traj, x_s) =
                    solve_elimination_filter(&e.elim, &e.q1, &as_fn(y), e.s, e.nodes)?;
                let n = e.a1.len();
                Ok(FilterOutput {
                    estimate: e.target.dot(&x_s),
                    trajectory: traj.components(0, 2 * n),
                    labels: labels("x_hat_", 2 * n),
                })
            }
            (Scenario::OrderN(o), y) => {
                let data = match y {
                    ObsVec::Traj(y) => ObsData::Function(as_fn(y)),
                    ObsVec::Samples(v) => ObsData::Samples(v.clone()),
                    ObsVec::Points(_) => {
                        return Err(HarnessError::Unsupported(
                            "point data in an order-n problem".into(),
                        ))
                    }
                };
                let filt = match o.mode {
                    Mode::OrdernRhs => solve_rhs_filter(&o.pb, &data)?,
                    _ => solve_functional_filter(&o.pb, &data)?,
                };
                let estimate = match o.mode {
                    Mode::OrdernRhs => filt.rhs_functional(&o.l0, &o.lvec),
                    _ => filt.functional(&o.l0),
                };
                Ok(FilterOutput {
                    estimate,
                    trajectory: filt.phi_hat.clone(),
                    labels: vec!["phi_hat".into()],
                })
            }
            _ => Err(HarnessError::Unsupported(
                "observation data do not match the scenario".into(),
            )),
        }
    }
}
