//! Subcommand dispatch behind the `minimax` binary.

use std::path::{Path, PathBuf};

use minimax_core::ordern::ObsData;
use minimax_core::riccati::WeightVariant;
use minimax_core::trajectory::PiecewiseTrajectory;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Mode, ProblemConfig, VariantConfig};
use crate::error::{HResult, HarnessError};
use crate::oracle::oracle_minimax;
use crate::report::{num, text_table, Artifacts};
use crate::scenario::{FirstOrderObs, Scenario, Solution, Summary};
use crate::worst::{random_admissible, saturation, Experiment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Filter,
    Point,
    Eliminate,
    Ordern,
    Rhs,
    Oracle,
    Simulate,
    Verify,
}

impl Command {
    /// Mode a mode-specific subcommand insists on.
    fn required_mode(self) -> Option<Mode> {
        match self {
            Command::Point => Some(Mode::Point),
            Command::Eliminate => Some(Mode::Elimination),
            Command::Ordern => Some(Mode::OrdernFunctional),
            Command::Rhs => Some(Mode::OrdernRhs),
            _ => None,
        }
    }
}

/// Command-line values that replace the ones in the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Solver nodes per interval; oracle steps for the `oracle` subcommand.
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub variant: Option<VariantConfig>,
    pub plot: bool,
}

/// Text for the terminal plus the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub files: Vec<PathBuf>,
    pub passed: bool,
}

/// Random admissible draws used by `simulate` and `verify`.
pub const GUARANTEE_DRAWS: usize = 200;
pub const SIGNS_PER_DRAW: usize = 64;
/// Relative oracle agreement required by `verify`.
pub const ORACLE_TOL: f64 = 1e-3;
/// Stream reserved for the synthetic data of `filter` and `verify`.
const DATA_STREAM: u64 = 1 << 40;

pub fn run_config(
    cmd: Command,
    path: &Path,
    out: Option<&Path>,
    ov: &Overrides,
) -> HResult<Outcome> {
    run_problem(cmd, ProblemConfig::load(path)?, out, ov)
}

pub fn apply_overrides(cmd: Command, cfg: &mut ProblemConfig, ov: &Overrides) -> HResult<()> {
    if let Some(n) = ov.nodes {
        if cmd == Command::Oracle {
            cfg.oracle_nodes = n;
        } else {
            if n < 3 {
                return Err(HarnessError::config(
                    "--nodes",
                    "at least three nodes per interval are required",
                ));
            }
            cfg.nodes = n;
        }
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(t) = ov.tol {
        cfg.tol = t;
    }
    if let Some(m) = ov.samples {
        cfg.samples = m;
    }
    if let Some(v) = ov.variant {
        match cfg.elimination.as_mut() {
            Some(e) => e.variant = Some(v),
            None => {
                return Err(HarnessError::config(
                    "--mode-variant",
                    "only applies to elimination problems",
                ))
            }
        }
    }
    if let Some(m) = cmd.required_mode() {
        if cfg.mode != m {
            return Err(HarnessError::config(
                "mode",
                format!(
                    "this subcommand needs mode `{}`, the file has `{}`",
                    m.name(),
                    cfg.mode.name()
                ),
            ));
        }
    }
    Ok(())
}

pub fn run_problem(
    cmd: Command,
    mut cfg: ProblemConfig,
    out: Option<&Path>,
    ov: &Overrides,
) -> HResult<Outcome> {
    apply_overrides(cmd, &mut cfg, ov)?;
    let sc = Scenario::build(&cfg)?;
    let sol = sc.solve()?;
    let summary = sc.summary(&sol)?;
    let mut art = Artifacts::new(out)?;
    let mut rows = summary_rows(&cfg, &summary);
    let mut text = String::new();
    let mut passed = true;
    write_solution(&mut art, &sc, &sol, ov.plot)?;

    match cmd {
        Command::Solve | Command::Point | Command::Eliminate | Command::Ordern | Command::Rhs => {}
        Command::Filter => {
            let exp = Experiment::new(&sc, &sol)?;
            let check = filter_check(&sc, &exp, cfg.seed)?;
            art.trajectory("filter.csv", &check.trajectory, &check.labels)?;
            if ov.plot {
                art.gnuplot("filter.csv", &check.labels)?;
            }
            rows.push(("truth".into(), num(check.truth)));
            rows.push(("estimate".into(), num(check.estimate)));
            rows.push(("filter_estimate".into(), num(check.filter)));
            rows.push(("estimate_filter_gap".into(), num(check.gap())));
        }
        Command::Oracle => {
            let c = compare_oracle(&sc, &sol, &summary, cfg.oracle_nodes)?;
            let header = [
                "steps",
                "sigma_solver",
                "sigma_oracle",
                "rel_diff",
                "u_rel_l2",
                "condition",
                "min_eigenvalue",
            ];
            let row = vec![
                c.steps.to_string(),
                num(c.sigma_solver),
                num(c.sigma_oracle),
                num(c.rel_diff),
                num(c.u_rel_l2),
                num(c.condition),
                num(c.min_eigenvalue),
            ];
            art.table("oracle.csv", &header, std::slice::from_ref(&row))?;
            text += &text_table(&header, &[row]);
        }
        Command::Simulate => {
            let exp = Experiment::new(&sc, &sol)?;
            let sat = saturation(&exp, cfg.samples, cfg.seed)?;
            let guar = random_admissible(&exp, GUARANTEE_DRAWS, SIGNS_PER_DRAW, cfg.seed)?;
            let header = [
                "experiment",
                "samples",
                "mse",
                "stderr",
                "lower",
                "upper",
                "sigma_sq",
                "deterministic",
                "noise_form",
            ];
            let mc_row = |name: String, r: &crate::worst::McReport| {
                vec![
                    name,
                    r.samples.to_string(),
                    num(r.mse),
                    num(r.stderr),
                    num(r.lower()),
                    num(r.upper()),
                    num(r.sigma_sq),
                    num(r.deterministic),
                    num(r.noise_form),
                ]
            };
            let mut table = vec![mc_row("saturating".into(), &sat.mc)];
            table.extend(
                guar.draws
                    .iter()
                    .enumerate()
                    .map(|(i, r)| mc_row(format!("draw{i}"), r)),
            );
            art.table("montecarlo.csv", &header, &table)?;
            rows.push(("saturating_mse".into(), num(sat.mc.mse)));
            rows.push(("saturating_stderr".into(), num(sat.mc.stderr)));
            rows.push(("saturating_g_form".into(), num(sat.g_form)));
            rows.push((
                "saturation_within_3_stderr".into(),
                sat.within_band().to_string(),
            ));
            rows.push(("draws_worst_excess".into(), num(guar.worst_excess)));
            rows.push((
                "draws_below_bound".into(),
                guar.passed(summary.sigma_sq).to_string(),
            ));
            passed = sat.within_band() && guar.passed(summary.sigma_sq);
        }
        Command::Verify => {
            let checks = verify_checks(&cfg, &sc, &sol, &summary)?;
            let header = ["check", "value", "tolerance", "result"];
            let table: Vec<Vec<String>> = checks.iter().map(Check::row).collect();
            art.table("verify.csv", &header, &table)?;
            text += &text_table(&header, &table);
            passed = checks.iter().all(|c| c.pass != Some(false));
        }
    }
    art.key_values("summary.csv", &rows)?;
    let summary_text: String = rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    Ok(Outcome {
        text: summary_text + &text,
        files: art.files().to_vec(),
        passed,
    })
}

fn summary_rows(cfg: &ProblemConfig, s: &Summary) -> Vec<(String, String)> {
    vec![
        ("mode".into(), s.mode.name().into()),
        ("nodes".into(), cfg.nodes.to_string()),
        ("sigma".into(), num(s.sigma)),
        ("sigma_sq".into(), num(s.sigma_sq)),
        ("c_hat".into(), num(s.c_hat)),
        ("cost".into(), num(s.cost)),
        ("dual_variance".into(), num(s.dual_variance)),
        ("constraint_residual".into(), num(s.residual)),
        ("warnings".into(), s.warnings.join("; ")),
    ]
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn write_solution(art: &mut Artifacts, sc: &Scenario, sol: &Solution, plot: bool) -> HResult<()> {
    let traj =
        |art: &mut Artifacts, name: &str, t: &PiecewiseTrajectory, l: Vec<String>| -> HResult<()> {
            art.trajectory(name, t, &l)?;
            if plot {
                art.gnuplot(name, &l)?;
            }
            Ok(())
        };
    let points =
        |art: &mut Artifacts, times: &[f64], u: &[nalgebra::DVector<f64>]| -> HResult<()> {
            let dim = u.first().map_or(0, |v| v.len());
            let mut header = vec!["t".to_string()];
            header.extend(labels("u", dim));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = times
                .iter()
                .zip(u)
                .map(|(t, v)| {
                    std::iter::once(num(*t))
                        .chain(v.iter().map(|x| num(*x)))
                        .collect()
                })
                .collect();
            art.table("weights.csv", &header, &rows)
        };
    match (sc, sol) {
        (_, Solution::Continuous(s)) => {
            traj(
                art,
                "state.csv",
                &s.state,
                [labels("z", s.n), labels("p", s.n)].concat(),
            )?;
            traj(art, "weights.csv", &s.u_hat, labels("u", s.u_hat.dim()))?;
        }
        (_, Solution::Constrained(c)) => {
            let s = &c.base;
            traj(
                art,
                "state.csv",
                &s.state,
                [labels("z", s.n), labels("p", s.n)].concat(),
            )?;
            traj(art, "weights.csv", &s.u_hat, labels("u", s.u_hat.dim()))?;
        }
        (Scenario::FirstOrder(f), Solution::Point(s)) => {
            traj(
                art,
                "state.csv",
                &s.state,
                [labels("z", s.n), labels("p", s.n)].concat(),
            )?;
            if let FirstOrderObs::Points(p) = &f.obs {
                points(art, &p.times, &s.u_hat)?;
            }
        }
        (_, Solution::Elimination(s)) => {
            traj(
                art,
                "state.csv",
                &s.state,
                [labels("z", s.dim), labels("p", s.dim)].concat(),
            )?;
            traj(art, "weights.csv", &s.u_hat, labels("u", s.u_hat.dim()))?;
        }
        (Scenario::OrderN(o), Solution::OrderN(s)) => {
            let n = o.pb.spec.n;
            traj(
                art,
                "state.csv",
                &s.coupled.state,
                [labels("y", n), labels("w", n)].concat(),
            )?;
            match &s.u_hat {
                ObsData::Function(u) => {
                    let sampled = PiecewiseTrajectory::sample(&o.pb.grid, |_, t| u(t));
                    let d = sampled.dim();
                    traj(art, "weights.csv", &sampled, labels("u", d))?;
                }
                ObsData::Samples(v) => {
                    if let minimax_core::ordern::ObsOperator::Kernel(k) = &o.pb.obs {
                        let nc = k.channels();
                        let us: Vec<_> = (0..k.nodes.len())
                            .map(|i| v.rows(i * nc, nc).into_owned())
                            .collect();
                        points(art, &k.nodes, &us)?;
                    }
                }
            }
        }
        _ => {
            return Err(HarnessError::Unsupported(
                "mismatched scenario and solution".into(),
            ))
        }
    }
    Ok(())
}

/// Solver against oracle at a given number of oracle steps.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub steps: usize,
    pub sigma_solver: f64,
    pub sigma_oracle: f64,
    pub rel_diff: f64,
    /// Relative discrete L2 distance between the two sets of weights.
    pub u_rel_l2: f64,
    pub condition: f64,
    pub min_eigenvalue: f64,
}

pub fn compare_oracle(
    sc: &Scenario,
    sol: &Solution,
    summary: &Summary,
    steps: usize,
) -> HResult<OracleComparison> {
    let pb = sc.oracle_problem()?;
    let r = oracle_minimax(&pb, steps)?;
    let density = match sc {
        Scenario::FirstOrder(f) => matches!(f.obs, FirstOrderObs::Window(_)),
        Scenario::Elimination(_) => true,
        Scenario::OrderN(o) => matches!(o.pb.obs, minimax_core::ordern::ObsOperator::Window(_)),
    };
    let (mut num_sq, mut den_sq) = (0.0, 0.0);
    for (i, (t, uo)) in r.u.iter().enumerate() {
        let Some(us) = sc.solver_weight(sol, *t) else {
            continue;
        };
        let w = if density {
            let lo = if i > 0 { r.u[i - 1].0 } else { *t };
            let hi = if i + 1 < r.u.len() { r.u[i + 1].0 } else { *t };
            (hi - lo) / 2.0
        } else {
            1.0
        };
        num_sq += w * (uo - &us).norm_squared();
        den_sq += w * us.norm_squared();
    }
    Ok(OracleComparison {
        steps,
        sigma_solver: summary.sigma,
        sigma_oracle: r.sigma,
        rel_diff: (r.sigma - summary.sigma).abs() / summary.sigma.max(1e-12),
        u_rel_l2: if den_sq > 0.0 {
            (num_sq / den_sq).sqrt()
        } else {
            num_sq.sqrt()
        },
        condition: r.condition,
        min_eigenvalue: r.min_eigenvalue,
    })
}

/// Estimator and filter applied to one synthetic observation.
pub struct FilterCheck {
    pub truth: f64,
    pub estimate: f64,
    pub filter: f64,
    pub trajectory: PiecewiseTrajectory,
    pub labels: Vec<String>,
}

impl FilterCheck {
    pub fn gap(&self) -> f64 {
        (self.estimate - self.filter).abs() / self.estimate.abs().max(1.0)
    }
}

/// Draws an admissible forcing and noise, simulates the observation and
/// runs both the estimator and the filter on it.
pub fn filter_check(sc: &Scenario, exp: &Experiment, seed: u64) -> HResult<FilterCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    let forcing = exp.random_forcing(&mut rng)?;
    let noise = exp.random_noise(&mut rng)?;
    let truth = exp.truth(&forcing)?;
    let y = truth.y.add_scaled(1.0, &noise);
    let estimate = exp.estimate(&y)?;
    let f = sc.filter(&y)?;
    Ok(FilterCheck {
        truth: truth.target,
        estimate,
        filter: f.estimate,
        trajectory: f.trajectory,
        labels: f.labels,
    })
}

/// One line of the `verify` table; `pass = None` marks a check that does
/// not apply to the scenario.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: Option<bool>,
}

impl Check {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: Some(value <= tolerance),
        }
    }

    fn skipped(name: &str) -> Self {
        Check {
            name: name.into(),
            value: f64::NAN,
            tolerance: f64::NAN,
            pass: None,
        }
    }

    fn row(&self) -> Vec<String> {
        let result = match self.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "n/a",
        };
        let f = |x: f64| {
            if x.is_nan() {
                "-".to_string()
            } else {
                format!("{x:.3e}")
            }
        };
        vec![
            self.name.clone(),
            f(self.value),
            f(self.tolerance),
            result.into(),
        ]
    }
}

pub fn verify_checks(
    cfg: &ProblemConfig,
    sc: &Scenario,
    sol: &Solution,
    summary: &Summary,
) -> HResult<Vec<Check>> {
    let tol = cfg.tol;
    let (clamped, linear) = match sc {
        Scenario::Elimination(e) => (e.u_optimal, e.variant == WeightVariant::Linear),
        _ => (false, false),
    };
    let mut out = vec![Check::at_most(
        "variance equals optimal cost",
        summary.cost_gap(),
        tol,
    )];
    out.push(if clamped || linear {
        Check::skipped("variance equals adjoint pairing")
    } else {
        Check::at_most("variance equals adjoint pairing", summary.dual_gap(), tol)
    });
    out.push(match summary.mode {
        Mode::Constrained | Mode::OrdernFunctional | Mode::OrdernRhs => {
            Check::at_most("constraint residual", summary.residual, 1e-8)
        }
        _ => Check::skipped("constraint residual"),
    });
    let exp = Experiment::new(sc, sol)?;
    out.push(if clamped {
        Check::skipped("estimate equals filter")
    } else {
        Check::at_most(
            "estimate equals filter",
            filter_check(sc, &exp, cfg.seed)?.gap(),
            tol,
        )
    });
    out.push(match compare_oracle(sc, sol, summary, cfg.oracle_nodes) {
        Ok(c) => Check::at_most("oracle agreement", c.rel_diff, ORACLE_TOL),
        Err(HarnessError::Unsupported(_)) => Check::skipped("oracle agreement"),
        Err(e) => return Err(e),
    });
    let sat = saturation(&exp, cfg.samples, cfg.seed)?;
    let band = 3.0 * sat.mc.stderr + crate::worst::DISCRETIZATION_SLACK * sat.mc.sigma_sq;
    out.push(Check::at_most(
        "saturating pair within 3 stderr",
        (sat.mc.mse - sat.mc.sigma_sq).abs(),
        band,
    ));
    let guar = random_admissible(&exp, GUARANTEE_DRAWS, SIGNS_PER_DRAW, cfg.seed)?;
    out.push(Check {
        name: "admissible draws below bound".into(),
        value: guar.worst_excess,
        tolerance: crate::worst::DISCRETIZATION_SLACK * summary.sigma_sq,
        pass: Some(guar.passed(summary.sigma_sq)),
    });
    Ok(out)
}
