//! Every shipped scenario parses, survives a TOML round trip and solves.

use std::path::Path;

use minimax_harness::config::ProblemConfig;
use minimax_harness::run::{run_problem, Command, Overrides};
use minimax_harness::scenario::Scenario;

fn shipped() -> Vec<std::path::PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_round_trip_through_toml() {
    let files = shipped();
    assert!(files.len() >= 7);
    for p in files {
        let cfg = ProblemConfig::load(&p).unwrap();
        let again = ProblemConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(
            cfg.to_toml().unwrap(),
            again.to_toml().unwrap(),
            "{}",
            p.display()
        );
    }
}

#[test]
fn shipped_configs_solve_with_consistent_variances() {
    for p in shipped() {
        let cfg = ProblemConfig::load(&p).unwrap();
        let sc = Scenario::build(&cfg).unwrap();
        let sol = sc.solve().unwrap();
        let s = sc.summary(&sol).unwrap();
        assert!(s.sigma > 0.0 && s.sigma.is_finite(), "{}", p.display());
        assert!((s.sigma * s.sigma - s.sigma_sq).abs() <= 1e-12 * s.sigma_sq.max(1.0));
        assert!(
            s.cost_gap() < 1e-6,
            "{}: cost gap {}",
            p.display(),
            s.cost_gap()
        );
    }
}

#[test]
fn repeated_runs_are_identical() {
    let p = shipped()
        .into_iter()
        .find(|p| p.ends_with("rhs.toml"))
        .unwrap();
    let cfg = ProblemConfig::load(&p).unwrap();
    let ov = Overrides {
        samples: Some(500),
        ..Overrides::default()
    };
    let a = run_problem(Command::Simulate, cfg.clone(), None, &ov).unwrap();
    let b = run_problem(Command::Simulate, cfg, None, &ov).unwrap();
    assert_eq!(a.text, b.text);
    assert!(a.passed);
}

#[test]
fn seed_override_changes_simulated_data() {
    let p = shipped()
        .into_iter()
        .find(|p| p.ends_with("continuous.toml"))
        .unwrap();
    let cfg = ProblemConfig::load(&p).unwrap();
    let run = |seed| {
        run_problem(
            Command::Filter,
            cfg.clone(),
            None,
            &Overrides {
                seed: Some(seed),
                ..Overrides::default()
            },
        )
        .unwrap()
        .text
    };
    assert_ne!(run(1), run(2));
}

#[test]
fn too_few_nodes_are_rejected() {
    let p = shipped()
        .into_iter()
        .find(|p| p.ends_with("point.toml"))
        .unwrap();
    let cfg = ProblemConfig::load(&p).unwrap();
    let e = run_problem(
        Command::Solve,
        cfg,
        None,
        &Overrides {
            nodes: Some(2),
            ..Overrides::default()
        },
    )
    .unwrap_err();
    assert_eq!(e.exit_code(), 4);
}
