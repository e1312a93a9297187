use std::path::Path;
use std::process::{Command, Output};

use edm::dataset::{load_dataset, save_dataset};
use edm_core::data::DemoEpisode;
use edm_core::env::{build_gridworld, TabularMdp, Transition, GRIDWORLD_HORIZON};

fn edm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_env(dir: &Path) {
    std::fs::write(
        dir.join("grid.env"),
        "kind = gridworld\nwidth = 3\nheight = 3\nslip = 0.1\ngoal_reward = 10\nstep_cost = 1\ngamma = 0.95\n",
    )
    .unwrap();
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = edm(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--bogus"][..],
        &["frobnicate"],
        &["train", "--algo", "dqn", "--data", "x", "--out", "y"],
    ] {
        let out = edm(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!stderr(&out).is_empty());
    }
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = edm(
        &["train", "--data", "nowhere", "--out", "net.ckpt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = edm(&["config", "--set", "train.nonsense=3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("train.nonsense"));
}

#[test]
fn rcal_on_pairs_reports_missing_triples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_env(d);
    assert_eq!(
        edm(&["expert", "--env", "grid.env", "--out", "expert.txt"], d)
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        edm(
            &[
                "demos",
                "--env",
                "grid.env",
                "--expert",
                "expert.txt",
                "--out-dir",
                "data",
                "--n-traj",
                "2"
            ],
            d
        )
        .status
        .code(),
        Some(0)
    );
    let mut ds = load_dataset(&d.join("data/demos-2")).unwrap();
    ds.episodes = ds
        .episodes
        .into_iter()
        .map(|e| DemoEpisode {
            id: e.id,
            transitions: e
                .transitions
                .into_iter()
                .map(|t| Transition {
                    next_state: None,
                    done: false,
                    ..t
                })
                .collect(),
        })
        .collect();
    save_dataset(&ds, &d.join("data/pairs")).unwrap();
    let out = edm(
        &[
            "train",
            "--env",
            "grid.env",
            "--data",
            "data/pairs",
            "--algo",
            "rcal",
            "--out",
            "net.ckpt",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("triples"), "{}", stderr(&out));
    assert!(!d.join("net.ckpt").exists());
}

/// Best expected undiscounted return within the rollout horizon, by
/// backward induction.
fn optimal_return(mdp: &TabularMdp, horizon: usize) -> f64 {
    let ns = mdp.n_states();
    let mut v = vec![0.0; ns];
    for _ in 0..horizon {
        v = (0..ns)
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                (0..mdp.n_actions())
                    .map(|a| {
                        let cont: f64 = mdp
                            .transition_row(s, a)
                            .iter()
                            .zip(&v)
                            .map(|(p, x)| p * x)
                            .sum();
                        mdp.reward(s, a) + cont
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    mdp.initial_dist().iter().zip(&v).map(|(p, x)| p * x).sum()
}

/// expert → demos → train → eval; returns the scaled return, its standard
/// error in scaled units, and the scaled optimum.
fn run_pipeline(d: &Path, extra: &[&str]) -> (f64, f64, f64) {
    write_env(d);
    let ok = |args: &[&str]| {
        let args: Vec<&str> = args.iter().chain(extra).copied().collect();
        let out = edm(&args, d);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
    };
    ok(&[
        "expert",
        "--env",
        "grid.env",
        "--out",
        "expert.txt",
        "--q-csv",
        "q.csv",
        "--occupancy-csv",
        "occ.csv",
    ]);
    ok(&[
        "demos",
        "--env",
        "grid.env",
        "--expert",
        "expert.txt",
        "--out-dir",
        "data",
        "--n-traj",
        "1,3",
    ]);
    ok(&[
        "train",
        "--env",
        "grid.env",
        "--data",
        "data/demos-1",
        "--algo",
        "edm",
        "--out",
        "edm.ckpt",
        "--log",
        "train.csv",
    ]);
    ok(&[
        "eval",
        "--env",
        "grid.env",
        "--checkpoint",
        "edm.ckpt",
        "--data",
        "data/demos-1",
        "--heldout",
        "data/demos-3",
        "--label",
        "edm",
        "--out",
        "eval.csv",
    ]);

    let csv = std::fs::read_to_string(d.join("eval.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());
    assert_eq!(row[0], "edm");
    let col = |name: &str| -> f64 {
        row[header.iter().position(|h| *h == name).unwrap()]
            .parse()
            .unwrap()
    };

    let log = std::fs::read_to_string(d.join("train.csv")).unwrap();
    assert!(log.lines().count() > 2);
    assert_eq!(
        std::fs::read_to_string(d.join("q.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 9 * 4
    );

    let h = load_dataset(&d.join("data/demos-1")).unwrap().header;
    let span = h.demonstrator_return - h.random_return;
    let mdp = build_gridworld(3, 3, 0.1, 10.0, 1.0, 0.95).unwrap();
    let best = (optimal_return(&mdp, GRIDWORLD_HORIZON) - h.random_return) / span;
    (col("scaled_return"), col("stderr") / span, best)
}

#[test]
fn full_gridworld_pipeline() {
    // A unit-temperature soft-optimal demonstrator leaves room above 1, so
    // the ceiling is the scaled return of the optimal policy.
    let dir = tempfile::tempdir().unwrap();
    let (scaled, se, best) = run_pipeline(dir.path(), &[]);
    assert!(
        scaled >= -0.5 && scaled <= best + 3.0 * se,
        "scaled {scaled} ± {se}, optimum {best}"
    );
}

#[test]
fn full_pipeline_with_near_greedy_demonstrator() {
    let dir = tempfile::tempdir().unwrap();
    let (scaled, _, best) = run_pipeline(dir.path(), &["--set", "solver.temperature=0.05"]);
    assert!(best < 1.1, "optimum {best}");
    assert!((-0.5..=1.1).contains(&scaled), "scaled return {scaled}");
}
