//! CSV tables: training logs and evaluation reports.

use std::fmt::Write as _;

use edm_core::edm::TrainLog;
use edm_core::eval::EvalReport;

pub const TRAIN_LOG_HEADER: &str = "iteration,loss_pi,loss_rho,kl_exact,buffer_restarts,wall_ms";
pub const EVAL_HEADER: &str = "algo,env,n_traj,seed,raw_return,stderr,scaled_return,acc,auc,apr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Absent values are empty cells.
pub fn train_log_csv(log: &TrainLog) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in &log.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.loss_pi,
            opt(r.loss_rho),
            opt(r.kl_exact),
            r.buffer_restarts,
            opt(r.wall_ms)
        );
    }
    out
}

pub fn eval_row(r: &EvalReport) -> String {
    let m = r.matching.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.algo,
        r.env,
        r.n_traj,
        r.seed,
        r.raw_return.mean,
        r.raw_return.stderr,
        r.scaled_return,
        opt(m.map(|m| m.acc)),
        opt(m.and_then(|m| m.auc)),
        opt(m.and_then(|m| m.apr)),
    )
}

/// Rows sorted by `(algo, n_traj, seed)` under one header.
pub fn eval_csv(reports: &[EvalReport]) -> String {
    let mut sorted: Vec<&EvalReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.algo, a.n_traj, a.seed).cmp(&(&b.algo, b.n_traj, b.seed)));
    let mut out = format!("{EVAL_HEADER}\n");
    for r in sorted {
        out.push_str(&eval_row(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use edm_core::edm::LogRecord;
    use edm_core::eval::{ActionMatching, ReturnEstimate};

    #[test]
    fn log_cells() {
        let log = TrainLog {
            records: vec![LogRecord {
                iteration: 3,
                loss_pi: 0.5,
                loss_rho: None,
                kl_exact: Some(0.25),
                buffer_restarts: 2,
                wall_ms: None,
            }],
        };
        assert_eq!(
            train_log_csv(&log),
            format!("{TRAIN_LOG_HEADER}\n3,0.5,,0.25,2,\n")
        );
    }

    #[test]
    fn eval_rows_sorted() {
        let report = |algo: &str, n, seed| EvalReport {
            algo: algo.into(),
            env: "gridworld".into(),
            n_traj: n,
            seed,
            raw_return: ReturnEstimate {
                mean: 1.0,
                stderr: 0.5,
                n_episodes: 2,
            },
            scaled_return: 0.75,
            matching: Some(ActionMatching {
                acc: 1.0,
                auc: None,
                apr: Some(0.5),
                n_samples: 3,
            }),
        };
        let csv = eval_csv(&[
            report("edm", 3, 0),
            report("bc", 1, 1),
            report("edm", 1, 2),
            report("bc", 1, 0),
        ]);
        let rows: Vec<&str> = csv
            .lines()
            .skip(1)
            .map(|l| &l[..l.find(",g").unwrap()])
            .collect();
        assert_eq!(rows, vec!["bc", "bc", "edm", "edm"]);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("bc,gridworld,1,0,1,0.5,0.75,1,,0.5"));
        assert!(csv.lines().nth(3).unwrap().starts_with("edm,gridworld,1,2"));
    }
}
