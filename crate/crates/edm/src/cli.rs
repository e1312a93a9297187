//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use edm_core::edm::Algorithm;
use edm_core::solver::exact_occupancy;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, save_dataset};
use crate::envspec::{build_expert, EnvSpec, Expert};
use crate::error::{write, Result};
use crate::export::{mdp_dump, occupancy_csv, q_csv};
use crate::pipeline::{evaluate, run_sweep, state_only_from, train_policy};
use crate::report::{eval_csv, train_log_csv};

#[derive(Debug, Parser)]
#[command(
    name = "edm",
    version,
    about = "Energy-based distribution matching for strictly batch imitation learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Environment spec file; its keys override the `env.` section.
    #[arg(long, global = true)]
    env: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set train.iterations=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the environment and save the demonstrator policy.
    Expert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Also write the soft-optimal Q-table as CSV.
        #[arg(long)]
        q_csv: Option<PathBuf>,
        /// Also write the expert's state-action occupancy as CSV.
        #[arg(long)]
        occupancy_csv: Option<PathBuf>,
        /// Also write a text dump of the transition and reward tables.
        #[arg(long)]
        mdp_dump: Option<PathBuf>,
    },
    /// Roll out the demonstrator and save one dataset per budget.
    Demos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expert: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Trajectory budgets (defaults to `sweep.n_traj`).
        #[arg(long, value_delimiter = ',')]
        n_traj: Vec<usize>,
    },
    /// Train a policy on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset prefix (`<prefix>.header`, `<prefix>.transitions`).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_algo)]
        algo: Option<Algorithm>,
        /// Dataset prefix whose states join the positive phase without actions.
        #[arg(long)]
        state_only: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training-log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Directory for periodic checkpoints (`train.checkpoint_interval`).
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Evaluate a checkpoint by live returns and optional action matching.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training dataset prefix; supplies the scaling references.
        #[arg(long)]
        data: PathBuf,
        /// Held-out dataset prefix for ACC/AUC/APR.
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// Label for the `algo` column.
        #[arg(long, default_value = "policy")]
        label: String,
        /// Append to this CSV instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate every algorithm × budget × seed cell.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the merged configuration with the origin of every value.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: edm_core::Error| e.to_string())
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    if let Some(path) = &common.env {
        let spec = EnvSpec::load(path)?;
        overrides.extend(
            EnvSpec::KEYS
                .iter()
                .map(|k| format!("env.{k}={}", spec.get(k).unwrap())),
        );
    }
    overrides.extend(common.overrides.iter().cloned());
    RunConfig::resolve(common.config.as_deref(), &overrides)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Expert {
            common,
            out,
            q_csv: q_path,
            occupancy_csv: occ_path,
            mdp_dump: dump_path,
        } => {
            let cfg = resolve(&common)?;
            let env = cfg.env.build()?;
            let (expert, q) = build_expert(&env, &cfg.solver)?;
            expert.save(&out)?;
            if let (Some(p), Some(q)) = (q_path, &q) {
                write(&p, &q_csv(q))?;
            }
            if let (Some(p), Some(mdp), Expert::Table(policy)) = (&occ_path, env.tabular(), &expert)
            {
                write(p, &occupancy_csv(&exact_occupancy(mdp, policy)?))?;
            }
            if let (Some(p), Some(mdp)) = (dump_path, env.tabular()) {
                write(&p, &mdp_dump(mdp))?;
            }
            println!("{}", out.display());
            Ok(())
        }
        Command::Demos {
            common,
            expert,
            out_dir,
            n_traj,
        } => {
            let cfg = resolve(&common)?;
            let env = cfg.env.build()?;
            let expert = Expert::load(&expert)?;
            let sizes = if n_traj.is_empty() {
                cfg.sweep_n_traj.clone()
            } else {
                n_traj
            };
            for n in sizes {
                let ds = env.generate(&expert, n, cfg.seed)?;
                let prefix = out_dir.join(format!("demos-{n}"));
                save_dataset(&ds, &prefix)?;
                println!("{}", prefix.display());
            }
            Ok(())
        }
        Command::Train {
            common,
            data,
            algo,
            state_only,
            out,
            log,
            checkpoint_dir,
        } => {
            let cfg = resolve(&common)?;
            let env = cfg.env.build()?;
            let ds = load_dataset(&data)?;
            let extra = state_only.as_deref().map(load_dataset).transpose()?;
            let extra_states = extra.as_ref().map(state_only_from);
            let algo = algo.unwrap_or(cfg.train.algorithm);
            let outcome = train_policy(
                &cfg,
                &env,
                &ds,
                extra_states.as_deref(),
                algo,
                cfg.seed,
                checkpoint_dir.as_deref(),
            )?;
            save_checkpoint(&outcome.net, &out)?;
            if let Some(p) = log {
                write(&p, &train_log_csv(&outcome.log))?;
            }
            println!("{}", out.display());
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            data,
            heldout,
            label,
            out,
        } => {
            let cfg = resolve(&common)?;
            let env = cfg.env.build()?;
            let net = load_checkpoint(&checkpoint)?;
            let ds = load_dataset(&data)?;
            let held = heldout.as_deref().map(load_dataset).transpose()?;
            let report = evaluate(&cfg, &env, &net, &ds, held.as_ref(), &label, cfg.seed)?;
            let csv = eval_csv(std::slice::from_ref(&report));
            match out {
                Some(p) => append_rows(&p, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
        Command::Sweep { common, out } => {
            let cfg = resolve(&common)?;
            let reports = run_sweep(&cfg)?;
            write(&out, &eval_csv(&reports))?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Config { common } => {
            print!("{}", resolve(&common)?.describe());
            Ok(())
        }
    }
}

/// Appends data rows, writing the header only when the file is new.
fn append_rows(path: &Path, csv: &str) -> Result<()> {
    let io_err = |source| crate::error::Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let exists = path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let body = if exists {
        csv.split_once('\n').map_or("", |x| x.1)
    } else {
        csv
    };
    f.write_all(body.as_bytes()).map_err(io_err)
}
