// glibc malloc fragments badly under the replay-buffer allocation pattern.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fran_core::agent::{evaluate_agent, Agent, AgentKind, EvalSummary};
use fran_core::baselines::{grid_slot_optimum, oracle_slot_optimum};
use fran_core::ddpg::DdpgAgent;
use fran_core::dqn::DqnAgent;
use fran_core::env::FranEnv;
use fran_core::fed::GlobalModel;
use fran_core::harness::{
    self, eval_seeds, AggregateRow, ExperimentConfig, MetricsRow, PolicyKind,
};
use fran_core::seed;

/// Fog-RAN offloading experiments: federated DDPG/DQN training, baselines and sweeps.
#[derive(Parser)]
#[command(name = "fran", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file whose keys override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base preset: `desk` or `full-scale`.
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    /// Run with this single seed instead of the configured seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of runs executed in parallel.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every configured agent; writes per-run, aggregate and summary CSVs.
    Train,
    /// Final cost of every agent versus the number of MDs per F-AP.
    SweepMds,
    /// Final cost of every agent versus the F-AP CPU frequency.
    SweepCpu,
    /// Per-round training reward of the learned agents.
    Convergence,
    /// Evaluate the fixed policies, or a saved global model.
    Eval {
        /// Global-model checkpoint written by `train`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare the enumeration oracle with a share-grid search on random slots.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Grid cells per unit share.
        #[arg(long, default_value_t = 50)]
        units: usize,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::preset(&common.preset)?;
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path, &base)
            .with_context(|| format!("loading {}", path.display()))?,
        None => base,
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_rows(rows: &[AggregateRow], label: &str) {
    println!("{:<10} {:>12} {:>5} {:>12} {:>10}", "policy", label, "runs", "cost", "std");
    for r in rows {
        println!(
            "{:<10} {:>12} {:>5} {:>12.5} {:>10.5}",
            r.policy, r.x, r.runs, r.cost_mean, r.cost_std
        );
    }
}

fn eval_checkpoint(cfg: &ExperimentConfig, path: &PathBuf) -> Result<Vec<MetricsRow>> {
    let model = GlobalModel::load(path).with_context(|| format!("loading {}", path.display()))?;
    let mut rows = Vec::new();
    for &s in &cfg.seeds {
        let mut parts = Vec::new();
        for n in 0..cfg.env.num_faps {
            let mut env = FranEnv::new(cfg.env.clone(), n)?;
            let mut agent: Box<dyn Agent> = match model.kind {
                AgentKind::Ddpg => Box::new(DdpgAgent::for_env(&env, cfg.ddpg.clone(), 0)?),
                AgentKind::Dqn => Box::new(DqnAgent::for_env(&env, cfg.dqn.clone(), 0)?),
            };
            agent
                .import_weights(&model.weights)
                .context("checkpoint does not match the configured network shapes")?;
            parts.push(evaluate_agent(agent.as_ref(), &mut env, &eval_seeds(s, n, cfg.eval_episodes))?);
        }
        let e = EvalSummary::combine(&parts);
        rows.push(MetricsRow {
            run_id: format!("checkpoint-s{s}"),
            seed: s,
            round: model.round,
            mean_reward: e.mean_reward,
            mean_cost: e.mean_cost,
            mean_delay: e.mean_delay,
            mean_energy: e.mean_energy,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct OracleCheckRow {
    instance: usize,
    seed: u64,
    oracle_cost: f64,
    grid_cost: f64,
    gap: f64,
}

fn oracle_check(cfg: &ExperimentConfig, instances: usize, units: usize) -> Result<bool> {
    let mut env = FranEnv::new(cfg.env.clone(), 0)?;
    let mut rows = Vec::with_capacity(instances);
    let mut ok = true;
    for i in 0..instances {
        let s = seed::derive(cfg.seeds[0], &[4, i as u64]);
        let state = env.reset(s);
        let exact = oracle_slot_optimum(&state, env.fap(), env.config())?;
        let grid = grid_slot_optimum(&state, env.fap(), env.config(), units)?;
        let gap = grid.cost - exact.cost;
        // The exact optimum can never be beaten by a feasible grid point.
        if gap < -1e-9 * exact.cost.abs().max(1.0) {
            ok = false;
        }
        rows.push(OracleCheckRow {
            instance: i,
            seed: s,
            oracle_cost: exact.cost,
            grid_cost: grid.cost,
            gap,
        });
    }
    harness::write_csv(&cfg.out_dir.join("oracle_check.csv"), &rows)?;
    let worst = rows.iter().map(|r| r.gap / r.oracle_cost).fold(0.0, f64::max);
    println!(
        "{instances} slots, M = {}: grid never beats the oracle: {ok}; worst relative grid gap {worst:.3e}",
        cfg.env.mds_per_fap
    );
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    match cli.command {
        Command::Train => {
            let out = harness::run_experiment(&cfg)?;
            print_rows(&out.summary, "-");
        }
        Command::SweepMds => print_rows(&harness::sweep_mds(&cfg)?, "mds"),
        Command::SweepCpu => print_rows(&harness::sweep_fap_cpu(&cfg)?, "fap_cpu"),
        Command::Convergence => {
            let rows = harness::convergence_run(&cfg)?;
            for policy in [PolicyKind::FedDdpg, PolicyKind::FedDqn] {
                if let Some(last) = rows.iter().filter(|r| r.policy == policy.name()).last() {
                    println!("{policy}: round {} mean reward {:.5}", last.x, last.reward_mean);
                }
            }
        }
        Command::Eval { checkpoint } => match checkpoint {
            Some(path) => {
                let rows = eval_checkpoint(&cfg, &path)?;
                harness::write_csv(&cfg.out_dir.join("eval.csv"), &rows)?;
                for r in &rows {
                    println!("{} cost {:.5}", r.run_id, r.mean_cost);
                }
            }
            None => {
                let mut fixed = cfg.clone();
                fixed.agents = vec![PolicyKind::Local, PolicyKind::FapEqual, PolicyKind::Oracle];
                let results = harness::run_cells(&fixed, None)?;
                let scores: Vec<MetricsRow> = results.iter().map(|r| r.score.clone()).collect();
                harness::write_csv(&cfg.out_dir.join("eval.csv"), &scores)?;
                print_rows(&harness::aggregate_scores(&results, 0.0), "-");
            }
        },
        Command::OracleCheck { instances, units } => {
            if instances == 0 || units == 0 {
                bail!("--instances and --units must be positive");
            }
            return oracle_check(&cfg, instances, units);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
