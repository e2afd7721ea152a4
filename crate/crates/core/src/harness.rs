//! Experiment configuration, execution and CSV output.
//!
//! A run is one (policy, seed) cell. Learned policies train federated across
//! `env.num_faps` F-APs and are evaluated greedily on fixed evaluation
//! episodes; fixed policies are evaluated once on the same episodes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{evaluate_agent, evaluate_policy, Agent, EvalSummary};
use crate::baselines::{equal_policy, local_policy, oracle_slot_optimum};
use crate::ddpg::{DdpgAgent, DdpgHyperParams};
use crate::dqn::{DqnAgent, DqnHyperParams};
use crate::env::{EnvConfig, FranEnv};
use crate::error::{config_error, Error, Result};
use crate::fed::{Federation, Participant, RoundReport};
use crate::seed;

const AGENT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    FedDdpg,
    FedDqn,
    Local,
    FapEqual,
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::FedDdpg,
        PolicyKind::FedDqn,
        PolicyKind::Local,
        PolicyKind::FapEqual,
        PolicyKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::FedDdpg => "fed-ddpg",
            PolicyKind::FedDqn => "fed-dqn",
            PolicyKind::Local => "local",
            PolicyKind::FapEqual => "fap-equal",
            PolicyKind::Oracle => "oracle",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, PolicyKind::FedDdpg | PolicyKind::FedDqn)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config_error("agents", &format!("unknown agent kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub agents: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
    /// Federated rounds for learned policies.
    pub rounds: usize,
    pub episodes_per_round: usize,
    /// Evaluation episodes per F-AP.
    pub eval_episodes: usize,
    /// Evaluate learned policies every this many rounds (0: only in the final window).
    pub eval_every: usize,
    /// Rounds at the end of training that are all evaluated and averaged into the final score.
    pub final_window: usize,
    /// Write a global-model checkpoint every this many rounds (0: final round only).
    pub checkpoint_every: usize,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub mds_sweep: Vec<usize>,
    pub fap_cpu_sweep: Vec<f64>,
    pub env: EnvConfig,
    pub ddpg: DdpgHyperParams,
    pub dqn: DqnHyperParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Two F-APs with three MDs each, 200 rounds of one 50-step episode.
    pub fn desk() -> Self {
        Self {
            scenario: "desk".into(),
            agents: PolicyKind::ALL.to_vec(),
            seeds: vec![1, 2, 3],
            rounds: 200,
            episodes_per_round: 1,
            eval_episodes: 20,
            eval_every: 10,
            final_window: 20,
            checkpoint_every: 0,
            out_dir: PathBuf::from("out"),
            workers: 1,
            mds_sweep: vec![1, 2, 3, 4, 5],
            fap_cpu_sweep: vec![2e9, 4e9, 6e9, 8e9, 10e9],
            env: EnvConfig::default(),
            ddpg: DdpgHyperParams::default(),
            dqn: DqnHyperParams::default(),
        }
    }

    /// Four F-APs with five MDs each and longer training.
    pub fn full_scale() -> Self {
        Self {
            scenario: "full-scale".into(),
            rounds: 1000,
            final_window: 50,
            eval_every: 25,
            mds_sweep: vec![2, 3, 4, 5, 6, 7, 8],
            env: EnvConfig::full_scale(),
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full-scale" => Ok(Self::full_scale()),
            other => Err(config_error("preset", &format!("unknown preset `{other}`"))),
        }
    }

    /// Parses TOML on top of `base`: keys present in the text replace the base values.
    pub fn from_toml_str(text: &str, base: &ExperimentConfig) -> Result<Self> {
        let mut merged = toml::Table::try_from(base)
            .map_err(|e| config_error("config", &e.to_string()))?;
        let overrides: toml::Table = toml::from_str(text)?;
        merge_tables(&mut merged, overrides);
        let cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| config_error("config", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: &ExperimentConfig) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds", "must list at least one seed"));
        }
        if self.agents.is_empty() {
            return Err(config_error("agents", "must list at least one agent kind"));
        }
        if self.eval_episodes == 0 {
            return Err(config_error("eval_episodes", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_error("workers", "must be at least 1"));
        }
        if self.agents.iter().any(|a| a.is_learned()) {
            if self.rounds == 0 {
                return Err(config_error("rounds", "learned agents need at least one round"));
            }
            if self.final_window == 0 || self.final_window > self.rounds {
                return Err(config_error("final_window", "must lie in 1..=rounds"));
            }
        }
        if self.mds_sweep.contains(&0) {
            return Err(config_error("mds_sweep", "MD counts must be positive"));
        }
        if self.fap_cpu_sweep.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(config_error("fap_cpu_sweep", "frequencies must be positive"));
        }
        self.env.validate()?;
        self.ddpg.validate()?;
        self.dqn.validate()?;
        Ok(())
    }
}

fn merge_tables(base: &mut toml::Table, overrides: toml::Table) {
    for (key, value) in overrides {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// One CSV line: slot-averaged metrics of a run at a given round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub seed: u64,
    pub round: u64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub mean_delay: f64,
    pub mean_energy: f64,
}

impl MetricsRow {
    fn from_eval(run_id: &str, seed: u64, round: u64, e: &EvalSummary) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            round,
            mean_reward: e.mean_reward,
            mean_cost: e.mean_cost,
            mean_delay: e.mean_delay,
            mean_energy: e.mean_energy,
        }
    }

    fn from_training(run_id: &str, seed: u64, r: &RoundReport) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Self {
            run_id: run_id.to_string(),
            seed,
            round: r.round + 1,
            mean_reward: r.mean_reward,
            mean_cost: mean(&r.agent_costs),
            mean_delay: mean(&r.agent_delays),
            mean_energy: mean(&r.agent_energies),
        }
    }
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    /// Round for curves; the swept parameter value for sweeps; 0 for final scores.
    pub x: f64,
    pub runs: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl AggregateRow {
    pub fn from_rows(policy: &str, x: f64, rows: &[&MetricsRow]) -> Self {
        let col = |f: fn(&MetricsRow) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (reward_mean, reward_std) = col(|r| r.mean_reward);
        let (cost_mean, cost_std) = col(|r| r.mean_cost);
        let (delay_mean, delay_std) = col(|r| r.mean_delay);
        let (energy_mean, energy_std) = col(|r| r.mean_energy);
        Self {
            policy: policy.to_string(),
            x,
            runs: rows.len(),
            reward_mean,
            reward_std,
            cost_mean,
            cost_std,
            delay_mean,
            delay_std,
            energy_mean,
            energy_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy: PolicyKind,
    pub seed: u64,
    pub run_id: String,
    /// Greedy evaluations; a single round-0 row for fixed policies.
    pub eval: Vec<MetricsRow>,
    /// Training curve, one row per round (empty for fixed policies).
    pub training: Vec<MetricsRow>,
    /// Mean of the evaluations inside the final window.
    pub score: MetricsRow,
}

pub fn run_id(policy: PolicyKind, seed: u64) -> String {
    format!("{}-s{seed}", policy.name())
}

/// Evaluation episode seeds of F-AP `fap` in a run seeded with `run_seed`.
pub fn eval_seeds(run_seed: u64, fap: usize, episodes: usize) -> Vec<u64> {
    (0..episodes)
        .map(|e| seed::derive(run_seed, &[EVAL_STREAM, fap as u64, e as u64]))
        .collect()
}

fn fap_envs(env: &EnvConfig) -> Result<Vec<FranEnv>> {
    (0..env.num_faps).map(|n| FranEnv::new(env.clone(), n)).collect()
}

fn evaluate_fixed(cfg: &ExperimentConfig, policy: PolicyKind, seed: u64) -> Result<EvalSummary> {
    let mut parts = Vec::new();
    for (n, mut env) in fap_envs(&cfg.env)?.into_iter().enumerate() {
        let seeds = eval_seeds(seed, n, cfg.eval_episodes);
        let summary = match policy {
            PolicyKind::Local => evaluate_policy(&mut env, &seeds, |_, s| Ok(local_policy(s)))?,
            PolicyKind::FapEqual => evaluate_policy(&mut env, &seeds, |_, s| Ok(equal_policy(s)))?,
            PolicyKind::Oracle => evaluate_policy(&mut env, &seeds, |e, s| {
                Ok(oracle_slot_optimum(s, e.fap(), e.config())?.action)
            })?,
            learned => {
                return Err(Error::InvalidArgument(format!("{learned} needs training")));
            }
        };
        parts.push(summary);
    }
    Ok(EvalSummary::combine(&parts))
}

fn make_agent(cfg: &ExperimentConfig, policy: PolicyKind, env: &FranEnv, seed: u64) -> Result<Box<dyn Agent>> {
    Ok(match policy {
        PolicyKind::FedDdpg => Box::new(DdpgAgent::for_env(env, cfg.ddpg.clone(), seed)?),
        PolicyKind::FedDqn => Box::new(DqnAgent::for_env(env, cfg.dqn.clone(), seed)?),
        fixed => return Err(Error::InvalidArgument(format!("{fixed} is not a learning agent"))),
    })
}

fn should_eval(cfg: &ExperimentConfig, done: usize) -> bool {
    done + cfg.final_window > cfg.rounds || (cfg.eval_every > 0 && done % cfg.eval_every == 0)
}

fn should_checkpoint(cfg: &ExperimentConfig, done: usize) -> bool {
    done == cfg.rounds || (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0)
}

/// Trains or evaluates a single cell. `checkpoint_dir` receives global-model snapshots.
pub fn run_cell(
    cfg: &ExperimentConfig,
    policy: PolicyKind,
    seed: u64,
    checkpoint_dir: Option<&Path>,
) -> Result<RunResult> {
    let id = run_id(policy, seed);
    if !policy.is_learned() {
        let summary = evaluate_fixed(cfg, policy, seed)?;
        let row = MetricsRow::from_eval(&id, seed, 0, &summary);
        return Ok(RunResult {
            policy,
            seed,
            run_id: id,
            eval: vec![row.clone()],
            training: Vec::new(),
            score: row,
        });
    }
    let mut participants = Vec::with_capacity(cfg.env.num_faps);
    for (n, env) in fap_envs(&cfg.env)?.into_iter().enumerate() {
        let agent = make_agent(cfg, policy, &env, seed::derive(seed, &[AGENT_STREAM, n as u64]))?;
        participants.push(Participant { agent, env });
    }
    let mut fed = Federation::new(
        participants,
        cfg.episodes_per_round,
        seed::derive(seed, &[TRAIN_STREAM]),
    )?;
    let mut eval_envs = fap_envs(&cfg.env)?;
    let seeds: Vec<Vec<u64>> = (0..eval_envs.len())
        .map(|n| eval_seeds(seed, n, cfg.eval_episodes))
        .collect();
    let mut eval = Vec::new();
    let reports = fed.run_training(cfg.rounds, |fed, report| {
        let done = report.round as usize + 1;
        if should_eval(cfg, done) {
            let parts = fed
                .participants()
                .iter()
                .zip(eval_envs.iter_mut())
                .zip(&seeds)
                .map(|((p, env), s)| evaluate_agent(p.agent.as_ref(), env, s))
                .collect::<Result<Vec<_>>>()?;
            let summary = EvalSummary::combine(&parts);
            eval.push(MetricsRow::from_eval(&id, seed, done as u64, &summary));
        }
        if let Some(dir) = checkpoint_dir {
            if should_checkpoint(cfg, done) {
                fed.global().save(&dir.join(format!("{id}-round{done}.fgm")))?;
            }
        }
        Ok(())
    })?;
    let training = reports
        .iter()
        .map(|r| MetricsRow::from_training(&id, seed, r))
        .collect();
    let cutoff = (cfg.rounds - cfg.final_window) as u64;
    let tail: Vec<&MetricsRow> = eval.iter().filter(|r| r.round > cutoff).collect();
    let agg = AggregateRow::from_rows(policy.name(), 0.0, &tail);
    let score = MetricsRow {
        run_id: id.clone(),
        seed,
        round: cfg.rounds as u64,
        mean_reward: agg.reward_mean,
        mean_cost: agg.cost_mean,
        mean_delay: agg.delay_mean,
        mean_energy: agg.energy_mean,
    };
    Ok(RunResult {
        policy,
        seed,
        run_id: id,
        eval,
        training,
        score,
    })
}

/// Runs every (agent, seed) cell of `cfg`, up to `cfg.workers` at a time.
///
/// Results come back in config order regardless of scheduling.
pub fn run_cells(cfg: &ExperimentConfig, checkpoint_dir: Option<&Path>) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let cells: Vec<(PolicyKind, u64)> = cfg
        .agents
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(policy, seed)| run_cell(cfg, policy, seed, checkpoint_dir))
            .collect()
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Per-(policy, round) aggregates across seeds, ordered by policy then round.
pub fn aggregate_curves(results: &[RunResult], pick: fn(&RunResult) -> &[MetricsRow]) -> Vec<AggregateRow> {
    let mut policies: Vec<PolicyKind> = results.iter().map(|r| r.policy).collect();
    policies.sort();
    policies.dedup();
    let mut out = Vec::new();
    for policy in policies {
        let mut rounds: Vec<u64> = results
            .iter()
            .filter(|r| r.policy == policy)
            .flat_map(|r| pick(r).iter().map(|m| m.round))
            .collect();
        rounds.sort_unstable();
        rounds.dedup();
        for round in rounds {
            let rows: Vec<&MetricsRow> = results
                .iter()
                .filter(|r| r.policy == policy)
                .flat_map(|r| pick(r).iter().filter(|m| m.round == round))
                .collect();
            out.push(AggregateRow::from_rows(policy.name(), round as f64, &rows));
        }
    }
    out
}

/// Final-score aggregates across seeds, one row per policy, tagged with `x`.
pub fn aggregate_scores(results: &[RunResult], x: f64) -> Vec<AggregateRow> {
    let mut policies: Vec<PolicyKind> = results.iter().map(|r| r.policy).collect();
    policies.sort();
    policies.dedup();
    policies
        .into_iter()
        .map(|p| {
            let rows: Vec<&MetricsRow> = results
                .iter()
                .filter(|r| r.policy == p)
                .map(|r| &r.score)
                .collect();
            AggregateRow::from_rows(p.name(), x, &rows)
        })
        .collect()
}

fn write_runs(dir: &Path, results: &[RunResult]) -> Result<()> {
    for r in results {
        write_csv(&dir.join(format!("{}.csv", r.run_id)), &r.eval)?;
        if !r.training.is_empty() {
            write_csv(&dir.join(format!("{}-train.csv", r.run_id)), &r.training)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<RunResult>,
    pub summary: Vec<AggregateRow>,
}

/// Runs all cells and writes `<run>.csv`, `<run>-train.csv`, `aggregate.csv`
/// (per round) and `summary.csv` (final scores) under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dir = &cfg.out_dir;
    let ckpt = dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt)?;
    let results = run_cells(cfg, Some(&ckpt))?;
    write_runs(dir, &results)?;
    write_csv(&dir.join("aggregate.csv"), &aggregate_curves(&results, |r| &r.eval))?;
    let summary = aggregate_scores(&results, 0.0);
    write_csv(&dir.join("summary.csv"), &summary)?;
    Ok(ExperimentOutput { results, summary })
}

fn sweep<F>(cfg: &ExperimentConfig, name: &str, points: &[f64], apply: F) -> Result<Vec<AggregateRow>>
where
    F: Fn(&mut ExperimentConfig, f64),
{
    if points.is_empty() {
        return Err(config_error(name, "sweep list is empty"));
    }
    let mut rows = Vec::new();
    for &x in points {
        let mut point = cfg.clone();
        apply(&mut point, x);
        let results = run_cells(&point, None)?;
        write_runs(&cfg.out_dir.join(name).join(format!("{x}")), &results)?;
        rows.extend(aggregate_scores(&results, x));
    }
    write_csv(&cfg.out_dir.join(format!("{name}.csv")), &rows)?;
    Ok(rows)
}

/// Final scores versus MDs per F-AP; writes `sweep_mds.csv`.
pub fn sweep_mds(cfg: &ExperimentConfig) -> Result<Vec<AggregateRow>> {
    let points: Vec<f64> = cfg.mds_sweep.iter().map(|&m| m as f64).collect();
    sweep(cfg, "sweep_mds", &points, |c, x| c.env.mds_per_fap = x as usize)
}

/// Final scores versus F-AP CPU frequency; writes `sweep_fap_cpu.csv`.
pub fn sweep_fap_cpu(cfg: &ExperimentConfig) -> Result<Vec<AggregateRow>> {
    sweep(cfg, "sweep_fap_cpu", &cfg.fap_cpu_sweep.clone(), |c, x| c.env.fap_cpu = x)
}

/// Training-reward curves of the learned agents in `cfg`; writes `convergence.csv`.
pub fn convergence_run(cfg: &ExperimentConfig) -> Result<Vec<AggregateRow>> {
    let mut learned = cfg.clone();
    learned.agents.retain(|a| a.is_learned());
    if learned.agents.is_empty() {
        learned.agents = vec![PolicyKind::FedDdpg, PolicyKind::FedDqn];
    }
    let results = run_cells(&learned, None)?;
    write_runs(&cfg.out_dir.join("convergence"), &results)?;
    let rows = aggregate_curves(&results, |r| &r.training);
    write_csv(&cfg.out_dir.join("convergence.csv"), &rows)?;
    Ok(rows)
}
