//! What the federated coordinator and the harness need from a learning agent.

use fran_nn::FlatWeights;
use serde::{Deserialize, Serialize};

use crate::env::{sanitize_action, ActionVector, FranEnv, SlotState};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Ddpg,
    Dqn,
}

impl AgentKind {
    pub fn tag(self) -> u8 {
        match self {
            AgentKind::Ddpg => 0,
            AgentKind::Dqn => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(AgentKind::Ddpg),
            1 => Some(AgentKind::Dqn),
            _ => None,
        }
    }
}

/// Totals of one training episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeReport {
    pub reward_sum: f64,
    pub steps: usize,
    pub updates: usize,
    pub mean_loss: f64,
    pub mean_cost: f64,
    pub mean_delay: f64,
    pub mean_energy: f64,
}

impl EpisodeReport {
    pub fn mean_reward(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.reward_sum / self.steps as f64
        }
    }
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    /// Resets `env` with `seed` and trains through one full episode.
    fn train_episode(&mut self, env: &mut FranEnv, seed: u64) -> Result<EpisodeReport>;

    /// Exploration-free raw action (`3M` values) for a flattened state.
    fn greedy_action(&self, state: &[f64]) -> Result<Vec<f64>>;

    /// Every network this agent shares in a federated round.
    fn export_weights(&self) -> FlatWeights;

    fn import_weights(&mut self, weights: &FlatWeights) -> Result<()>;
}

/// Slot-averaged outcome of running a fixed policy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalSummary {
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub mean_delay: f64,
    pub mean_energy: f64,
    pub slots: usize,
}

impl EvalSummary {
    /// Slot-weighted mean of several summaries.
    pub fn combine(parts: &[EvalSummary]) -> EvalSummary {
        let slots: usize = parts.iter().map(|p| p.slots).sum();
        if slots == 0 {
            return EvalSummary::default();
        }
        let w = |f: fn(&EvalSummary) -> f64| {
            parts.iter().map(|p| f(p) * p.slots as f64).sum::<f64>() / slots as f64
        };
        EvalSummary {
            mean_reward: w(|p| p.mean_reward),
            mean_cost: w(|p| p.mean_cost),
            mean_delay: w(|p| p.mean_delay),
            mean_energy: w(|p| p.mean_energy),
            slots,
        }
    }
}

/// Runs one episode per seed with `policy` and averages over all slots.
pub fn evaluate_policy<P>(env: &mut FranEnv, seeds: &[u64], mut policy: P) -> Result<EvalSummary>
where
    P: FnMut(&FranEnv, &SlotState) -> Result<ActionVector>,
{
    let mut totals = EvalSummary::default();
    for &seed in seeds {
        let mut state = env.reset(seed);
        loop {
            let action = policy(env, &state)?;
            let step = env.step(action)?;
            totals.mean_reward += step.reward;
            totals.mean_cost += step.cost.cost;
            totals.mean_delay += step.cost.total_delay;
            totals.mean_energy += step.cost.total_energy;
            totals.slots += 1;
            state = step.next;
            if step.done {
                break;
            }
        }
    }
    if totals.slots > 0 {
        let n = totals.slots as f64;
        totals.mean_reward /= n;
        totals.mean_cost /= n;
        totals.mean_delay /= n;
        totals.mean_energy /= n;
    }
    Ok(totals)
}

/// Greedy evaluation of a learning agent.
pub fn evaluate_agent<A: Agent + ?Sized>(
    agent: &A,
    env: &mut FranEnv,
    seeds: &[u64],
) -> Result<EvalSummary> {
    evaluate_policy(env, seeds, |env, state| {
        let raw = agent.greedy_action(&env.flatten_state(state))?;
        sanitize_action(&raw, env.num_mds())
    })
}
