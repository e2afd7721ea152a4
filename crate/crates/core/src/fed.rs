//! Synchronous federated training across F-AP agents.
//!
//! Each round every participant loads the global weights, trains locally on
//! its own environment, and uploads its weights. The coordinator averages
//! the uploads and broadcasts the result. Replay buffers and optimizer state
//! never leave the participant.

use std::io::{Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use fran_nn::FlatWeights;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::agent::{Agent, AgentKind};
use crate::env::FranEnv;
use crate::error::{Error, Result};
use crate::seed;

/// Element-wise mean of `locals`.
///
/// Computed as `x₀ + Σ(xᵢ − x₀)/N` so that a single upload and a set of
/// identical uploads both come back bit-exact.
pub fn federated_average(locals: &[FlatWeights]) -> Result<FlatWeights> {
    let first = locals
        .first()
        .ok_or_else(|| Error::InvalidArgument("federated average of zero uploads".into()))?;
    first.validate()?;
    for (i, w) in locals.iter().enumerate().skip(1) {
        if !w.same_layout(first) {
            return Err(Error::InvalidArgument(format!(
                "upload {i} has a different weight layout"
            )));
        }
    }
    if locals.len() == 1 {
        return Ok(first.clone());
    }
    let n = locals.len() as f64;
    let mut out = first.clone();
    for (k, v) in out.values.iter_mut().enumerate() {
        let base = *v;
        let drift: f64 = locals[1..].iter().map(|w| w.values[k] - base).sum();
        *v = base + drift / n;
    }
    Ok(out)
}

/// What a participant sends to the coordinator: its index and its weights, nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct Upload {
    pub agent: usize,
    pub weights: FlatWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub weights: FlatWeights,
    pub round: u64,
    pub kind: AgentKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// Zero-based index of the completed round.
    pub round: u64,
    /// Mean per-step training reward of each agent this round.
    pub agent_rewards: Vec<f64>,
    pub agent_costs: Vec<f64>,
    pub agent_delays: Vec<f64>,
    pub agent_energies: Vec<f64>,
    pub mean_reward: f64,
    pub wall_time: Duration,
}

pub struct Participant {
    pub agent: Box<dyn Agent>,
    pub env: FranEnv,
}

pub struct Federation {
    participants: Vec<Participant>,
    global: GlobalModel,
    episodes_per_round: usize,
    seed: u64,
}

impl Federation {
    /// All participants start from the first agent's weights.
    pub fn new(mut participants: Vec<Participant>, episodes_per_round: usize, seed: u64) -> Result<Self> {
        let first = participants
            .first()
            .ok_or_else(|| Error::InvalidArgument("federation needs at least one agent".into()))?;
        let kind = first.agent.kind();
        let weights = first.agent.export_weights();
        for (i, p) in participants.iter_mut().enumerate() {
            if p.agent.kind() != kind {
                return Err(Error::InvalidArgument(format!(
                    "agent {i} is {:?}, expected {:?}",
                    p.agent.kind(),
                    kind
                )));
            }
            p.agent.import_weights(&weights)?;
        }
        Ok(Self {
            participants,
            global: GlobalModel {
                weights,
                round: 0,
                kind,
            },
            episodes_per_round,
            seed,
        })
    }

    pub fn global(&self) -> &GlobalModel {
        &self.global
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn participants_mut(&mut self) -> &mut [Participant] {
        &mut self.participants
    }

    /// One synchronous round; any agent error aborts it before averaging.
    pub fn run_round(&mut self) -> Result<RoundReport> {
        let started = Instant::now();
        let round = self.global.round;
        let global = &self.global.weights;
        let episodes = self.episodes_per_round;
        let base = self.seed;
        let results: Vec<Result<(Upload, [f64; 4])>> = self
            .participants
            .par_iter_mut()
            .enumerate()
            .map(|(i, p)| {
                let wrap = |e: Error| Error::Round {
                    round,
                    agent: i,
                    source: Box::new(e),
                };
                p.agent.import_weights(global).map_err(wrap)?;
                // Step-weighted sums of reward, cost, delay, energy.
                let mut sums = [0.0; 4];
                let mut steps = 0usize;
                for e in 0..episodes {
                    let s = seed::derive(base, &[round, i as u64, e as u64]);
                    let r = p.agent.train_episode(&mut p.env, s).map_err(wrap)?;
                    let n = r.steps as f64;
                    sums[0] += r.reward_sum;
                    sums[1] += r.mean_cost * n;
                    sums[2] += r.mean_delay * n;
                    sums[3] += r.mean_energy * n;
                    steps += r.steps;
                }
                let steps = steps.max(1) as f64;
                Ok((
                    Upload {
                        agent: i,
                        weights: p.agent.export_weights(),
                    },
                    sums.map(|v| v / steps),
                ))
            })
            .collect();
        let mut uploads = Vec::with_capacity(results.len());
        let mut agent_rewards = Vec::with_capacity(results.len());
        let mut agent_costs = Vec::with_capacity(results.len());
        let mut agent_delays = Vec::with_capacity(results.len());
        let mut agent_energies = Vec::with_capacity(results.len());
        for r in results {
            let (u, [reward, cost, delay, energy]) = r?;
            uploads.push(u.weights);
            agent_rewards.push(reward);
            agent_costs.push(cost);
            agent_delays.push(delay);
            agent_energies.push(energy);
        }
        let averaged = federated_average(&uploads)?;
        for p in &mut self.participants {
            p.agent.import_weights(&averaged)?;
        }
        self.global.weights = averaged;
        self.global.round += 1;
        let mean_reward = agent_rewards.iter().sum::<f64>() / agent_rewards.len() as f64;
        Ok(RoundReport {
            round,
            agent_rewards,
            agent_costs,
            agent_delays,
            agent_energies,
            mean_reward,
            wall_time: started.elapsed(),
        })
    }

    /// Runs `rounds` rounds, calling `after_round` once each round has been broadcast.
    pub fn run_training<F>(&mut self, rounds: usize, mut after_round: F) -> Result<Vec<RoundReport>>
    where
        F: FnMut(&mut Federation, &RoundReport) -> Result<()>,
    {
        let mut reports = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let report = self.run_round()?;
            after_round(self, &report)?;
            reports.push(report);
        }
        Ok(reports)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FRGM";
const CHECKPOINT_VERSION: u32 = 1;

/// SHA-256 over the tensor shapes and offsets.
pub fn layout_hash(weights: &FlatWeights) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in &weights.layout {
        h.update((t.rows as u64).to_le_bytes());
        h.update((t.cols as u64).to_le_bytes());
        h.update((t.offset as u64).to_le_bytes());
    }
    h.finalize().into()
}

impl GlobalModel {
    /// Header (magic, version, round, kind tag, layout hash) followed by the weight file.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&self.round.to_le_bytes())?;
        w.write_all(&[self.kind.tag()])?;
        w.write_all(&layout_hash(&self.weights))?;
        self.weights.write_to(&mut w)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::InvalidArgument("not a global-model checkpoint".into()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let round = u64::from_le_bytes(u64buf);
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let kind = AgentKind::from_tag(tag[0])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown agent kind tag {}", tag[0])))?;
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        let weights = FlatWeights::read_from(&mut r)?;
        if layout_hash(&weights) != hash {
            return Err(Error::InvalidArgument("checkpoint layout hash mismatch".into()));
        }
        Ok(Self {
            weights,
            round,
            kind,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
