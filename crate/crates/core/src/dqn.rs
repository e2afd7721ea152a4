//! Value-based baseline over a discretized action space.
//!
//! Each MD picks one of 26 options: run locally, or offload with compute and
//! bandwidth shares on a 5-level grid (`k/5`, `k = 1..=5`). A joint table
//! would have `26^M` entries, so the network has one 26-wide head per MD on
//! a shared trunk, and every head is trained against its own max-target.

use fran_nn::{Activation, AdamState, FlatWeights, Mlp, Topology};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentKind, EpisodeReport};
use crate::env::FranEnv;
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::seed;

/// Share levels per resource.
pub const LEVELS: usize = 5;

/// Options per MD: local plus every (compute, bandwidth) level pair.
pub const ACTIONS_PER_MD: usize = 1 + LEVELS * LEVELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdChoice {
    Local,
    /// Levels are in `1..=LEVELS`; the share is `level / LEVELS`.
    Offload { compute: usize, bandwidth: usize },
}

impl MdChoice {
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(MdChoice::Local),
            i if i < ACTIONS_PER_MD => Ok(MdChoice::Offload {
                compute: (i - 1) / LEVELS + 1,
                bandwidth: (i - 1) % LEVELS + 1,
            }),
            i => Err(Error::InvalidArgument(format!(
                "action index {i} out of range 0..{ACTIONS_PER_MD}"
            ))),
        }
    }

    pub fn index(self) -> usize {
        match self {
            MdChoice::Local => 0,
            MdChoice::Offload { compute, bandwidth } => 1 + (compute - 1) * LEVELS + (bandwidth - 1),
        }
    }
}

/// Raw action vector (`[x…, y…, z…]`) for one index per MD.
pub fn decode(indices: &[usize]) -> Result<Vec<f64>> {
    let m = indices.len();
    let mut raw = vec![0.0; 3 * m];
    for (i, &idx) in indices.iter().enumerate() {
        if let MdChoice::Offload { compute, bandwidth } = MdChoice::from_index(idx)? {
            raw[i] = 1.0;
            raw[m + i] = compute as f64 / LEVELS as f64;
            raw[2 * m + i] = bandwidth as f64 / LEVELS as f64;
        }
    }
    Ok(raw)
}

/// Inverse of [`decode`] on its image.
pub fn encode(raw: &[f64]) -> Result<Vec<usize>> {
    if raw.len() % 3 != 0 {
        return Err(Error::Dimension {
            context: "raw action",
            expected: 3 * (raw.len() / 3 + 1),
            got: raw.len(),
        });
    }
    let m = raw.len() / 3;
    (0..m)
        .map(|i| {
            if raw[i] <= 0.5 {
                return Ok(MdChoice::Local.index());
            }
            let level = |v: f64| -> Result<usize> {
                let l = (v * LEVELS as f64).round();
                if (1.0..=LEVELS as f64).contains(&l) {
                    Ok(l as usize)
                } else {
                    Err(Error::InvalidArgument(format!("share {v} is not on the level grid")))
                }
            };
            Ok(MdChoice::Offload {
                compute: level(raw[m + i])?,
                bandwidth: level(raw[2 * m + i])?,
            }
            .index())
        })
        .collect()
}

/// Lowest index among the maxima.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnHyperParams {
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub epsilon_start: f64,
    /// Multiplier applied to ε after every episode.
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Environment steps between hard target syncs.
    pub target_sync_steps: usize,
    pub hidden: Vec<usize>,
}

impl Default for DqnHyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            replay_capacity: 20_000,
            batch_size: 64,
            lr: 0.001,
            epsilon_start: 1.0,
            epsilon_decay: 0.995,
            epsilon_floor: 0.05,
            target_sync_steps: 100,
            hidden: vec![300, 100],
        }
    }
}

impl DqnHyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: format!("dqn.{field}"),
                reason: reason.to_string(),
            })
        };
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return bad("batch_size", "must be positive and at most replay_capacity");
        }
        if !(self.lr > 0.0) {
            return bad("lr", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_floor)
        {
            return bad("epsilon_start", "exploration rates must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay", "must lie in (0, 1]");
        }
        if self.target_sync_steps == 0 {
            return bad("target_sync_steps", "must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        Ok(())
    }
}

pub type DqnTransition = Transition<Vec<usize>>;

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub q: Mlp,
    pub target_q: Mlp,
    opt: AdamState,
    pub buffer: ReplayBuffer<DqnTransition>,
    pub hp: DqnHyperParams,
    epsilon: f64,
    num_mds: usize,
    state_dim: usize,
    steps: u64,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(state_dim: usize, num_mds: usize, hp: DqnHyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let topo = Topology {
            input: state_dim,
            hidden: hp.hidden.clone(),
            output: ACTIONS_PER_MD * num_mds,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Linear,
        };
        let q = Mlp::init(&topo, seed::derive(seed, &[1]));
        Ok(Self {
            opt: AdamState::new(q.parameter_count(), hp.lr),
            target_q: q.clone(),
            q,
            buffer: ReplayBuffer::new(hp.replay_capacity),
            epsilon: hp.epsilon_start,
            hp,
            num_mds,
            state_dim,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(seed::derive(seed, &[3])),
        })
    }

    pub fn for_env(env: &FranEnv, hp: DqnHyperParams, seed: u64) -> Result<Self> {
        Self::new(env.state_dim(), env.num_mds(), hp, seed)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    fn greedy_indices(&self, q_values: &[f64]) -> Vec<usize> {
        q_values.chunks(ACTIONS_PER_MD).map(argmax).collect()
    }

    /// ε-greedy per head: uniform index with probability ε, otherwise the head's argmax.
    pub fn select(&mut self, state: &[f64], epsilon: f64) -> Result<Vec<usize>> {
        let q = self.q.predict(state)?;
        let greedy = self.greedy_indices(&q);
        Ok(greedy
            .into_iter()
            .map(|g| {
                if self.rng.random::<f64>() < epsilon {
                    self.rng.random_range(0..ACTIONS_PER_MD)
                } else {
                    g
                }
            })
            .collect())
    }

    /// Per-head targets `r + γ·max_a Q'_h(s', a)`, row-major `K × M`.
    pub fn td_targets(&self, batch: &[&DqnTransition]) -> Result<Array2<f64>> {
        let next = stack(batch.iter().map(|t| &t.next_state), self.state_dim)?;
        let (q_next, _) = self.target_q.forward_batch(next.view())?;
        let mut targets = Array2::zeros((batch.len(), self.num_mds));
        for (i, t) in batch.iter().enumerate() {
            let row = q_next.row(i);
            let row = row.as_slice().expect("standard layout");
            for h in 0..self.num_mds {
                let best = row[h * ACTIONS_PER_MD..(h + 1) * ACTIONS_PER_MD]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                targets[[i, h]] = t.reward + self.hp.gamma * best;
            }
        }
        Ok(targets)
    }

    /// One Adam step on the summed per-head squared TD error (batch mean).
    pub fn td_update(&mut self, batch: &[&DqnTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        for t in batch {
            if t.action.len() != self.num_mds || t.action.iter().any(|&a| a >= ACTIONS_PER_MD) {
                return Err(Error::InvalidArgument("transition action outside the table".into()));
            }
        }
        let targets = self.td_targets(batch)?;
        let states = stack(batch.iter().map(|t| &t.state), self.state_dim)?;
        let (q, cache) = self.q.forward_batch(states.view())?;
        let k = batch.len() as f64;
        let mut grad = Array2::zeros(q.dim());
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            for (h, &a) in t.action.iter().enumerate() {
                let col = h * ACTIONS_PER_MD + a;
                let diff = q[[i, col]] - targets[[i, h]];
                loss += diff * diff;
                grad[[i, col]] = 2.0 * diff / k;
            }
        }
        loss /= k;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("td loss {loss}")));
        }
        let grads = self.q.backward(&cache, &grad)?;
        self.q.adam_step(&grads, &mut self.opt)?;
        Ok(loss)
    }

    pub fn sync_target(&mut self) -> Result<()> {
        self.target_q.copy_from(&self.q)?;
        Ok(())
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, width: usize) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        if r.len() != width {
            return Err(Error::Dimension {
                context: "transition state",
                expected: width,
                got: r.len(),
            });
        }
        data.extend_from_slice(r);
        n += 1;
    }
    Ok(Array2::from_shape_vec((n, width), data).expect("rows checked"))
}

impl Agent for DqnAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Dqn
    }

    fn train_episode(&mut self, env: &mut FranEnv, seed: u64) -> Result<EpisodeReport> {
        let mut report = EpisodeReport::default();
        let first = env.reset(seed);
        let mut state = env.flatten_state(&first);
        let mut loss_sum = 0.0;
        loop {
            let indices = self.select(&state, self.epsilon)?;
            let step = env.step_raw(&decode(&indices)?)?;
            let next = env.flatten_state(&step.next);
            self.buffer.push(Transition {
                state,
                action: indices,
                reward: step.reward,
                next_state: next.clone(),
            });
            if self.buffer.len() >= self.hp.batch_size {
                let batch: Vec<DqnTransition> = self
                    .buffer
                    .sample(&mut self.rng, self.hp.batch_size)?
                    .into_iter()
                    .cloned()
                    .collect();
                let refs: Vec<&DqnTransition> = batch.iter().collect();
                loss_sum += self.td_update(&refs)?;
                report.updates += 1;
            }
            self.steps += 1;
            if self.steps % self.hp.target_sync_steps as u64 == 0 {
                self.sync_target()?;
            }
            report.reward_sum += step.reward;
            report.mean_cost += step.cost.cost;
            report.mean_delay += step.cost.total_delay;
            report.mean_energy += step.cost.total_energy;
            report.steps += 1;
            state = next;
            if step.done {
                break;
            }
        }
        let n = report.steps.max(1) as f64;
        report.mean_cost /= n;
        report.mean_delay /= n;
        report.mean_energy /= n;
        report.mean_loss = if report.updates > 0 {
            loss_sum / report.updates as f64
        } else {
            0.0
        };
        self.epsilon = (self.epsilon * self.hp.epsilon_decay).max(self.hp.epsilon_floor);
        Ok(report)
    }

    fn greedy_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let q = self.q.predict(state)?;
        decode(&self.greedy_indices(&q))
    }

    /// Online network then target network.
    fn export_weights(&self) -> FlatWeights {
        FlatWeights::concat(&[self.q.flatten(), self.target_q.flatten()])
    }

    fn import_weights(&mut self, weights: &FlatWeights) -> Result<()> {
        let n = self.q.layers().len() * 2;
        let parts = weights.split(&[n, n])?;
        self.q.unflatten(&parts[0])?;
        self.target_q.unflatten(&parts[1])?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sanitize_action, EnvConfig};

    fn small_hp() -> DqnHyperParams {
        DqnHyperParams {
            hidden: vec![16, 8],
            batch_size: 4,
            replay_capacity: 100,
            ..DqnHyperParams::default()
        }
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode(&[0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let idx = MdChoice::Offload {
            compute: 3,
            bandwidth: 5,
        }
        .index();
        assert_eq!(decode(&[idx]).unwrap(), vec![1.0, 0.6, 1.0]);
        assert!(decode(&[ACTIONS_PER_MD]).is_err());
    }

    #[test]
    fn full_levels_are_normalized_by_sanitize() {
        let top = MdChoice::Offload {
            compute: 5,
            bandwidth: 5,
        }
        .index();
        let raw = decode(&[top; 5]).unwrap();
        let a = sanitize_action(&raw, 5).unwrap();
        for y in &a.compute_share {
            assert!((y - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_inverts_decode_on_every_index() {
        for i in 0..ACTIONS_PER_MD {
            for j in [0, 7, 25] {
                let raw = decode(&[i, j]).unwrap();
                assert_eq!(encode(&raw).unwrap(), vec![i, j]);
                sanitize_action(&raw, 2).unwrap().validate(2).unwrap();
            }
        }
        assert_eq!(ACTIONS_PER_MD, 26);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0]), 0);
    }

    #[test]
    fn greedy_is_affine_invariant() {
        let agent = DqnAgent::new(4, 2, small_hp(), 0).unwrap();
        let q = agent.q.predict(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let shifted: Vec<f64> = q.iter().map(|v| 3.0 * v + 7.0).collect();
        assert_eq!(agent.greedy_indices(&q), agent.greedy_indices(&shifted));
    }

    #[test]
    fn zero_epsilon_is_deterministic_argmax() {
        let mut agent = DqnAgent::new(4, 3, small_hp(), 1).unwrap();
        let s = [0.4, 0.3, 0.2, 0.1];
        let q = agent.q.predict(&s).unwrap();
        let expected = agent.greedy_indices(&q);
        for _ in 0..5 {
            assert_eq!(agent.select(&s, 0.0).unwrap(), expected);
        }
        assert_eq!(agent.greedy_action(&s).unwrap(), decode(&expected).unwrap());
    }

    #[test]
    fn output_width_is_heads_times_table() {
        let agent = DqnAgent::new(17, 3, small_hp(), 1).unwrap();
        assert_eq!(agent.q.output_dim(), 78);
    }

    #[test]
    fn zero_gamma_target_is_reward() {
        let mut agent = DqnAgent::new(2, 2, small_hp(), 2).unwrap();
        agent.hp.gamma = 0.0;
        let t = Transition {
            state: vec![0.1, 0.2],
            action: vec![0, 3],
            reward: -0.75,
            next_state: vec![0.5, 0.5],
        };
        let y = agent.td_targets(&[&t]).unwrap();
        assert!(y.iter().all(|&v| v == -0.75));
    }

    #[test]
    fn synced_target_matches_online() {
        let mut agent = DqnAgent::new(3, 2, small_hp(), 3).unwrap();
        let t = Transition {
            state: vec![0.1, 0.2, 0.3],
            action: vec![1, 25],
            reward: -1.0,
            next_state: vec![0.3, 0.2, 0.1],
        };
        agent.td_update(&[&t, &t]).unwrap();
        assert_ne!(agent.q, agent.target_q);
        agent.sync_target().unwrap();
        let s = [0.9, 0.8, 0.7];
        assert_eq!(agent.q.predict(&s).unwrap(), agent.target_q.predict(&s).unwrap());
    }

    #[test]
    fn episode_is_reproducible_and_decays_epsilon() {
        let run = || {
            let cfg = EnvConfig {
                mds_per_fap: 2,
                steps_per_episode: 20,
                ..EnvConfig::default()
            };
            let mut env = FranEnv::new(cfg, 0).unwrap();
            let mut agent = DqnAgent::for_env(&env, small_hp(), 4).unwrap();
            let r = agent.train_episode(&mut env, 8).unwrap();
            (r, agent.export_weights(), agent.epsilon())
        };
        let (r, w, eps) = run();
        assert_eq!((r.clone(), w), {
            let (r2, w2, _) = run();
            (r2, w2)
        });
        assert!(r.updates > 0);
        assert!((eps - 0.995).abs() < 1e-15);
    }

    #[test]
    fn weights_round_trip_through_export() {
        let a = DqnAgent::new(5, 2, small_hp(), 5).unwrap();
        let mut b = DqnAgent::new(5, 2, small_hp(), 6).unwrap();
        b.import_weights(&a.export_weights()).unwrap();
        assert_eq!(b.q, a.q);
        assert_eq!(b.target_q, a.target_q);
    }

    #[test]
    fn full_exploration_is_uniform_per_head() {
        let mut agent = DqnAgent::new(3, 1, small_hp(), 7).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; ACTIONS_PER_MD];
        for _ in 0..draws {
            counts[agent.select(&[0.2, 0.4, 0.6], 1.0).unwrap()[0]] += 1;
        }
        let p = 1.0 / ACTIONS_PER_MD as f64;
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma, "index {i} drawn {c} times");
        }
    }

    #[test]
    fn td_loss_falls_on_a_frozen_batch() {
        let mut agent = DqnAgent::new(4, 2, small_hp(), 8).unwrap();
        let batch: Vec<DqnTransition> = (0..16)
            .map(|i| {
                let f = i as f64 / 16.0;
                Transition {
                    state: vec![f, 1.0 - f, 0.5, f * f],
                    action: vec![i % ACTIONS_PER_MD, (3 * i) % ACTIONS_PER_MD],
                    reward: -f,
                    next_state: vec![1.0 - f, f, 0.25, f],
                }
            })
            .collect();
        let refs: Vec<&DqnTransition> = batch.iter().collect();
        let losses: Vec<f64> = (0..100).map(|_| agent.td_update(&refs).unwrap()).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0], "loss rose from {} to {}", w[0], w[1]);
        }
        assert!(losses[99] < losses[0]);
    }
}
