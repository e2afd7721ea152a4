//! Per-F-AP actor-critic agent.
//!
//! The actor maps a normalized state to `3M` sigmoid outputs (offload flags,
//! compute shares, bandwidth shares); the environment turns them into a
//! feasible action. Replay stores the actor's raw output so the critic is
//! learned over the same space the policy gradient differentiates.

use fran_nn::{Activation, AdamState, FlatWeights, Mlp, Topology};
use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentKind, EpisodeReport};
use crate::env::FranEnv;
use crate::error::{Error, Result};
use crate::replay::{ReplayBuffer, Transition};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgHyperParams {
    pub gamma: f64,
    pub tau: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_std_initial: f64,
    /// Multiplier applied to the noise scale after every episode.
    pub noise_decay: f64,
    pub noise_std_floor: f64,
    pub hidden: Vec<usize>,
}

impl Default for DdpgHyperParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            tau: 0.001,
            replay_capacity: 20_000,
            batch_size: 64,
            actor_lr: 0.001,
            critic_lr: 0.0001,
            noise_std_initial: 0.2,
            noise_decay: 0.995,
            noise_std_floor: 0.01,
            hidden: vec![300, 100],
        }
    }
}

impl DdpgHyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: format!("ddpg.{field}"),
                reason: reason.to_string(),
            })
        };
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", "must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return bad("batch_size", "must be positive and at most replay_capacity");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("actor_lr", "learning rates must be positive");
        }
        if !(self.noise_std_initial >= 0.0 && self.noise_std_floor >= 0.0) {
            return bad("noise_std_initial", "noise scales must be non-negative");
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return bad("noise_decay", "must lie in (0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        Ok(())
    }
}

pub type DdpgTransition = Transition<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    pub buffer: ReplayBuffer<DdpgTransition>,
    pub hp: DdpgHyperParams,
    noise_std: f64,
    state_dim: usize,
    action_dim: usize,
    rng: ChaCha8Rng,
}

impl DdpgAgent {
    pub fn new(state_dim: usize, action_dim: usize, hp: DdpgHyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let actor_topo = Topology {
            input: state_dim,
            hidden: hp.hidden.clone(),
            output: action_dim,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Sigmoid,
        };
        let critic_topo = Topology {
            input: state_dim + action_dim,
            hidden: hp.hidden.clone(),
            output: 1,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Linear,
        };
        let actor = Mlp::init(&actor_topo, seed::derive(seed, &[1]));
        let critic = Mlp::init(&critic_topo, seed::derive(seed, &[2]));
        Ok(Self {
            actor_opt: AdamState::new(actor.parameter_count(), hp.actor_lr),
            critic_opt: AdamState::new(critic.parameter_count(), hp.critic_lr),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(hp.replay_capacity),
            noise_std: hp.noise_std_initial,
            hp,
            state_dim,
            action_dim,
            rng: ChaCha8Rng::seed_from_u64(seed::derive(seed, &[3])),
        })
    }

    pub fn for_env(env: &FranEnv, hp: DdpgHyperParams, seed: u64) -> Result<Self> {
        Self::new(env.state_dim(), env.action_dim(), hp, seed)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn set_noise_std(&mut self, std: f64) {
        self.noise_std = std;
    }

    /// `π(s) + ζ`, `ζ ~ N(0, σ²)` per coordinate when exploring, clipped to `[0, 1]`.
    pub fn select_action(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut action = self.actor.predict(state)?;
        if explore {
            let noise = Normal::new(0.0, self.noise_std)
                .map_err(|e| Error::InvalidArgument(format!("noise scale: {e}")))?;
            for a in &mut action {
                *a += noise.sample(&mut self.rng);
            }
        }
        for a in &mut action {
            *a = a.clamp(0.0, 1.0);
        }
        Ok(action)
    }

    fn stack(&self, rows: impl Iterator<Item = Vec<f64>>, width: usize, k: usize) -> Result<Array2<f64>> {
        let data: Vec<f64> = rows.flatten().collect();
        Array2::from_shape_vec((k, width), data).map_err(|_| Error::Dimension {
            context: "transition batch",
            expected: k * width,
            got: 0,
        })
    }

    fn batch_arrays(
        &self,
        batch: &[&DdpgTransition],
    ) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>, Array2<f64>)> {
        let k = batch.len();
        for t in batch {
            if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
                return Err(Error::Dimension {
                    context: "transition state",
                    expected: self.state_dim,
                    got: t.state.len(),
                });
            }
            if t.action.len() != self.action_dim {
                return Err(Error::Dimension {
                    context: "transition action",
                    expected: self.action_dim,
                    got: t.action.len(),
                });
            }
        }
        let states = self.stack(batch.iter().map(|t| t.state.clone()), self.state_dim, k)?;
        let actions = self.stack(batch.iter().map(|t| t.action.clone()), self.action_dim, k)?;
        let next = self.stack(batch.iter().map(|t| t.next_state.clone()), self.state_dim, k)?;
        let rewards = batch.iter().map(|t| t.reward).collect();
        Ok((states, actions, rewards, next))
    }

    /// Bootstrapped targets `r + γ·Q'(s', π'(s'))`.
    pub fn critic_targets(&self, batch: &[&DdpgTransition]) -> Result<Vec<f64>> {
        let (_, _, rewards, next) = self.batch_arrays(batch)?;
        self.targets_from(&rewards, &next)
    }

    fn targets_from(&self, rewards: &[f64], next: &Array2<f64>) -> Result<Vec<f64>> {
        let (next_actions, _) = self.target_actor.forward_batch(next.view())?;
        let input = concatenate![Axis(1), *next, next_actions];
        let (q_next, _) = self.target_critic.forward_batch(input.view())?;
        Ok(rewards
            .iter()
            .zip(q_next.column(0))
            .map(|(r, q)| r + self.hp.gamma * q)
            .collect())
    }

    /// One Adam step on the mean squared TD error; returns the loss before the step.
    pub fn critic_update(&mut self, batch: &[&DdpgTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (states, actions, rewards, next) = self.batch_arrays(batch)?;
        let targets = self.targets_from(&rewards, &next)?;
        let input = concatenate![Axis(1), states, actions];
        let (q, cache) = self.critic.forward_batch(input.view())?;
        let k = batch.len() as f64;
        let mut grad = Array2::zeros((batch.len(), 1));
        let mut loss = 0.0;
        for (i, (&y, qi)) in targets.iter().zip(q.column(0)).enumerate() {
            let diff = qi - y;
            loss += diff * diff;
            grad[[i, 0]] = 2.0 * diff / k;
        }
        loss /= k;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("critic loss {loss}")));
        }
        let grads = self.critic.backward(&cache, &grad)?;
        self.critic.adam_step(&grads, &mut self.critic_opt)?;
        Ok(loss)
    }

    /// One Adam ascent step on `mean Q(s, π(s))`; returns the objective before the step.
    pub fn actor_update(&mut self, batch: &[&DdpgTransition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let (states, _, _, _) = self.batch_arrays(batch)?;
        let (policy_actions, actor_cache) = self.actor.forward_batch(states.view())?;
        let input = concatenate![Axis(1), states, policy_actions];
        let (q, critic_cache) = self.critic.forward_batch(input.view())?;
        let k = batch.len() as f64;
        let objective = q.column(0).sum() / k;
        if !objective.is_finite() {
            return Err(Error::Diverged(format!("actor objective {objective}")));
        }
        let dq = Array2::from_elem((batch.len(), 1), 1.0 / k);
        let input_grad = self.critic.input_gradient(&critic_cache, &dq)?;
        // descend on −J: negate dJ/da
        let action_grad = input_grad.slice(s![.., self.state_dim..]).mapv(|g| -g);
        let grads = self.actor.backward(&actor_cache, &action_grad)?;
        self.actor.adam_step(&grads, &mut self.actor_opt)?;
        Ok(objective)
    }

    /// `θ' ← τθ + (1 − τ)θ'` for both target networks.
    pub fn soft_update(&mut self) -> Result<()> {
        self.target_actor.soft_update_from(&self.actor, self.hp.tau)?;
        self.target_critic.soft_update_from(&self.critic, self.hp.tau)?;
        Ok(())
    }

    /// Sample, critic step, actor step, target tracking. `None` while the buffer is underfull.
    pub fn learn_step(&mut self) -> Result<Option<f64>> {
        if self.buffer.len() < self.hp.batch_size {
            return Ok(None);
        }
        let batch: Vec<DdpgTransition> = self
            .buffer
            .sample(&mut self.rng, self.hp.batch_size)?
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&DdpgTransition> = batch.iter().collect();
        let loss = self.critic_update(&refs)?;
        self.actor_update(&refs)?;
        self.soft_update()?;
        Ok(Some(loss))
    }

    fn decay_noise(&mut self) {
        self.noise_std = (self.noise_std * self.hp.noise_decay).max(self.hp.noise_std_floor);
    }

    fn networks(&self) -> [&Mlp; 4] {
        [
            &self.actor,
            &self.critic,
            &self.target_actor,
            &self.target_critic,
        ]
    }
}

impl Agent for DdpgAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Ddpg
    }

    fn train_episode(&mut self, env: &mut FranEnv, seed: u64) -> Result<EpisodeReport> {
        let mut report = EpisodeReport::default();
        let first = env.reset(seed);
        let mut state = env.flatten_state(&first);
        let mut loss_sum = 0.0;
        loop {
            let raw = self.select_action(&state, true)?;
            let step = env.step_raw(&raw)?;
            let next = env.flatten_state(&step.next);
            self.buffer.push(Transition {
                state,
                action: raw,
                reward: step.reward,
                next_state: next.clone(),
            });
            if let Some(loss) = self.learn_step()? {
                loss_sum += loss;
                report.updates += 1;
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
        self.decay_noise();
        Ok(report)
    }

    fn greedy_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.predict(state)?)
    }

    /// Actor, critic, target actor, target critic, in that order.
    fn export_weights(&self) -> FlatWeights {
        FlatWeights::concat(&self.networks().map(|n| n.flatten()))
    }

    fn import_weights(&mut self, weights: &FlatWeights) -> Result<()> {
        let counts = self.networks().map(|n| n.layers().len() * 2);
        let parts = weights.split(&counts)?;
        self.actor.unflatten(&parts[0])?;
        self.critic.unflatten(&parts[1])?;
        self.target_actor.unflatten(&parts[2])?;
        self.target_critic.unflatten(&parts[3])?;
        Ok(())
    }
}
