//! F-RAN system model exposed as an episodic environment, one instance per F-AP.
//!
//! Each F-AP serves `M` mobile devices inside a square cell with the F-AP
//! at its center. At every slot each MD draws a fresh task, reports it with
//! its position, and the agent answers with an offloading decision plus
//! compute/bandwidth shares. The reward is the negative per-MD slot cost.
//! Between slots MDs take a bounded random walk reflected at the cell walls.

mod action;
mod config;
mod model;

pub use action::{sanitize_action, ActionVector, ALLOC_FLOOR, OFFLOAD_THRESHOLD, SUM_TOLERANCE};
pub use config::{EnvConfig, Interval, BITS_PER_KB};
pub use model::{
    channel_gain, local_cost, offload_cost, slot_cost, uplink_rate, CostBreakdown, DelayEnergy,
    FogAccessPoint, MobileDevice, Point, SlotState, TaskSpec, ENERGY_COEFF_SCALE, MIN_DISTANCE,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Result of one environment transition.
#[derive(Debug, Clone)]
pub struct Step {
    pub reward: f64,
    pub cost: CostBreakdown,
    pub action: ActionVector,
    pub next: SlotState,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct FranEnv {
    config: EnvConfig,
    fap: FogAccessPoint,
    rng: ChaCha8Rng,
    state: Option<SlotState>,
    slot: usize,
}

impl FranEnv {
    pub fn new(config: EnvConfig, fap_id: usize) -> Result<Self> {
        config.validate()?;
        let center = config.cell_side / 2.0;
        let fap = FogAccessPoint {
            id: fap_id,
            position: Point::new(center, center),
            cpu_freq: config.fap_cpu,
            bandwidth: config.bandwidth,
            devices: Vec::new(),
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            fap,
            state: None,
            slot: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn fap(&self) -> &FogAccessPoint {
        &self.fap
    }

    pub fn state(&self) -> Option<&SlotState> {
        self.state.as_ref()
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.state.is_some() && self.slot >= self.config.steps_per_episode
    }

    pub fn num_mds(&self) -> usize {
        self.config.mds_per_fap
    }

    pub fn state_dim(&self) -> usize {
        self.config.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.config.action_dim()
    }

    /// Starts a new episode: re-draws every MD (position, CPU, power) and the first tasks.
    pub fn reset(&mut self, seed: u64) -> SlotState {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.config;
        let side = cfg.cell_side;
        let mut devices = Vec::with_capacity(cfg.mds_per_fap);
        for id in 0..cfg.mds_per_fap {
            let position = Point::new(
                self.rng.random_range(0.0..=side),
                self.rng.random_range(0.0..=side),
            );
            let cpu = self
                .rng
                .random_range(cfg.md_cpu_range.min()..=cfg.md_cpu_range.max());
            let power = self
                .rng
                .random_range(cfg.md_power_range.min()..=cfg.md_power_range.max());
            devices.push(MobileDevice::new(id, position, cpu, power));
        }
        self.fap.devices = devices;
        self.slot = 0;
        let state = self.observe();
        self.state = Some(state.clone());
        state
    }

    /// Projects a raw agent output onto the feasible set, then steps.
    pub fn step_raw(&mut self, raw: &[f64]) -> Result<Step> {
        let action = sanitize_action(raw, self.num_mds())?;
        self.step(action)
    }

    pub fn step(&mut self, action: ActionVector) -> Result<Step> {
        let state = self
            .state
            .as_ref()
            .ok_or(Error::Lifecycle("step called before reset"))?;
        if self.slot >= self.config.steps_per_episode {
            return Err(Error::Lifecycle("step called after the episode ended"));
        }
        let cost = slot_cost(state, &action, &self.fap, &self.config)?;
        let reward = -cost.cost / self.num_mds() as f64;

        self.move_devices();
        self.slot += 1;
        let next = self.observe();
        self.state = Some(next.clone());
        Ok(Step {
            reward,
            cost,
            action,
            next,
            done: self.slot >= self.config.steps_per_episode,
        })
    }

    /// Draws new tasks for the current positions.
    fn observe(&mut self) -> SlotState {
        let cfg = &self.config;
        let m = cfg.mds_per_fap;
        let mut task_bits = Vec::with_capacity(m);
        let mut task_cycles = Vec::with_capacity(m);
        for _ in 0..m {
            let bits = self
                .rng
                .random_range(cfg.task_bits_range.min()..=cfg.task_bits_range.max());
            let cycles_per_bit = self
                .rng
                .random_range(cfg.cycles_per_bit_range.min()..=cfg.cycles_per_bit_range.max());
            task_bits.push(bits);
            task_cycles.push(bits * cycles_per_bit);
        }
        let md_positions: Vec<Point> = self.fap.devices.iter().map(|d| d.position).collect();
        let channel_gains = md_positions
            .iter()
            .map(|&p| channel_gain(p, self.fap.position, cfg.path_loss_alpha))
            .collect();
        SlotState {
            task_bits,
            task_cycles,
            fap_position: self.fap.position,
            md_positions,
            channel_gains,
        }
    }

    fn move_devices(&mut self) {
        let side = self.config.cell_side;
        let max_step = self.config.mobility_step;
        for device in &mut self.fap.devices {
            let distance = self.rng.random_range(0.0..=max_step);
            let heading = self.rng.random_range(0.0..std::f64::consts::TAU);
            device.position = Point::new(
                reflect(device.position.x + distance * heading.cos(), side),
                reflect(device.position.y + distance * heading.sin(), side),
            );
        }
    }

    pub fn flatten_state(&self, state: &SlotState) -> Vec<f64> {
        flatten_state(state, &self.config)
    }
}

/// Folds a coordinate back into `[0, side]` as if bouncing off the walls.
fn reflect(v: f64, side: f64) -> f64 {
    let period = 2.0 * side;
    let r = v.rem_euclid(period);
    if r > side {
        period - r
    } else {
        r
    }
}

/// Normalized state vector `[B, D, F-AP xy, MD xy…, G]` of length `5M + 2`.
///
/// Bits and cycles are divided by their largest possible values, positions
/// by the cell side and gains by the gain at the clamp distance, so every
/// feature lies in `[0, 1]`.
pub fn flatten_state(state: &SlotState, config: &EnvConfig) -> Vec<f64> {
    let m = state.num_mds();
    let bits_scale = config.task_bits_range.max();
    let cycles_scale = config.max_task_cycles();
    let side = config.cell_side;
    let gain_scale = MIN_DISTANCE.powf(-config.path_loss_alpha);
    let mut out = Vec::with_capacity(5 * m + 2);
    out.extend(state.task_bits.iter().map(|b| b / bits_scale));
    out.extend(state.task_cycles.iter().map(|d| d / cycles_scale));
    out.push(state.fap_position.x / side);
    out.push(state.fap_position.y / side);
    for p in &state.md_positions {
        out.push(p.x / side);
        out.push(p.y / side);
    }
    out.extend(state.channel_gains.iter().map(|g| g / gain_scale));
    out
}
