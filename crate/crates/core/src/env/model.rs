//! Delay, energy and cost of one slot.

use serde::{Deserialize, Serialize};

use super::action::{ActionVector, ALLOC_FLOOR};
use super::config::EnvConfig;
use crate::error::{Error, Result};

/// Distances below this are clamped before applying the path-loss law.
pub const MIN_DISTANCE: f64 = 1.0;

/// Energy per cycle is this constant times the squared CPU frequency.
pub const ENERGY_COEFF_SCALE: f64 = 1e-27;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSpec {
    pub bits: f64,
    pub cycles: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobileDevice {
    pub id: usize,
    pub position: Point,
    pub cpu_freq: f64,
    pub tx_power: f64,
    pub energy_coeff: f64,
}

impl MobileDevice {
    pub fn new(id: usize, position: Point, cpu_freq: f64, tx_power: f64) -> Self {
        Self {
            id,
            position,
            cpu_freq,
            tx_power,
            energy_coeff: ENERGY_COEFF_SCALE * cpu_freq * cpu_freq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FogAccessPoint {
    pub id: usize,
    pub position: Point,
    pub cpu_freq: f64,
    pub bandwidth: f64,
    pub devices: Vec<MobileDevice>,
}

/// Everything one F-AP observes at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotState {
    pub task_bits: Vec<f64>,
    pub task_cycles: Vec<f64>,
    pub fap_position: Point,
    pub md_positions: Vec<Point>,
    pub channel_gains: Vec<f64>,
}

impl SlotState {
    pub fn num_mds(&self) -> usize {
        self.task_bits.len()
    }

    pub fn task(&self, m: usize) -> TaskSpec {
        TaskSpec {
            bits: self.task_bits[m],
            cycles: self.task_cycles[m],
        }
    }
}

/// Delay and MD energy of one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEnergy {
    pub delay: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub total_delay: f64,
    pub total_energy: f64,
    pub cost: f64,
    pub per_md_delay: Vec<f64>,
    pub per_md_energy: Vec<f64>,
}

/// Path-loss gain `max(d, 1 m)^-alpha`.
pub fn channel_gain(md: Point, fap: Point, alpha: f64) -> f64 {
    md.distance(&fap).max(MIN_DISTANCE).powf(-alpha)
}

pub fn local_cost(task: TaskSpec, md: &MobileDevice) -> DelayEnergy {
    DelayEnergy {
        delay: task.cycles / md.cpu_freq,
        energy: md.energy_coeff * task.cycles,
    }
}

/// Shannon rate over a `share` of the F-AP bandwidth (bits/s).
pub fn uplink_rate(share: f64, bandwidth: f64, power: f64, gain: f64, noise: f64) -> f64 {
    if share == 0.0 {
        return 0.0;
    }
    share * bandwidth * (1.0 + power * gain / noise).log2()
}

/// Cost of running `task` at the F-AP with compute share `y` and bandwidth
/// share `z`. Only MD-side (transmit) energy is counted.
pub fn offload_cost(
    task: TaskSpec,
    md: &MobileDevice,
    fap: &FogAccessPoint,
    compute_share: f64,
    bandwidth_share: f64,
    gain: f64,
    noise: f64,
) -> Result<DelayEnergy> {
    if !(compute_share >= ALLOC_FLOOR) {
        return Err(Error::AllocationFloor {
            name: "compute_share",
            value: compute_share,
            floor: ALLOC_FLOOR,
        });
    }
    if !(bandwidth_share >= ALLOC_FLOOR) {
        return Err(Error::AllocationFloor {
            name: "bandwidth_share",
            value: bandwidth_share,
            floor: ALLOC_FLOOR,
        });
    }
    let compute_delay = task.cycles / (compute_share * fap.cpu_freq);
    let rate = uplink_rate(bandwidth_share, fap.bandwidth, md.tx_power, gain, noise);
    let tx_delay = task.bits / rate;
    Ok(DelayEnergy {
        delay: compute_delay + tx_delay,
        energy: md.tx_power * tx_delay,
    })
}

/// Weighted delay + energy of all MDs under one F-AP for one slot.
pub fn slot_cost(
    state: &SlotState,
    action: &ActionVector,
    fap: &FogAccessPoint,
    config: &EnvConfig,
) -> Result<CostBreakdown> {
    let m = fap.devices.len();
    if state.num_mds() != m
        || state.task_cycles.len() != m
        || state.channel_gains.len() != m
    {
        return Err(Error::Dimension {
            context: "slot state",
            expected: m,
            got: state.num_mds(),
        });
    }
    action.validate(m)?;

    let mut per_md_delay = Vec::with_capacity(m);
    let mut per_md_energy = Vec::with_capacity(m);
    for (i, md) in fap.devices.iter().enumerate() {
        let task = state.task(i);
        let outcome = if action.offload[i] {
            offload_cost(
                task,
                md,
                fap,
                action.compute_share[i],
                action.bandwidth_share[i],
                state.channel_gains[i],
                config.noise_power,
            )?
        } else {
            local_cost(task, md)
        };
        per_md_delay.push(outcome.delay);
        per_md_energy.push(outcome.energy);
    }
    let total_delay: f64 = per_md_delay.iter().sum();
    let total_energy: f64 = per_md_energy.iter().sum();
    Ok(CostBreakdown {
        total_delay,
        total_energy,
        cost: config.weight_delay * total_delay + config.weight_energy * total_energy,
        per_md_delay,
        per_md_energy,
    })
}
