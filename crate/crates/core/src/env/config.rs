use serde::{Deserialize, Serialize};

use crate::error::{config_error, Result};

/// Decimal kilobyte, used to express task sizes.
pub const BITS_PER_KB: f64 = 8000.0;

/// Closed interval `[min, max]`, written as a two-element array in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn min(&self) -> f64 {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.1
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.0 && v <= self.1
    }

    fn check(&self, field: &str) -> Result<()> {
        if !(self.0.is_finite() && self.1.is_finite()) {
            return Err(config_error(field, "bounds must be finite"));
        }
        if self.0 > self.1 {
            return Err(config_error(field, format!("min {} exceeds max {}", self.0, self.1)));
        }
        if self.0 <= 0.0 {
            return Err(config_error(field, "bounds must be positive"));
        }
        Ok(())
    }
}

/// Physical and episodic parameters of the F-RAN. Units are SI (m, Hz, W, s, bits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_faps: usize,
    pub mds_per_fap: usize,
    pub cell_side: f64,
    pub bandwidth: f64,
    pub fap_cpu: f64,
    pub md_cpu_range: Interval,
    pub md_power_range: Interval,
    pub noise_power: f64,
    pub path_loss_alpha: f64,
    pub task_bits_range: Interval,
    pub cycles_per_bit_range: Interval,
    pub weight_delay: f64,
    pub weight_energy: f64,
    pub slot_duration: f64,
    pub steps_per_episode: usize,
    pub rng_seed: u64,
    /// Largest distance an MD can walk in one slot.
    pub mobility_step: f64,
    /// Recorded only; no cost term depends on the antenna count.
    pub fap_antennas: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_faps: 2,
            mds_per_fap: 3,
            cell_side: 200.0,
            bandwidth: 1e7,
            fap_cpu: 5e9,
            md_cpu_range: Interval(1e9, 2e9),
            md_power_range: Interval(0.1, 1.0),
            noise_power: 1e-13,
            path_loss_alpha: 4.0,
            task_bits_range: Interval(200.0 * BITS_PER_KB, 300.0 * BITS_PER_KB),
            cycles_per_bit_range: Interval(200.0, 500.0),
            weight_delay: 0.5,
            weight_energy: 0.5,
            slot_duration: 1.0,
            steps_per_episode: 50,
            rng_seed: 0,
            mobility_step: 5.0,
            fap_antennas: 8,
        }
    }
}

impl EnvConfig {
    /// Four F-APs with five MDs each.
    pub fn full_scale() -> Self {
        Self {
            num_faps: 4,
            mds_per_fap: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_faps == 0 {
            return Err(config_error("num_faps", "must be at least 1"));
        }
        if self.mds_per_fap == 0 {
            return Err(config_error("mds_per_fap", "must be at least 1"));
        }
        if self.steps_per_episode == 0 {
            return Err(config_error("steps_per_episode", "must be at least 1"));
        }
        for (field, value) in [
            ("cell_side", self.cell_side),
            ("bandwidth", self.bandwidth),
            ("fap_cpu", self.fap_cpu),
            ("noise_power", self.noise_power),
            ("path_loss_alpha", self.path_loss_alpha),
            ("slot_duration", self.slot_duration),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(config_error(field, format!("must be positive and finite, got {value}")));
            }
        }
        if !(self.mobility_step.is_finite() && self.mobility_step >= 0.0) {
            return Err(config_error("mobility_step", "must be non-negative"));
        }
        self.md_cpu_range.check("md_cpu_range")?;
        self.md_power_range.check("md_power_range")?;
        self.task_bits_range.check("task_bits_range")?;
        self.cycles_per_bit_range.check("cycles_per_bit_range")?;
        for (field, w) in [("weight_delay", self.weight_delay), ("weight_energy", self.weight_energy)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(config_error(field, "must lie in [0, 1]"));
            }
        }
        if ((self.weight_delay + self.weight_energy) - 1.0).abs() > 1e-9 {
            return Err(config_error(
                "weight_energy",
                format!(
                    "weights must sum to 1, got {} + {}",
                    self.weight_delay, self.weight_energy
                ),
            ));
        }
        Ok(())
    }

    /// Largest cycle count a task can require.
    pub fn max_task_cycles(&self) -> f64 {
        self.task_bits_range.max() * self.cycles_per_bit_range.max()
    }

    pub fn state_dim(&self) -> usize {
        5 * self.mds_per_fap + 2
    }

    pub fn action_dim(&self) -> usize {
        3 * self.mds_per_fap
    }
}
