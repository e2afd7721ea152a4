//! Non-learning reference policies and the exact per-slot optimum.
//!
//! For a fixed offloading vector the slot cost splits into two independent
//! problems of the form `min Σ a_m / s_m` over the simplex `Σ s_m = 1`, one
//! for compute shares and one for bandwidth shares. Each has the closed-form
//! minimizer `s_m ∝ √a_m` with value `(Σ √a_m)²`, so the whole problem is
//! solved exactly by enumerating the `2^M` offloading vectors.

use crate::env::{local_cost, slot_cost, ActionVector, EnvConfig, FogAccessPoint, SlotState};
use crate::error::{Error, Result};

/// Largest `M` the oracle will enumerate.
pub const ORACLE_MAX_MDS: usize = 12;

/// Every task runs on its own device.
pub fn local_policy(state: &SlotState) -> ActionVector {
    ActionVector::all_local(state.num_mds())
}

/// Every task is offloaded and the F-AP splits both resources evenly.
pub fn equal_policy(state: &SlotState) -> ActionVector {
    let m = state.num_mds();
    let share = 1.0 / m as f64;
    ActionVector {
        offload: vec![true; m],
        compute_share: vec![share; m],
        bandwidth_share: vec![share; m],
    }
}

/// Minimizer of `Σ a_m / s_m` subject to `Σ s_m = 1`: `s_m = √a_m / Σ √a_j`.
pub fn closed_form_allocation(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = weights.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "allocation weight {i} must be positive and finite, got {}",
            weights[i]
        )));
    }
    let roots: Vec<f64> = weights.iter().map(|a| a.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    Ok(roots.iter().map(|r| r / total).collect())
}

/// `Σ a_m / s_m` at the closed-form optimum, i.e. `(Σ √a_m)²`.
pub fn allocation_objective(weights: &[f64]) -> f64 {
    let root_sum: f64 = weights.iter().map(|a| a.sqrt()).sum();
    root_sum * root_sum
}

/// Per-MD weights of the compute-share subproblem: weighted delay numerator.
pub fn compute_weights(state: &SlotState, fap: &FogAccessPoint, config: &EnvConfig) -> Vec<f64> {
    state
        .task_cycles
        .iter()
        .map(|d| config.weight_delay * d / fap.cpu_freq)
        .collect()
}

/// Per-MD weights of the bandwidth-share subproblem: transmit time at full
/// bandwidth, weighted by delay and by transmit energy.
pub fn bandwidth_weights(state: &SlotState, fap: &FogAccessPoint, config: &EnvConfig) -> Vec<f64> {
    fap.devices
        .iter()
        .enumerate()
        .map(|(m, md)| {
            let spectral = (1.0 + md.tx_power * state.channel_gains[m] / config.noise_power).log2();
            (config.weight_delay + config.weight_energy * md.tx_power) * state.task_bits[m]
                / (fap.bandwidth * spectral)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub action: ActionVector,
    pub cost: f64,
}

/// Exact minimizer of the slot cost by enumeration over offloading vectors.
///
/// The allocation floor is not imposed here: the returned shares solve the
/// un-floored problem, so the returned cost lower-bounds every feasible action.
pub fn oracle_slot_optimum(
    state: &SlotState,
    fap: &FogAccessPoint,
    config: &EnvConfig,
) -> Result<OracleSolution> {
    let m = state.num_mds();
    if m > ORACLE_MAX_MDS {
        return Err(Error::OracleBudget {
            mds: m,
            max: ORACLE_MAX_MDS,
        });
    }
    if fap.devices.len() != m {
        return Err(Error::Dimension {
            context: "oracle devices",
            expected: m,
            got: fap.devices.len(),
        });
    }
    let local: Vec<f64> = fap
        .devices
        .iter()
        .enumerate()
        .map(|(i, md)| {
            let out = local_cost(state.task(i), md);
            config.weight_delay * out.delay + config.weight_energy * out.energy
        })
        .collect();
    let cw = compute_weights(state, fap, config);
    let bw = bandwidth_weights(state, fap, config);

    let mut best: Option<(u32, f64)> = None;
    let mut offloaded_c = Vec::with_capacity(m);
    let mut offloaded_b = Vec::with_capacity(m);
    for mask in 0u32..(1u32 << m) {
        offloaded_c.clear();
        offloaded_b.clear();
        let mut cost = 0.0;
        for i in 0..m {
            if mask & (1 << i) != 0 {
                offloaded_c.push(cw[i]);
                offloaded_b.push(bw[i]);
            } else {
                cost += local[i];
            }
        }
        cost += allocation_objective(&offloaded_c) + allocation_objective(&offloaded_b);
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((mask, cost));
        }
    }
    let (mask, cost) = best.expect("at least the all-local vector is enumerated");

    let offload: Vec<bool> = (0..m).map(|i| mask & (1 << i) != 0).collect();
    let pick = |w: &[f64]| -> Vec<f64> {
        offload
            .iter()
            .zip(w)
            .filter(|(&x, _)| x)
            .map(|(_, &a)| a)
            .collect()
    };
    let scatter = |shares: Vec<f64>| -> Vec<f64> {
        let mut it = shares.into_iter();
        offload
            .iter()
            .map(|&x| if x { it.next().unwrap_or(0.0) } else { 0.0 })
            .collect()
    };
    let compute_share = scatter(closed_form_allocation(&pick(&cw))?);
    let bandwidth_share = scatter(closed_form_allocation(&pick(&bw))?);
    Ok(OracleSolution {
        action: ActionVector {
            offload,
            compute_share,
            bandwidth_share,
        },
        cost,
    })
}

/// Best grid point of `min Σ a_m / s_m` with every `s_m` a positive multiple
/// of `1/units` and `Σ s_m ≤ 1`. Returns the shares and the objective.
pub fn grid_allocation(weights: &[f64], units: usize) -> (Vec<f64>, f64) {
    fn search(weights: &[f64], left: usize, units: usize, cur: &mut Vec<usize>, best: &mut (Vec<usize>, f64)) {
        let i = cur.len();
        if i == weights.len() {
            let value: f64 = weights
                .iter()
                .zip(cur.iter())
                .map(|(a, &k)| a * units as f64 / k as f64)
                .sum();
            if value < best.1 {
                *best = (cur.clone(), value);
            }
            return;
        }
        let reserve = weights.len() - i - 1;
        for k in 1..=left.saturating_sub(reserve) {
            cur.push(k);
            search(weights, left - k, units, cur, best);
            cur.pop();
        }
    }
    if weights.is_empty() {
        return (Vec::new(), 0.0);
    }
    let mut best = (Vec::new(), f64::INFINITY);
    search(weights, units, units, &mut Vec::with_capacity(weights.len()), &mut best);
    let shares = best.0.iter().map(|&k| k as f64 / units as f64).collect();
    (shares, best.1)
}

/// Slot optimum restricted to a share grid of step `1/units`, by the same
/// offloading enumeration as [`oracle_slot_optimum`]. Always feasible, so
/// its cost is an upper bound on the exact optimum.
pub fn grid_slot_optimum(
    state: &SlotState,
    fap: &FogAccessPoint,
    config: &EnvConfig,
    units: usize,
) -> Result<OracleSolution> {
    let m = state.num_mds();
    if m > ORACLE_MAX_MDS || m > units {
        return Err(Error::OracleBudget {
            mds: m,
            max: ORACLE_MAX_MDS.min(units),
        });
    }
    let cw = compute_weights(state, fap, config);
    let bw = bandwidth_weights(state, fap, config);
    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1u32 << m) {
        let offload: Vec<bool> = (0..m).map(|i| mask & (1 << i) != 0).collect();
        let chosen: Vec<usize> = (0..m).filter(|&i| offload[i]).collect();
        let (ys, _) = grid_allocation(&chosen.iter().map(|&i| cw[i]).collect::<Vec<_>>(), units);
        let (zs, _) = grid_allocation(&chosen.iter().map(|&i| bw[i]).collect::<Vec<_>>(), units);
        let mut action = ActionVector::all_local(m);
        action.offload = offload;
        for (j, &i) in chosen.iter().enumerate() {
            action.compute_share[i] = ys[j];
            action.bandwidth_share[i] = zs[j];
        }
        let cost = slot_cost(state, &action, fap, config)?.cost;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(OracleSolution { action, cost });
        }
    }
    Ok(best.expect("at least the all-local vector is enumerated"))
}
