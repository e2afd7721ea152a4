//! Offloading/allocation actions and their projection onto the feasible set.

use crate::error::{Error, Result};

/// Minimum compute and bandwidth share of an offloaded MD.
pub const ALLOC_FLOOR: f64 = 1e-3;

/// Raw offload outputs above this value mean "offload".
pub const OFFLOAD_THRESHOLD: f64 = 0.5;

/// Slack allowed on the share-sum constraints for rounding.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Per-MD offload decision plus compute and bandwidth shares.
///
/// The raw layout used by agents is `[x_1..x_M, y_1..y_M, z_1..z_M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    pub offload: Vec<bool>,
    pub compute_share: Vec<f64>,
    pub bandwidth_share: Vec<f64>,
}

impl ActionVector {
    pub fn all_local(m: usize) -> Self {
        Self {
            offload: vec![false; m],
            compute_share: vec![0.0; m],
            bandwidth_share: vec![0.0; m],
        }
    }

    pub fn num_mds(&self) -> usize {
        self.offload.len()
    }

    pub fn offloaded_count(&self) -> usize {
        self.offload.iter().filter(|&&x| x).count()
    }

    /// Raw encoding with `x ∈ {0, 1}`.
    pub fn to_raw(&self) -> Vec<f64> {
        let mut raw = Vec::with_capacity(3 * self.num_mds());
        raw.extend(self.offload.iter().map(|&x| if x { 1.0 } else { 0.0 }));
        raw.extend_from_slice(&self.compute_share);
        raw.extend_from_slice(&self.bandwidth_share);
        raw
    }

    /// Checks box, sum and floor constraints for `m` MDs.
    pub fn validate(&self, m: usize) -> Result<()> {
        for (context, len) in [
            ("offload vector", self.offload.len()),
            ("compute shares", self.compute_share.len()),
            ("bandwidth shares", self.bandwidth_share.len()),
        ] {
            if len != m {
                return Err(Error::Dimension {
                    context,
                    expected: m,
                    got: len,
                });
            }
        }
        for (name, shares) in [
            ("compute", &self.compute_share),
            ("bandwidth", &self.bandwidth_share),
        ] {
            if let Some(i) = shares.iter().position(|s| !(0.0..=1.0).contains(s)) {
                return Err(Error::Constraint {
                    constraint: format!("{name} share of MD {i} outside [0, 1]: {}", shares[i]),
                });
            }
            let sum: f64 = shares.iter().sum();
            if sum > 1.0 + SUM_TOLERANCE {
                return Err(Error::Constraint {
                    constraint: format!("{name} shares sum to {sum} > 1"),
                });
            }
            for (i, (&x, &s)) in self.offload.iter().zip(shares.iter()).enumerate() {
                if x && s < ALLOC_FLOOR {
                    return Err(Error::Constraint {
                        constraint: format!(
                            "{name} share of offloaded MD {i} is {s} < floor {ALLOC_FLOOR}"
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Projects a raw actor output onto the feasible action set.
///
/// Entries are clamped to `[0, 1]`. An MD offloads iff its raw flag exceeds
/// [`OFFLOAD_THRESHOLD`]. Shares of local MDs are zeroed, shares of offloaded
/// MDs are floored at [`ALLOC_FLOOR`], and a group whose sum exceeds one is
/// shrunk toward the floor so that it sums to one again while every share
/// stays at or above the floor. Proportions above the floor are preserved.
pub fn sanitize_action(raw: &[f64], m: usize) -> Result<ActionVector> {
    if raw.len() != 3 * m {
        return Err(Error::Dimension {
            context: "raw action",
            expected: 3 * m,
            got: raw.len(),
        });
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("raw action entry {i} is not finite")));
    }
    let clamped: Vec<f64> = raw.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let offload: Vec<bool> = clamped[..m].iter().map(|&v| v > OFFLOAD_THRESHOLD).collect();
    let k = offload.iter().filter(|&&x| x).count();
    if k as f64 * ALLOC_FLOOR >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "{k} offloaded MDs cannot all receive the floor share {ALLOC_FLOOR}"
        )));
    }
    let project = |shares: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = shares
            .iter()
            .zip(&offload)
            .map(|(&s, &x)| if x { s.max(ALLOC_FLOOR) } else { 0.0 })
            .collect();
        let sum: f64 = out.iter().sum();
        if sum > 1.0 + SUM_TOLERANCE {
            let reserved = k as f64 * ALLOC_FLOOR;
            let scale = (1.0 - reserved) / (sum - reserved);
            for (s, &x) in out.iter_mut().zip(&offload) {
                if x {
                    *s = ALLOC_FLOOR + (*s - ALLOC_FLOOR) * scale;
                }
            }
        }
        out
    };
    Ok(ActionVector {
        compute_share: project(&clamped[m..2 * m]),
        bandwidth_share: project(&clamped[2 * m..]),
        offload,
    })
}
