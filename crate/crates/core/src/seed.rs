//! Seed derivation. Every random stream in an experiment is derived from the
//! harness seed through [`derive`], so runs are reproducible bit-for-bit.

/// Mixes a base seed with a path of indices (SplitMix64 finalizer per step).
pub fn derive(base: u64, path: &[u64]) -> u64 {
    let mut h = mix(base ^ 0x6a09_e667_f3bc_c908);
    for &p in path {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
