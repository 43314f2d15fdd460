//! Seeded, counter-based random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed and owns a ChaCha8
//! stream built from it, so results are pure functions of their parameters.
//! Named sub-streams are derived by hashing a label together with a master
//! seed; adding a new label never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable across platforms and releases (FNV-1a followed by a SplitMix64
/// finaliser), unlike `core::hash`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in master.to_le_bytes().iter().chain(label.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fill_normal(rng: &mut Stream, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform direction on the sphere `S^{d-1}`.
pub fn unit_vector(rng: &mut Stream, out: &mut [f64]) {
    loop {
        fill_normal(rng, out);
        let n = crate::linalg::norm(out);
        if n > 1e-12 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}
