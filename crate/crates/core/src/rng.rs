//! Seeded random sources.
//!
//! Every random draw in the crate comes from a [`SimRng`] passed in
//! explicitly. `SimRng` is ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! and normal variates use the ziggurat sampler of `rand_distr::StandardNormal`.
//!
//! Independent streams are derived from a master seed with [`derive_seed`]:
//!
//! ```text
//! h = splitmix64(master ^ fnv1a64(label))
//! seed = splitmix64(h ^ index)
//! ```
//!
//! so a cell identified by `(label, index)` always gets the same stream no
//! matter how many other cells run or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a64(label.as_bytes()));
    splitmix64(h ^ index)
}

pub fn derive(master: u64, label: &str, index: u64) -> SimRng {
    seeded(derive_seed(master, label, index))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn standard_normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}
