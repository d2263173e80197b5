// SPDX-License-Identifier: Apache-2.0

//! Random streams and seed derivation.
//!
//! Every stochastic routine in the crate takes an explicit `&mut R: Rng`. The
//! harness uses [`StreamRng`] (ChaCha20, a counter-based stream cipher
//! generator) so that a seed reproduces the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The generator used for all seeded runs.
pub type StreamRng = ChaCha20Rng;

/// Identifier written into every run record and manifest.
pub const RNG_ID: &str = "chacha20/rand_chacha-0.9/v1";

/// Build the run generator from a 64-bit seed.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha20Rng::seed_from_u64(seed)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for one work item.
///
/// FNV-1a over the little-endian master seed, the UTF-8 cell key and the
/// little-endian replication index, passed through the SplitMix64 finalizer.
/// Depends only on its arguments, never on scheduling order.
pub fn derive_seed(master: u64, cell_key: &str, replication: u64) -> u64 {
    let mut h = FNV_OFFSET;
    let bytes = master
        .to_le_bytes()
        .into_iter()
        .chain(cell_key.bytes())
        .chain(replication.to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h)
}
