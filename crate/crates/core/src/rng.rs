//! Deterministic random-number substreams.
//!
//! Monte Carlo layers in this crate run replications in parallel. To keep
//! results bit-identical regardless of thread count, every unit of stochastic
//! work draws from its own substream derived from the user seed and a path of
//! integer identifiers (replication index, stage index, ...). Two distinct
//! paths yield statistically independent streams; the same path always yields
//! the same stream.
//!
//! Substreams are ChaCha8 generators keyed by a SplitMix64-style hash of the
//! `(seed, ids...)` path. ChaCha8 is a cryptographic-strength generator, so
//! correlations between keyed substreams are negligible for statistical use.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a strong 64-bit mixing function.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Create the substream identified by `(seed, ids...)`.
///
/// The identifiers are absorbed in order, so `substream(s, &[1, 2])` and
/// `substream(s, &[2, 1])` are different streams.
pub fn substream(seed: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut state = mix(seed ^ GOLDEN);
    for &id in ids {
        state = mix(state.wrapping_add(GOLDEN).wrapping_add(id));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
