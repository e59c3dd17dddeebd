//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random object in the crate is drawn from a ChaCha8 stream keyed by
//! a 64-bit seed. Sub-seeds (per edge, per trial, per alpha point) are
//! derived with the splitmix64 finalizer so that streams are independent of
//! work scheduling: worker threads can process trials in any order and still
//! see identical bits per trial.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The splitmix64 output (finalization) function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the sub-seed for stream `index` of a parent seed.
///
/// This is the fixed, documented derivation used for per-edge frame seeds:
/// the splitmix64 sequence element at position `index + 1`, i.e.
/// `splitmix64(seed + (index + 1) * GOLDEN_GAMMA)` evaluated jump-wise.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Two-level derivation for (seed, outer, inner) triples, e.g.
/// (sweep seed, alpha index, trial index).
pub fn sub_seed2(seed: u64, outer: u64, inner: u64) -> u64 {
    sub_seed(sub_seed(seed, outer), inner)
}

/// Seeded ChaCha8 generator. ChaCha is portable: the stream depends only on
/// the seed, never on platform or scheduling.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
