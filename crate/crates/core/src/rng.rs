//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by a
//! master seed plus a short tuple of integer keys (parameter fingerprint,
//! realization index, ...). Streams are independent of scheduling, so the
//! same key always yields the same sequence whether realizations run
//! serially or on a thread pool.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of keys into one 64-bit digest.
pub fn fold_keys(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &k| mix64(acc ^ mix64(k)))
}

/// Returns the stream for `(master_seed, keys...)`.
///
/// The master seed fills the ChaCha key; the folded keys select the stream
/// id, so distinct key tuples never share a keystream under one seed.
pub fn stream(master_seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut state = master_seed;
    for chunk in seed.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(fold_keys(keys));
    rng
}
