//! Seeded generators and independent substreams.
//!
//! A batch of `B` samples draws one 64-bit batch seed from the caller's generator
//! and gives sample `i` the ChaCha stream `i` under that seed. Results therefore
//! do not depend on how rayon schedules the work, and the reduction happens in
//! sample-index order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(i, rng_i)` for `i in 0..n` on independent substreams of a seed drawn
/// from `rng`, returning results in index order.
pub fn par_substreams<T, F, R>(rng: &mut R, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync,
    R: RngCore + ?Sized,
{
    let batch_seed = rng.next_u64();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sub = substream(batch_seed, i as u64);
            f(i, &mut sub)
        })
        .collect()
}
