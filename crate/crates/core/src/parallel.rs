//! Seed derivation and order-preserving parallel replication.
//!
//! Replicate `i` always draws from the stream `derive_seed(master, i)` and
//! results come back in index order, so anything folded over them
//! sequentially is identical for every worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "LTLAB_WORKERS";

/// SplitMix64 applied to `master + (index + 1) * golden`.
///
/// For a fixed master seed the map `index -> seed` is a bijection on `u64`
/// (an odd-multiplier affine map followed by the invertible SplitMix64
/// finaliser), so distinct indices never share a stream seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index))
}

/// `LTLAB_WORKERS` if set, otherwise the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w: &usize| w >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f(rng_i, i)` for `i in 0..count` on `workers` threads and returns
/// the results in index order.
pub fn replicate<T, F>(master: u64, count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let run = |i: usize| {
        let mut rng = stream(master, i as u64);
        f(&mut rng, i)
    };
    if workers <= 1 {
        return Ok((0..count).map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(run).collect()))
}
