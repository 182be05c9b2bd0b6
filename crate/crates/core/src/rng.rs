//! Deterministic random streams.
//!
//! Every random draw in the library comes from a ChaCha8 stream keyed by
//! `(master seed, label, index)`. Labels name the task (for example
//! `"tube_volume"`), indices enumerate chunks or trials. The derivation is
//! `seed = splitmix64(master ^ splitmix64(fnv1a(label) ^ splitmix64(index)))`.
//!
//! Monte Carlo budgets are split into fixed-size chunks that run in parallel
//! and are reduced in chunk order, so results do not depend on the number of
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Rng = ChaCha8Rng;

/// Samples per chunk for chunked Monte Carlo.
pub const CHUNK: u64 = 1 << 15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(label) ^ splitmix64(index)))
}

pub fn stream(master: u64, label: &str, index: u64) -> Rng {
    Rng::seed_from_u64(stream_seed(master, label, index))
}

/// Splits `total` samples into chunks of [`CHUNK`], runs `f(rng, n)` on each
/// chunk with its own stream and returns the results in chunk order.
pub fn chunked<T, F>(master: u64, label: &str, total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, u64) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(total - c * CHUNK);
            let mut rng = stream(master, label, c);
            f(&mut rng, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_differ_by_label_and_index() {
        let a = stream_seed(1, "a", 0);
        assert_ne!(a, stream_seed(1, "b", 0));
        assert_ne!(a, stream_seed(1, "a", 1));
        assert_ne!(a, stream_seed(2, "a", 0));
        assert_eq!(a, stream_seed(1, "a", 0));
    }

    #[test]
    fn fnv_reference_value() {
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn chunked_is_ordered_and_complete() {
        let total = 3 * CHUNK + 17;
        let sizes = chunked(9, "t", total, |_, n| n);
        assert_eq!(sizes.len(), 4);
        assert_eq!(sizes.iter().sum::<u64>(), total);
        assert_eq!(sizes[3], 17);
    }

    #[test]
    fn chunked_independent_of_thread_count() {
        let run = || {
            chunked(5, "x", 5 * CHUNK, |rng, n| {
                (0..n).map(|_| rng.random::<f64>()).sum::<f64>()
            })
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }
}
