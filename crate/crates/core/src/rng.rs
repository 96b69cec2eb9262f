//! Seeded random streams.
//!
//! Every random draw in a run comes from a ChaCha20 generator keyed by the
//! master seed and selected by a 64-bit stream id. The stream id is a
//! SplitMix64 hash of a domain tag followed by a path of indices, e.g.
//! `(Shots, [cycle, point, length, variant])`. Because each consumer owns a
//! stream derived only from its coordinates, serial and parallel execution
//! draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. Distinct domains never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    /// Telegraph and drift evolution, keyed by cycle.
    Scenario = 1,
    /// Random Clifford draws, keyed by (cycle, point, length).
    Gates = 2,
    /// Binomial shot sampling, keyed by (cycle, point, length, variant).
    Shots = 3,
    /// T1 decay sampling, keyed by (cycle, frequency index).
    T1Scan = 4,
    /// Bootstrap resampling, keyed by (window, point, resample).
    Bootstrap = 5,
    /// Free-form use in tests and tools.
    Aux = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a domain and index path into a stream id.
pub fn stream_id(domain: Domain, path: &[u64]) -> u64 {
    let mut h = splitmix64(domain as u64);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// Returns the generator for `(domain, path)` under `master`.
pub fn stream(master: u64, domain: Domain, path: &[u64]) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream_id(domain, path));
    rng
}
