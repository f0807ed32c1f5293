//! Seeded random streams.
//!
//! All randomness comes from ChaCha20. A (seed, domain) pair picks the key
//! and each task index selects its own ChaCha stream, so draws for task `i`
//! are identical no matter how tasks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Domain tags keep unrelated consumers of the same user seed apart.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Domain {
    Inputs = 1,
    Split = 2,
    Folds = 3,
    LearningCurve = 4,
    Tests = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Substream `stream` of the generator keyed by `(seed, domain, salt)`.
pub fn substream(seed: u64, domain: Domain, salt: u64, stream: u64) -> ChaCha20Rng {
    let key = splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ salt);
    let mut rng = ChaCha20Rng::seed_from_u64(key);
    rng.set_stream(stream);
    rng
}
