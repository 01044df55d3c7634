//! Seeded generator used throughout the crate.

use rand::SeedableRng;

/// Deterministic generator. All randomised operations take one of these (or
/// any [`rand::Rng`]) so runs are reproducible from a seed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Generator for `seed`.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of `seed`, used to give each worker or record
/// its own generator.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
