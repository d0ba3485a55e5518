use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// All stochastic code paths draw from this generator so a seed pins every output.
pub(crate) type DetRng = ChaCha8Rng;

pub(crate) fn seeded(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}
