use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent deterministic substream `stream` of the generator seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids at the top of the range are reserved for non-ensemble draws.
pub(crate) const NOISE_STREAM: u64 = u64::MAX;
pub(crate) const SHOT_STREAM_BASE: u64 = u64::MAX / 2;
