use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Counter-based stream for sample `index`: the seed selects the key and the
/// index selects the ChaCha stream, so sample `i` is the same whichever worker
/// draws it.
pub fn sample_rng(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
