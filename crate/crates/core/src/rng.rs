//! Seeded random streams.
//!
//! A single user seed fans out to named, independent substreams so each
//! stage (fold assignment, bootstrap, forest trees, row subsampling, data
//! generation) is reproducible on its own and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Default seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 42;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Derives the seed of a named substream.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(label)))
}

/// Generator for substream `label` of `seed`.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

/// Generator for task `index` of substream `label`; used for per-resample
/// and per-tree streams so parallel tasks never share state.
pub fn task_stream(seed: u64, label: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, label));
    rng.set_stream(index);
    rng
}
