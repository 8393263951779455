//! Deterministic seeding. A master seed expands into independent per-unit
//! streams (fold, replication, bootstrap draw, tree) so that results never
//! depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream index.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child(seed: u64, stream: u64) -> Rng {
    rng(derive(seed, stream))
}

/// Named sub-streams so unrelated consumers of one seed never collide.
pub mod stream {
    pub const FOLDS: u64 = 0x000f_01d5;
    pub const CV_LAMBDA: u64 = 0x1a3b;
    pub const BOOTSTRAP: u64 = 0xb007;
    pub const TREES: u64 = 0x7ee5;
    pub const REPLICATION: u64 = 0x4e91;
    pub const CALIBRATION: u64 = 0xca1;
    pub const VALIDATION: u64 = 0x5a1d;
    pub const RIDGE: u64 = 0x41d9e;
    pub const DATA: u64 = 0xda7a;
}

/// Balanced fold labels: a seeded permutation `perm` assigns row `perm[i]`
/// to fold `i mod k`.
pub fn assign_folds(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut folds = vec![0; n];
    for (i, &row) in perm.iter().enumerate() {
        folds[row] = i % k;
    }
    folds
}
