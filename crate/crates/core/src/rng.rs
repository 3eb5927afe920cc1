//! Deterministic seeding.
//!
//! Every stochastic routine takes a master seed. Independent streams (bootstrap
//! replicates, optimizer starts, Monte-Carlo batches) derive their own seed with
//! [`split_seed`], so results never depend on execution order:
//!
//! ```text
//! child(master, i) = splitmix64(master ^ splitmix64(i + 1))
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn split_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(master: u64, index: u64) -> Rng {
    rng_from_seed(split_seed(master, index))
}
