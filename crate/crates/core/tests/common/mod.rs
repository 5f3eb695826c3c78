#![allow(dead_code)]

use mjpc_core::fixtures::{random_irreducible, random_reversible};
use mjpc_core::MJPModel;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random irreducible model with 2..=`max_n` states.
pub fn any_model(max_n: usize) -> impl Strategy<Value = MJPModel> {
    (2..=max_n, any::<u64>()).prop_map(|(n, seed)| random_irreducible(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

pub fn any_reversible(max_n: usize) -> impl Strategy<Value = MJPModel> {
    (2..=max_n, any::<u64>()).prop_map(|(n, seed)| random_reversible(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
