//! Shared inputs for the benchmarks.

use mjpc_core::bounds::Analysis;
use mjpc_core::fixtures::random_irreducible;
use mjpc_core::MJPModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic random irreducible model on `n` states.
pub fn model_of_size(n: usize) -> MJPModel {
    random_irreducible(n, &mut ChaCha8Rng::seed_from_u64(n as u64))
}

pub fn analysis_of_size(n: usize) -> Analysis {
    Analysis::new(model_of_size(n)).expect("benchmark model has a gap")
}

/// Tilt at a quarter of the series convergence radius.
pub fn moderate_tilt(a: &Analysis) -> f64 {
    0.25 * a.gap / (2.0 * a.f_sup)
}
