//! Shared fixtures for the estimator benches.

use azsr_core::scene::{derive_seed, sample_training_scene, simulate_beam_vector};
use azsr_core::{AngularGrid, ArrayGeometry, ScenePolicy, SteeringMatrix};
use num_complex::Complex64;

pub const GRID_LEN: usize = 256;
pub const SEED: u64 = 7;

pub struct Fixture {
    pub manifold: SteeringMatrix,
    pub vectors: Vec<Vec<Complex64>>,
}

/// Manifold for a half-wavelength ULA plus `count` sampled training beam vectors.
pub fn fixture(n_ch: usize, count: usize) -> Fixture {
    let geom = ArrayGeometry::ula(n_ch).expect("valid array");
    let manifold = SteeringMatrix::new(&geom, &AngularGrid::new(GRID_LEN).expect("valid grid"));
    let policy = ScenePolicy::default();
    let vectors = (0..count as u64)
        .map(|i| {
            let scene = sample_training_scene(derive_seed(SEED, i), &policy).expect("scene");
            simulate_beam_vector(&geom, &scene).expect("beam vector")
        })
        .collect();
    Fixture { manifold, vectors }
}
