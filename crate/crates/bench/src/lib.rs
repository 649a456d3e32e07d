//! Shared fixtures for the benchmarks.

use noma_isac::optimizer::initialize_feasible;
use noma_isac::{CovarianceSet, ScenarioConfig, Scene, Scheme, SolverConfig};

/// Evaluation scene with `n_users` users, channel seed 1.
pub fn reference_scene(n_users: usize) -> Scene {
    Scene::generate(ScenarioConfig::reference(n_users, 0.0, 10.0, 1.0), 1).expect("reference scene")
}

/// Feasible expansion point for `scene`.
pub fn starting_point(scene: &Scene, scheme: Scheme) -> CovarianceSet {
    initialize_feasible(scene, scheme, &SolverConfig::default()).expect("feasible reference scene")
}
