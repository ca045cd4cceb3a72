//! Shared fixtures for the solver benchmarks.

use poisson_bandit_core::{ParameterPoint, Prior, SolverConfig};

/// Symmetric two-atom prior on rates (1, 2) and (2, 1).
pub fn symmetric_prior() -> Prior {
    Prior::new(vec![
        (ParameterPoint::new(1.0, 2.0).unwrap(), 0.5),
        (ParameterPoint::new(2.0, 1.0).unwrap(), 0.5),
    ])
    .unwrap()
}

pub fn config(steps: u32) -> SolverConfig {
    SolverConfig::new(1.0, steps, 25).unwrap()
}
