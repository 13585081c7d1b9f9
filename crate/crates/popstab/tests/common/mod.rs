// Shared across test targets; not every target uses every helper.
#![allow(dead_code)]

pub mod oracle;

use popstab::params::{validate_and_derive, Rational, RawSimParams, SimParams};

/// Standard parameter set used across the integration tests.
pub fn test_params(n_target: u64, gamma: Rational, adversary_budget: u64) -> SimParams {
    validate_and_derive(&RawSimParams {
        n_target,
        gamma,
        adversary_budget,
        alpha: Rational::new(1, 10),
        t_inner: None,
    })
    .expect("test parameter sets are valid")
}
