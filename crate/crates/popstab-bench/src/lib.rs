//! Shared fixtures for the benchmark targets.

use popstab::params::{validate_and_derive, Rational, RawSimParams, SimParams};

/// The standard N = 2^16 parameter point the benchmarks run at.
pub fn bench_params() -> SimParams {
    validate_and_derive(&RawSimParams {
        n_target: 1 << 16,
        gamma: Rational::new(1, 2),
        adversary_budget: 0,
        alpha: Rational::new(1, 10),
        t_inner: None,
    })
    .unwrap()
}
