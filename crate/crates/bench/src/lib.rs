//! Input generators shared by the benchmarks.

use ustat_core::{sample, Distribution};

/// Seeded standard normal sample of size `n`.
pub fn normal_data(n: usize, seed: u64) -> Vec<f64> {
    let dist = Distribution::normal(0.0, 1.0).expect("valid law");
    sample(&dist, n, seed).expect("sampling succeeds")
}

/// Seeded heavy-tailed sample centred at `a`.
pub fn example_data(n: usize, a: f64, seed: u64) -> Vec<f64> {
    let dist = Distribution::example(a).expect("valid law");
    sample(&dist, n, seed).expect("sampling succeeds")
}
