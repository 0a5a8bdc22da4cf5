//! Shared inputs for the benchmarks.

use finsler_core::sampling::random_point_pairs;
use finsler_core::{FinslerMetricSpec, Point, TangentVector};

pub fn funk(n: usize) -> FinslerMetricSpec {
    FinslerMetricSpec::funk(n).expect("valid metric")
}

pub fn bryant_shen(n: usize) -> FinslerMetricSpec {
    FinslerMetricSpec::bryant_shen(n, std::f64::consts::FRAC_PI_6).expect("valid metric")
}

/// A fixed off-origin sample.
pub fn sample(n: usize) -> (Point, TangentVector) {
    random_point_pairs(n, 1, 0.5, 42).remove(0)
}
