//! Shared fixtures for the benchmarks.

use thinrein_core::{ClaimClass, EconParams, ModelParams, ThinningStructure};

pub const ECON: EconParams = EconParams { discount: 0.5, tax_retention: 0.7, transaction_cost: 0.2 };

/// Rates 1 and 2, separate groups of intensity 3 and 4, a common group of
/// intensity `lambda3`.
pub fn example(lambda3: f64, theta1: f64) -> ModelParams {
    ModelParams {
        classes: [ClaimClass::exponential(1.0, 1.0, theta1), ClaimClass::exponential(2.0, 0.8, 1.0)],
        thinning: ThinningStructure::new([(3.0, [1.0, 0.0]), (4.0, [0.0, 1.0]), (lambda3, [1.0, 1.0])]),
        econ: ECON,
    }
}

/// Parameter set with a full-cession region for class 2.
pub fn case2() -> ModelParams {
    ModelParams {
        classes: [ClaimClass::exponential(1.0, 2.8, 3.0), ClaimClass::exponential(2.0, 0.5, 0.6)],
        thinning: ThinningStructure::new([(1.0, [1.0, 0.0]), (0.5, [0.0, 1.0]), (4.0, [1.0, 1.0])]),
        econ: ECON,
    }
}
