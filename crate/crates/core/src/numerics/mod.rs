//! Numerical kernel shared by the solver, the checker and the simulator.
//!
//! Everything here is a pure function of its inputs (or an immutable table
//! built once), so it can be shared freely across threads.

mod ode;
mod optimize;
mod quad;
mod roots;
mod table;

pub use ode::{dopri5, dopri5_step, OdeNode, OdeOptions};
pub use quad::{integrate, integrate_to_infinity, integrate_with, QuadResult};
pub use optimize::maximize;
pub use roots::{expand_bracket_up, find_root, find_root_with, newton_bracketed};
pub use table::{GridSpec, MonotoneTable};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("non-finite function value {value} at {at}")]
    NonFinite { at: f64, value: f64 },
    #[error("quadrature on [{a}, {b}] did not converge after {subdivisions} subdivisions (error estimate {error:e})")]
    MaxSubdivisions { a: f64, b: f64, subdivisions: usize, error: f64 },
    #[error("root finder exceeded {0} iterations")]
    MaxIterations(usize),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("table argument {0} outside tabulated range")]
    OutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Tolerance contract for the numerical kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Absolute tolerance on root arguments.
    pub root_abs: f64,
    /// Relative tolerance for adaptive quadrature.
    pub quad_rel: f64,
    /// Local error target for the adaptive ODE stepper.
    pub ode_local: f64,
    /// Absolute tolerance on truncated improper integrals.
    pub tail_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root_abs: 1e-10,
            quad_rel: 1e-9,
            ode_local: 1e-9,
            tail_abs: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        let all = [self.root_abs, self.quad_rel, self.ode_local, self.tail_abs];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err("all tolerances must be finite and strictly positive")
        }
    }
}

/// Weights for a finite-difference approximation of the `order`-th
/// derivative at `x0` from values at `nodes` (Fornberg's recursion).
pub fn fd_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_weights_central_first_derivative() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[0] + 0.5).abs() < 1e-15);
        assert!(w[1].abs() < 1e-15);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fd_weights_one_sided_exact_on_cubics() {
        let nodes: Vec<f64> = (1..=5).map(|j| -0.1 * j as f64).collect();
        let f = |x: f64| 2.0 + x - 3.0 * x * x + 0.5 * x * x * x;
        let d1: f64 = fd_weights(0.0, &nodes, 1)
            .iter()
            .zip(&nodes)
            .map(|(w, x)| w * f(*x))
            .sum();
        let d2: f64 = fd_weights(0.0, &nodes, 2)
            .iter()
            .zip(&nodes)
            .map(|(w, x)| w * f(*x))
            .sum();
        assert!((d1 - 1.0).abs() < 1e-10);
        assert!((d2 + 6.0).abs() < 1e-9);
    }

    #[test]
    fn default_tolerances_are_valid() {
        assert!(Tolerances::default().validate().is_ok());
        let bad = Tolerances { quad_rel: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
