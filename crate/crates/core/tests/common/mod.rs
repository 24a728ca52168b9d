#![allow(dead_code)]

use thinrein_core::numerics::{find_root, integrate};
use thinrein_core::{ClaimClass, EconParams, Model, ModelParams, ThinningStructure};

pub const ECON: EconParams = EconParams { discount: 0.5, tax_retention: 0.7, transaction_cost: 0.2 };

/// Two exponential classes (rates 1 and 2) hit separately by groups of
/// intensity 3 and 4 and jointly by a group of intensity `lambda3`.
pub fn example(lambda3: f64, theta1: f64) -> ModelParams {
    ModelParams {
        classes: [ClaimClass::exponential(1.0, 1.0, theta1), ClaimClass::exponential(2.0, 0.8, 1.0)],
        thinning: ThinningStructure::new([(3.0, [1.0, 0.0]), (4.0, [0.0, 1.0]), (lambda3, [1.0, 1.0])]),
        econ: ECON,
    }
}

pub fn base() -> ModelParams {
    example(2.0, 1.2)
}

/// A parameter set in which class 2 is fully ceded at low surplus.
pub fn case2() -> ModelParams {
    ModelParams {
        classes: [ClaimClass::exponential(1.0, 2.8, 3.0), ClaimClass::exponential(2.0, 0.5, 0.6)],
        thinning: ThinningStructure::new([(1.0, [1.0, 0.0]), (0.5, [0.0, 1.0]), (4.0, [1.0, 1.0])]),
        econ: ECON,
    }
}

/// Brute-force route to the retention problem that never touches the
/// closed-form curve functions: for risk coefficient `a = −W″/W′` the
/// pointwise optimum of `d − ½ a b²` is found from its first-order
/// conditions by fixed-point iteration, and the ratio `ρ = W/W′` obeys
/// `δρ = ψ(a)`, `dx/dρ = 1/(1 + ρ a)`.
pub struct HjbOracle {
    model: Model,
}

impl HjbOracle {
    pub fn new(params: &ModelParams) -> Self {
        Self { model: Model::new(params).unwrap() }
    }

    /// Maximizing retentions (canonical order) for risk coefficient `a`.
    pub fn argmax(&self, a: f64) -> (f64, f64) {
        let m = &self.model;
        let (t1, t2) = (m.class(0).reinsurer_loading, m.class(1).reinsurer_loading);
        let (mut q1, mut q2) = (t1 / a, t2 / a);
        for _ in 0..10_000 {
            let n1 = (t1 / a - m.c3() / m.c1() * m.class(1).g(q2)).max(0.0);
            let n2 = (t2 / a - m.c3() / m.c2() * m.class(0).g(n1)).max(0.0);
            let done = (n1 - q1).abs() <= 1e-15 * n1.max(1.0) && (n2 - q2).abs() <= 1e-15 * n2.max(1.0);
            q1 = n1;
            q2 = n2;
            if done {
                break;
            }
        }
        (q1, q2)
    }

    pub fn psi(&self, a: f64) -> f64 {
        let (q1, q2) = self.argmax(a);
        self.model.drift(q1, q2) - 0.5 * a * self.model.variance(q1, q2)
    }

    pub fn a_of_rho(&self, rho: f64) -> f64 {
        let target = self.model.econ().discount * rho;
        if target >= self.model.big_k2() {
            return 0.0;
        }
        find_root(|a| self.psi(a) - target, 1e-12, 1e8, 1e-15).unwrap()
    }

    fn rho_end(&self) -> f64 {
        self.model.big_k2() / self.model.econ().discount
    }

    /// `x₀ = ∫₀^{K₂/δ} dρ / (1 + ρ a(ρ))`.
    pub fn x0(&self) -> f64 {
        integrate(|r| 1.0 / (1.0 + r * self.a_of_rho(r)), 0.0, self.rho_end(), 1e-12).unwrap()
    }

    /// `Λ(x₀) = ∫ a dx`.
    pub fn lambda0(&self) -> f64 {
        integrate(|r| { let a = self.a_of_rho(r); a / (1.0 + r * a) }, 0.0, self.rho_end(), 1e-12).unwrap()
    }

    /// Surplus at which class 2 starts being retained (CASE2).
    pub fn x_tilde0(&self) -> f64 {
        let m = &self.model;
        // q₂ turns positive once θ₂/a = (c₃/c₂) g₁(θ₁/a)
        let t = |a: f64| m.class(1).reinsurer_loading / a - m.c3() / m.c2() * m.class(0).g(m.class(0).reinsurer_loading / a);
        let a_star = find_root(t, 1e-6, 1e6, 1e-15).unwrap();
        let rho_star = self.psi(a_star) / m.econ().discount;
        integrate(|r| 1.0 / (1.0 + r * self.a_of_rho(r)), 0.0, rho_star, 1e-12).unwrap()
    }
}
