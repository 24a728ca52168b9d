//! Auxiliary functions of the retention problem: the curves `l₁`, `l₂`
//! linking the two optimal retentions, the full-cession reward `k`, the
//! structural zeros `z_l`, `z_k` and the function `H` whose zero `q₀`
//! marks the end of the reinsurance region.
//!
//! All retentions are in canonical labeling (`θ₁ ≥ θ₂`).

use crate::error::{Error, Result};
use crate::model::{Case, ClaimClass, DerivedConstants, Model};
use crate::numerics::{expand_bracket_up, find_root, newton_bracketed, GridSpec, MonotoneTable, Tolerances};

#[derive(Debug)]
pub struct AuxContext {
    model: Model,
    tol: Tolerances,
    l2_table: MonotoneTable,
    z_l: f64,
    z_k: f64,
}

impl AuxContext {
    pub fn new(model: Model, tol: Tolerances) -> Result<Self> {
        let l2_table = {
            let class = model.class(1).clone();
            let theta1 = model.class(0).reinsurer_loading;
            let ratio = model.c3() / model.c1();
            let grid = GridSpec::default().nodes(0.0);
            MonotoneTable::from_fn(move |q| l2_raw(&class, theta1, ratio, q), &grid, tol.root_abs)?
        };
        let mut ctx = Self { model, tol, l2_table, z_l: f64::NAN, z_k: f64::NAN };
        ctx.z_l = ctx.compute_z_l()?;
        ctx.z_k = ctx.compute_z_k()?;
        Ok(ctx)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn z_l(&self) -> f64 {
        self.z_l
    }

    pub fn z_k(&self) -> f64 {
        self.z_k
    }

    pub fn case(&self) -> Case {
        if self.z_l <= self.z_k {
            Case::Case1
        } else {
            Case::Case2
        }
    }

    pub fn constants(&self) -> DerivedConstants {
        DerivedConstants { z_l: self.z_l, z_k: self.z_k, case: self.case(), ..DerivedConstants::partial(&self.model) }
    }

    fn theta(&self, l: usize) -> f64 {
        self.model.class(l).reinsurer_loading
    }

    /// `l₁(q) = θ₂ q − (c₃/c₂) θ₁ g₁(q)`.
    pub fn l1(&self, q: f64) -> f64 {
        let m = &self.model;
        self.theta(1) * q - m.c3() / m.c2() * self.theta(0) * m.class(0).g(q)
    }

    pub fn l1_prime(&self, q: f64) -> f64 {
        let m = &self.model;
        self.theta(1) - m.c3() / m.c2() * self.theta(0) * m.class(0).survival(q)
    }

    /// `l₂(q) = θ₁ q − (c₃/c₁) θ₂ g₂(q)`, strictly increasing since `θ₁ ≥ θ₂`.
    pub fn l2(&self, q: f64) -> f64 {
        l2_raw(self.model.class(1), self.theta(0), self.model.c3() / self.model.c1(), q)
    }

    pub fn l2_prime(&self, q: f64) -> f64 {
        let m = &self.model;
        self.theta(0) - m.c3() / m.c1() * self.theta(1) * m.class(1).survival(q)
    }

    pub fn l2_inverse(&self, v: f64) -> Result<f64> {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeArgument(v));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        if v.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let theta1 = self.theta(0);
        let (lo, hi) = self.l2_table.bracket(v).unwrap_or_else(|| {
            // θ₁q − (c₃/c₁)θ₂μ₂ ≤ l₂(q) ≤ θ₁q
            let shift = self.model.c3() / self.model.c1() * self.theta(1) * self.model.class(1).mean();
            // the upper bound is attained once F̄₂ underflows; pad it so
            // rounding cannot put the root outside
            let hi = (v + shift) / theta1;
            (v / theta1, hi * (1.0 + 1e-9) + 1e-12)
        });
        let root = newton_bracketed(|q| (self.l2(q) - v, self.l2_prime(q)), lo, hi, 1e-15 * hi.max(1.0))?;
        Ok(root)
    }

    /// Class-2 retention paired with class-1 retention `q ≥ z_l`:
    /// `q₂ = l₂⁻¹(l₁(q))`.
    pub fn q2_of(&self, q: f64) -> Result<f64> {
        self.check_domain(q)?;
        if q.is_infinite() {
            return Ok(f64::INFINITY);
        }
        if q <= self.z_l {
            return Ok(0.0);
        }
        // l₁ vanishes at z_l; clip rounding noise just above it
        self.l2_inverse(self.l1(q).max(0.0))
    }

    /// `d q₂ / d q = l₁′(q) / l₂′(q₂)`.
    pub fn q2_prime(&self, q: f64, q2: f64) -> f64 {
        if q.is_infinite() {
            return 0.0;
        }
        self.l1_prime(q) / self.l2_prime(q2)
    }

    fn check_domain(&self, q: f64) -> Result<()> {
        if q.is_nan() || q < 0.0 || q < self.z_l * (1.0 - 1e-12) - 1e-300 {
            return Err(Error::Domain { q, z_l: self.z_l });
        }
        Ok(())
    }

    fn compute_z_l(&self) -> Result<f64> {
        if self.l1_prime(0.0) >= 0.0 {
            return Ok(0.0);
        }
        let m = &self.model;
        let upper = m.c3() * self.theta(0) * m.class(0).mean() / (m.c2() * self.theta(1));
        // l₁ is convex with l₁(0) = 0 and l₁′(0) < 0: negative right of 0
        let lower = upper * 1e-9;
        Ok(newton_bracketed(|q| (self.l1(q), self.l1_prime(q)), lower, upper, 1e-15 * upper.max(1.0))?)
    }

    /// Reward rate `k(x) = c₁θ₁{g₁(x) − G₁(x)/(2x)} + k₀` under full
    /// cession of class 2 with class-1 retention `x`.
    pub fn k_fn(&self, x: f64) -> f64 {
        let m = &self.model;
        let c1t1 = m.c1() * self.theta(0);
        if x <= 0.0 {
            return m.k0();
        }
        if x.is_infinite() {
            return c1t1 * m.class(0).mean() + m.k0();
        }
        let class = m.class(0);
        c1t1 * (class.g(x) - class.g2m(x) / (2.0 * x)) + m.k0()
    }

    pub fn k_prime(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_infinite() {
            return if x <= 0.0 { 0.5 * self.model.c1() * self.theta(0) } else { 0.0 };
        }
        let m = &self.model;
        m.c1() * self.theta(0) * m.class(0).g2m(x) / (2.0 * x * x)
    }

    fn compute_z_k(&self) -> Result<f64> {
        if self.k_fn(f64::INFINITY) <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let hi = expand_bracket_up(|x| self.k_fn(x), 1e-12, 1.0, 200)?;
        Ok(find_root(|x| self.k_fn(x), 1e-12, hi, self.tol.root_abs * 1e-3)?)
    }

    /// Denominator `D(q) = c₁ q + c₃ g₂(q₂)` of the risk coefficient.
    fn denom(&self, q: f64, q2: f64) -> f64 {
        self.model.c1() * q + self.model.c3() * self.model.class(1).g(q2)
    }

    /// Risk-aversion coefficient `A(q) = c₁θ₁ / (c₁ q + c₃ g₂(q₂))` along the
    /// retention curve; zero at `q = ∞`.
    pub fn risk_coefficient(&self, q: f64) -> Result<f64> {
        if q.is_infinite() {
            return Ok(0.0);
        }
        let q2 = self.q2_of(q)?;
        Ok(self.model.c1() * self.theta(0) / self.denom(q, q2))
    }

    /// `H(q) = d(q, q₂) − (c₁θ₁/2) b²(q, q₂) / D(q)` for `q ≥ z_l`,
    /// with `H(0) = k₀` and `H(∞) = K₂`.
    pub fn h(&self, q: f64) -> Result<f64> {
        self.check_domain(q)?;
        let m = &self.model;
        if q == 0.0 {
            return Ok(m.k0());
        }
        if q.is_infinite() {
            return Ok(m.big_k2());
        }
        let q2 = self.q2_of(q)?;
        Ok(m.drift(q, q2) - 0.5 * m.c1() * self.theta(0) * m.variance(q, q2) / self.denom(q, q2))
    }

    /// `H′(q) = (c₁θ₁/2) b² D′ / D²` with `D′ = c₁ + c₃ F̄₂(q₂) q₂′`.
    pub fn h_prime(&self, q: f64) -> Result<f64> {
        self.check_domain(q)?;
        if q.is_infinite() {
            return Ok(0.0);
        }
        let m = &self.model;
        if q == 0.0 {
            // small-q limit: b² ~ (c₁ + c₃ ...)q², D ~ D′ q
            let q2p = if self.z_l == 0.0 { self.q2_prime(0.0, 0.0) } else { 0.0 };
            let dp = m.c1() + m.c3() * q2p;
            let b2pp = m.c1() + m.c2() * q2p * q2p + 2.0 * m.c3() * q2p;
            return Ok(0.5 * m.c1() * self.theta(0) * b2pp / dp);
        }
        let q2 = self.q2_of(q)?;
        let d = self.denom(q, q2);
        let dp = m.c1() + m.c3() * m.class(1).survival(q2) * self.q2_prime(q, q2);
        Ok(0.5 * m.c1() * self.theta(0) * m.variance(q, q2) * dp / (d * d))
    }

    /// `q₂`, `H`, `H′` and `A` at class-1 retention `q ≥ z_l`, sharing one
    /// evaluation of `l₂⁻¹`.
    pub fn curve_point(&self, q: f64) -> Result<CurvePoint> {
        self.check_domain(q)?;
        let m = &self.model;
        if q.is_infinite() {
            return Ok(CurvePoint { q1: q, q2: q, h: m.big_k2(), h_prime: 0.0, a: 0.0 });
        }
        if q == 0.0 {
            return Ok(CurvePoint { q1: 0.0, q2: 0.0, h: m.k0(), h_prime: self.h_prime(0.0)?, a: f64::INFINITY });
        }
        let q2 = self.q2_of(q)?;
        let d = self.denom(q, q2);
        let c1t1 = m.c1() * self.theta(0);
        let b2 = m.variance(q, q2);
        let dp = m.c1() + m.c3() * m.class(1).survival(q2) * self.q2_prime(q, q2);
        Ok(CurvePoint {
            q1: q,
            q2,
            h: m.drift(q, q2) - 0.5 * c1t1 * b2 / d,
            h_prime: 0.5 * c1t1 * b2 * dp / (d * d),
            a: c1t1 / d,
        })
    }

    /// Zero `q₀ ≥ z_l` of `H` (CASE1 only).
    pub fn q0(&self) -> Result<f64> {
        if self.case() != Case::Case1 {
            return Err(Error::WrongCase { expected: Case::Case1, found: self.case() });
        }
        let h_at = |q: f64| self.h(q).unwrap_or(f64::NAN);
        let lo = self.z_l;
        if h_at(lo) >= 0.0 {
            return Ok(lo);
        }
        let hi = expand_bracket_up(h_at, lo, lo.max(0.5) * 2.0, 200)?;
        Ok(find_root(h_at, lo, hi, self.tol.root_abs * 1e-3)?)
    }
}

/// Auxiliary quantities at one point of the paired retention curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub q1: f64,
    pub q2: f64,
    pub h: f64,
    pub h_prime: f64,
    /// Risk coefficient `A = −W″/W′`.
    pub a: f64,
}

fn l2_raw(class: &ClaimClass, theta1: f64, ratio: f64, q: f64) -> f64 {
    theta1 * q - ratio * class.reinsurer_loading * class.g(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{ClaimClass, EconParams, ModelParams, ThinningStructure};

    fn ctx() -> AuxContext {
        AuxContext::new(Model::new(&base()).unwrap(), Tolerances::default()).unwrap()
    }

    pub(crate) fn case2_params() -> ModelParams {
        ModelParams {
            classes: [ClaimClass::exponential(1.0, 2.8, 3.0), ClaimClass::exponential(2.0, 0.5, 0.6)],
            thinning: ThinningStructure::new([(1.0, [1.0, 0.0]), (0.5, [0.0, 1.0]), (4.0, [1.0, 1.0])]),
            econ: EconParams { discount: 0.5, tax_retention: 0.7, transaction_cost: 0.2 },
        }
    }

    #[test]
    fn l2_reference_value() {
        let c = ctx();
        // θ₁ = 1.2, c₃/c₁ = 0.4, θ₂ = 1, g₂(1) = (1 − e⁻²)/2
        let expected = 1.2 - 0.4 * (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((c.l2(1.0) - expected).abs() < 1e-15);
        assert!((c.l2(1.0) - 1.02707).abs() < 1e-5);
    }

    #[test]
    fn l2_inverse_round_trip() {
        let c = ctx();
        for q in [1e-6f64, 0.01, 0.3, 1.0, 7.0, 150.0, 500.0, 1e5] {
            let v = c.l2(q);
            let back = c.l2_inverse(v).unwrap();
            assert!((back - q).abs() <= 1e-13 * q.max(1.0), "q {q} back {back}");
        }
        assert_eq!(c.l2_inverse(0.0).unwrap(), 0.0);
        assert!(matches!(c.l2_inverse(-1e-3), Err(Error::NegativeArgument(_))));
    }

    #[test]
    fn base_case_is_case1_from_zero() {
        let c = ctx();
        assert_eq!(c.z_l(), 0.0);
        assert!(c.k_fn(c.z_k()).abs() < 1e-10);
        assert!(c.z_l() <= c.z_k());
        assert_eq!(c.case(), Case::Case1);
    }

    #[test]
    fn h_limits_and_derivative() {
        let c = ctx();
        assert!((c.h(0.0).unwrap() + 1.6).abs() < 1e-14);
        assert_eq!(c.h(f64::INFINITY).unwrap(), 7.4);
        assert!((c.h(1e6).unwrap() - 7.4).abs() < 1e-4);
        for q in [0.05f64, 0.3, 1.0, 2.5, 10.0] {
            let h = 1e-5 * q.max(1.0);
            let fd = (c.h(q + h).unwrap() - c.h(q - h).unwrap()) / (2.0 * h);
            let an = c.h_prime(q).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "q {q}: fd {fd} analytic {an}");
        }
        let small = 1e-7;
        let fd = (c.h(small).unwrap() - c.h(0.0).unwrap()) / small;
        assert!((fd - c.h_prime(0.0).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn curve_point_agrees_with_separate_evaluations() {
        let c = ctx();
        for q in [0.2, 1.0, 4.0] {
            let p = c.curve_point(q).unwrap();
            assert_eq!(p.h, c.h(q).unwrap());
            assert_eq!(p.h_prime, c.h_prime(q).unwrap());
            assert_eq!(p.a, c.risk_coefficient(q).unwrap());
            assert_eq!(p.q2, c.q2_of(q).unwrap());
        }
    }

    #[test]
    fn q0_is_a_zero_of_h() {
        let c = ctx();
        let q0 = c.q0().unwrap();
        assert!(c.h(q0).unwrap().abs() < 1e-10);
        assert!((q0 - 0.35618).abs() < 1e-4, "{q0}");
    }

    #[test]
    fn case2_structural_zeros() {
        let c = AuxContext::new(Model::new(&case2_params()).unwrap(), Tolerances::default()).unwrap();
        assert_eq!(c.case(), Case::Case2);
        assert!(c.l1(c.z_l()).abs() < 1e-12);
        assert!(c.k_fn(c.z_k()).abs() < 1e-10);
        assert!((c.z_l() - 4.3893).abs() < 1e-3, "{}", c.z_l());
        assert!((c.z_k() - 0.17288).abs() < 1e-4, "{}", c.z_k());
        assert!(matches!(c.q0(), Err(Error::WrongCase { .. })));
        assert!(matches!(c.h(0.5 * c.z_l()), Err(Error::Domain { .. })));
        // H and k agree at z_l, where class 2 is fully ceded
        assert!((c.h(c.z_l()).unwrap() - c.k_fn(c.z_l())).abs() < 1e-10);
    }

    #[test]
    fn k_derivative_matches_differences() {
        let c = AuxContext::new(Model::new(&case2_params()).unwrap(), Tolerances::default()).unwrap();
        for x in [0.01f64, 0.2, 1.0, 5.0] {
            let h = 1e-5 * x;
            let fd = (c.k_fn(x + h) - c.k_fn(x - h)) / (2.0 * h);
            assert!((fd - c.k_prime(x)).abs() < 1e-6 * c.k_prime(x).max(1.0));
        }
    }
}
