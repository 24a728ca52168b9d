//! Problem parameterization for the two-class thinning model and the
//! truncated-moment, drift and variance functions built on it.
//!
//! Retention levels are plain `f64`; `f64::INFINITY` means "no reinsurance"
//! and every function here accepts it and returns the corresponding limit.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{integrate, integrate_to_infinity};

/// Survival function `q ↦ P(X > q)`.
pub type SurvivalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Claim severity with the truncated moments `g(q) = E[X ∧ q]` and
/// `G(q) = E[(X ∧ q)²]`.
#[derive(Clone)]
pub enum ClaimDistribution {
    Exponential { rate: f64 },
    /// Arbitrary survival function; moments are obtained by quadrature.
    General(GeneralClaims),
}

#[derive(Clone)]
pub struct GeneralClaims {
    survival: SurvivalFn,
    mean: f64,
    second_moment: f64,
    tol: f64,
}

impl GeneralClaims {
    /// `survival` must satisfy `F̄(0) = 1`, be non-increasing and have a
    /// finite second moment.
    pub fn new<F>(survival: F, tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let survival: SurvivalFn = Arc::new(survival);
        let s0 = survival(0.0);
        if (s0 - 1.0).abs() > 1e-12 {
            return Err(invalid("claims.survival", format!("survival at 0 must be 1, got {s0}")));
        }
        let mean = integrate_to_infinity(|x| survival(x), 0.0, tol)?;
        let second_moment = integrate_to_infinity(|x| 2.0 * x * survival(x), 0.0, tol)?;
        if !(mean.is_finite() && mean > 0.0 && second_moment.is_finite()) {
            return Err(invalid("claims.survival", "claim distribution needs finite, positive moments"));
        }
        Ok(Self { survival, mean, second_moment, tol })
    }
}

impl fmt::Debug for ClaimDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => f.debug_struct("Exponential").field("rate", rate).finish(),
            Self::General(g) => f
                .debug_struct("General")
                .field("mean", &g.mean)
                .field("second_moment", &g.second_moment)
                .finish(),
        }
    }
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::General(g) => g.mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::General(g) => g.second_moment,
        }
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean() * self.mean()
    }

    pub fn survival(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 1.0;
        }
        match self {
            Self::Exponential { rate } => (-rate * q).exp(),
            Self::General(g) => (g.survival)(q),
        }
    }

    /// `g(q) = ∫₀^q F̄(x) dx = E[X ∧ q]`.
    pub fn g(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q.is_infinite() {
            return self.mean();
        }
        match self {
            Self::Exponential { rate } => -(-rate * q).exp_m1() / rate,
            Self::General(g) => integrate(|x| (g.survival)(x), 0.0, q, g.tol).unwrap_or(f64::NAN),
        }
    }

    /// `G(q) = ∫₀^q 2x F̄(x) dx = E[(X ∧ q)²]`.
    pub fn g2m(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q.is_infinite() {
            return self.second_moment();
        }
        match self {
            Self::Exponential { rate } => {
                let u = rate * q;
                2.0 / (rate * rate) * one_minus_one_plus_u_exp(u)
            }
            Self::General(g) => integrate(|x| 2.0 * x * (g.survival)(x), 0.0, q, g.tol).unwrap_or(f64::NAN),
        }
    }
}

/// `1 - (1 + u) e^{-u}` without cancellation for small `u`.
fn one_minus_one_plus_u_exp(u: f64) -> f64 {
    if u < 0.1 {
        // Σ_{n≥2} (-1)^n (n-1) u^n / n!
        let mut term = u * u / 2.0; // u^n / n! for n = 2
        let mut sum = 0.0;
        for n in 2..20 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (n - 1) as f64 * term;
            term *= u / (n + 1) as f64;
        }
        sum
    } else {
        1.0 - (1.0 + u) * (-u).exp()
    }
}

/// One line of business: claim severity plus the insurer's and reinsurer's
/// safety loadings under the expected value principle.
#[derive(Debug, Clone)]
pub struct ClaimClass {
    pub claims: ClaimDistribution,
    pub insurer_loading: f64,
    pub reinsurer_loading: f64,
}

impl ClaimClass {
    pub fn exponential(rate: f64, insurer_loading: f64, reinsurer_loading: f64) -> Self {
        Self { claims: ClaimDistribution::exponential(rate), insurer_loading, reinsurer_loading }
    }

    pub fn mean(&self) -> f64 {
        self.claims.mean()
    }

    pub fn variance(&self) -> f64 {
        self.claims.variance()
    }

    pub fn g(&self, q: f64) -> f64 {
        self.claims.g(q)
    }

    pub fn g2m(&self, q: f64) -> f64 {
        self.claims.g2m(q)
    }

    pub fn survival(&self, q: f64) -> f64 {
        self.claims.survival(q)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let ClaimDistribution::Exponential { rate } = self.claims {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(invalid(format!("{field}.rate"), format!("must be positive, got {rate}")));
            }
        }
        let (eta, theta) = (self.insurer_loading, self.reinsurer_loading);
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid(format!("{field}.insurer_loading"), format!("must be positive, got {eta}")));
        }
        if !(theta.is_finite() && theta > eta) {
            return Err(invalid(
                format!("{field}.reinsurer_loading"),
                format!("reinsurance must be non-cheap (θ > η = {eta}), got {theta}"),
            ));
        }
        if !(self.variance().is_finite() && self.variance() >= 0.0) {
            return Err(invalid(format!("{field}.claims"), "claim variance must be finite"));
        }
        Ok(())
    }
}

/// Event groups and their thinning probabilities into the two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinningStructure {
    pub intensities: Vec<f64>,
    /// `probabilities[k][l]`: chance that an event of group `k` produces a
    /// claim in class `l`.
    pub probabilities: Vec<[f64; 2]>,
}

impl ThinningStructure {
    pub fn new(groups: impl IntoIterator<Item = (f64, [f64; 2])>) -> Self {
        let (intensities, probabilities) = groups.into_iter().unzip();
        Self { intensities, probabilities }
    }

    fn validate(&self) -> Result<()> {
        if self.intensities.is_empty() || self.intensities.len() != self.probabilities.len() {
            return Err(invalid("thinning", "need one probability pair per group and at least one group"));
        }
        for (k, (&lambda, p)) in self.intensities.iter().zip(&self.probabilities).enumerate() {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(invalid(format!("thinning.groups[{k}].intensity"), format!("must be positive, got {lambda}")));
            }
            for (l, &pl) in p.iter().enumerate() {
                if !(0.0..=1.0).contains(&pl) {
                    return Err(invalid(
                        format!("thinning.groups[{k}].probabilities[{l}]"),
                        format!("must lie in [0, 1], got {pl}"),
                    ));
                }
            }
        }
        for l in 0..2 {
            if self.probabilities.iter().all(|p| p[l] == 0.0) {
                return Err(invalid("thinning", format!("no group can produce a claim in class {}", l + 1)));
            }
        }
        Ok(())
    }

    /// `(c₁, c₂, c₃)`: class claim intensities and the common-event intensity.
    pub fn intensities_by_class(&self) -> (f64, f64, f64) {
        self.intensities.iter().zip(&self.probabilities).fold((0.0, 0.0, 0.0), |(a, b, c), (&lam, p)| {
            (a + lam * p[0], b + lam * p[1], c + lam * p[0] * p[1])
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Discount rate δ.
    pub discount: f64,
    /// Fraction `k` of each dividend kept after tax.
    pub tax_retention: f64,
    /// Fixed cost `K` per dividend payment.
    pub transaction_cost: f64,
}

impl EconParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount.is_finite() && self.discount > 0.0) {
            return Err(invalid("economics.discount", format!("must be positive, got {}", self.discount)));
        }
        if !(self.tax_retention > 0.0 && self.tax_retention < 1.0) {
            return Err(invalid("economics.tax_retention", format!("must lie in (0, 1), got {}", self.tax_retention)));
        }
        if !(self.transaction_cost.is_finite() && self.transaction_cost > 0.0) {
            return Err(invalid(
                "economics.transaction_cost",
                format!("must be positive, got {}", self.transaction_cost),
            ));
        }
        Ok(())
    }
}

/// Full problem parameterization in the caller's class labeling.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub classes: [ClaimClass; 2],
    pub thinning: ThinningStructure,
    pub econ: EconParams,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.classes[0].validate("classes[0]")?;
        self.classes[1].validate("classes[1]")?;
        self.thinning.validate()?;
        self.econ.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `z_l ≤ z_k`: both classes are reinsured from surplus 0.
    #[serde(rename = "CASE1")]
    Case1,
    /// `z_l > z_k`: class 2 is fully ceded below `x̃₀`.
    #[serde(rename = "CASE2")]
    Case2,
}

/// Validated model in canonical labeling (`θ₁ ≥ θ₂`). Pairs of retentions
/// taken or returned by methods of this type are in canonical order; use
/// [`Model::to_user`] / [`Model::from_user`] at the boundary.
#[derive(Debug, Clone)]
pub struct Model {
    classes: [ClaimClass; 2],
    econ: EconParams,
    thinning: ThinningStructure,
    relabeled: bool,
    c1: f64,
    c2: f64,
    c3: f64,
}

impl Model {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let relabeled = params.classes[0].reinsurer_loading < params.classes[1].reinsurer_loading;
        let (mut c1, mut c2, c3) = params.thinning.intensities_by_class();
        let mut classes = params.classes.clone();
        let mut thinning = params.thinning.clone();
        if relabeled {
            classes.swap(0, 1);
            std::mem::swap(&mut c1, &mut c2);
            for p in &mut thinning.probabilities {
                p.swap(0, 1);
            }
        }
        Ok(Self { classes, econ: params.econ, thinning, relabeled, c1, c2, c3 })
    }

    /// Whether the caller's class 1 and class 2 were swapped internally.
    pub fn relabeled(&self) -> bool {
        self.relabeled
    }

    pub fn to_user<T>(&self, pair: (T, T)) -> (T, T) {
        if self.relabeled {
            (pair.1, pair.0)
        } else {
            pair
        }
    }

    pub fn from_user<T>(&self, pair: (T, T)) -> (T, T) {
        self.to_user(pair)
    }

    pub fn class(&self, l: usize) -> &ClaimClass {
        &self.classes[l]
    }

    pub fn econ(&self) -> &EconParams {
        &self.econ
    }

    pub fn thinning(&self) -> &ThinningStructure {
        &self.thinning
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn c3(&self) -> f64 {
        self.c3
    }

    /// `k₀ = Σ c_l (η_l − θ_l) μ_l`, the drift under full cession.
    pub fn k0(&self) -> f64 {
        self.class_sum(|c, cl| c * (cl.insurer_loading - cl.reinsurer_loading) * cl.mean())
    }

    /// `K₁ = ½ Σ c_l (μ_l² + σ_l²) + c₃ μ₁ μ₂`, half the variance rate without reinsurance.
    pub fn big_k1(&self) -> f64 {
        0.5 * self.class_sum(|c, cl| c * cl.claims.second_moment())
            + self.c3 * self.classes[0].mean() * self.classes[1].mean()
    }

    /// `K₂ = Σ c_l η_l μ_l`, the drift without reinsurance.
    pub fn big_k2(&self) -> f64 {
        self.class_sum(|c, cl| c * cl.insurer_loading * cl.mean())
    }

    fn class_sum(&self, f: impl Fn(f64, &ClaimClass) -> f64) -> f64 {
        f(self.c1, &self.classes[0]) + f(self.c2, &self.classes[1])
    }

    /// Drift `d(q) = Σ c_l {θ_l g_l(q_l) − (θ_l − η_l) μ_l}`.
    pub fn drift(&self, q1: f64, q2: f64) -> f64 {
        self.drift_from_moments(self.classes[0].g(q1), self.classes[1].g(q2))
    }

    /// Variance rate `b²(q) = Σ c_l G_l(q_l) + 2 c₃ g₁(q₁) g₂(q₂)`.
    pub fn variance(&self, q1: f64, q2: f64) -> f64 {
        self.variance_from_moments(
            [self.classes[0].g(q1), self.classes[1].g(q2)],
            [self.classes[0].g2m(q1), self.classes[1].g2m(q2)],
        )
    }

    /// Drift for arbitrary retained-claim means `m_l = E[retained claim]`.
    pub fn drift_from_moments(&self, m1: f64, m2: f64) -> f64 {
        let [a, b] = &self.classes;
        self.c1 * (a.reinsurer_loading * m1 - (a.reinsurer_loading - a.insurer_loading) * a.mean())
            + self.c2 * (b.reinsurer_loading * m2 - (b.reinsurer_loading - b.insurer_loading) * b.mean())
    }

    /// Variance rate for arbitrary retained-claim first and second moments.
    pub fn variance_from_moments(&self, first: [f64; 2], second: [f64; 2]) -> f64 {
        self.c1 * second[0] + self.c2 * second[1] + 2.0 * self.c3 * first[0] * first[1]
    }
}

/// Constants derived from a model: intensities, the no-reinsurance
/// characteristic roots and the structural zeros that select the case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub k0: f64,
    pub big_k1: f64,
    pub big_k2: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub b1: f64,
    pub b2: f64,
    pub z_l: f64,
    #[serde(with = "crate::serde_float")]
    pub z_k: f64,
    pub case: Case,
}

impl DerivedConstants {
    /// Everything except `z_l`, `z_k` and the case, which need the
    /// auxiliary functions.
    pub(crate) fn partial(model: &Model) -> Self {
        let (k1, k2, delta) = (model.big_k1(), model.big_k2(), model.econ().discount);
        let disc = (k2 * k2 + 4.0 * delta * k1).sqrt();
        let r_plus = (-k2 + disc) / (2.0 * k1);
        // r₋ via Vieta to avoid cancellation in r₊ r₋ = −δ/K₁
        let r_minus = -delta / (k1 * r_plus);
        let b1 = r_minus / (r_plus * (r_minus - r_plus));
        let b2 = r_plus / (r_minus * (r_plus - r_minus));
        Self {
            c1: model.c1(),
            c2: model.c2(),
            c3: model.c3(),
            k0: model.k0(),
            big_k1: k1,
            big_k2: k2,
            r_plus,
            r_minus,
            b1,
            b2,
            z_l: f64::NAN,
            z_k: f64::NAN,
            case: Case::Case1,
        }
    }
}

/// Derives all constants for `params`, including the case classification.
pub fn derive_constants(params: &ModelParams) -> Result<DerivedConstants> {
    let model = Model::new(params)?;
    Ok(crate::auxiliary::AuxContext::new(model, Default::default())?.constants())
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::numerics::integrate;

    #[test]
    fn intensities_of_the_base_setup() {
        let m = Model::new(&base()).unwrap();
        assert_eq!((m.c1(), m.c2(), m.c3()), (5.0, 6.0, 2.0));
    }

    #[test]
    fn aggregate_constants_of_the_base_setup() {
        let m = Model::new(&base()).unwrap();
        assert!((m.k0() + 1.6).abs() < 1e-14);
        assert!((m.big_k2() - 7.4).abs() < 1e-14);
        assert!((m.big_k1() - 7.5).abs() < 1e-14);
    }

    #[test]
    fn characteristic_roots() {
        let m = Model::new(&base()).unwrap();
        let d = DerivedConstants::partial(&m);
        for r in [d.r_plus, d.r_minus] {
            assert!((7.5 * r * r + 7.4 * r - 0.5).abs() < 1e-12);
        }
        assert!((d.r_plus - 0.0635).abs() < 1e-4);
        assert!((d.r_minus + 1.0501).abs() < 1e-4);
        assert!(d.b1 > 0.0 && d.b2 < 0.0);
        assert!((d.b1 * d.r_plus + d.b2 * d.r_minus - 1.0).abs() < 1e-12);
        assert!((d.b1 * d.r_plus.powi(2) + d.b2 * d.r_minus.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn truncated_moments_exponential() {
        let c = ClaimClass::exponential(2.0, 0.8, 1.0);
        assert_eq!(c.g(0.0), 0.0);
        assert_eq!(c.g(f64::INFINITY), 0.5);
        assert!((c.g(0.5) - (1.0 - (-1.0f64).exp()) / 2.0).abs() < 1e-15);
        assert_eq!(c.g2m(0.0), 0.0);
        assert!((c.g2m(0.5) - 0.5 * (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((ClaimClass::exponential(1.0, 1.0, 1.2).g2m(f64::INFINITY) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        for rate in [0.5, 1.0, 2.0] {
            let c = ClaimDistribution::exponential(rate);
            for q in [1e-4, 0.01, 0.05, 0.099, 0.11, 0.5, 1.0, 3.0, 10.0, 40.0] {
                let g = integrate(|x| (-rate * x).exp(), 0.0, q, 1e-14).unwrap();
                let big = integrate(|x| 2.0 * x * (-rate * x).exp(), 0.0, q, 1e-14).unwrap();
                assert!((c.g(q) - g).abs() < 1e-10 * (1.0 + g), "g rate {rate} q {q}");
                assert!((c.g2m(q) - big).abs() < 1e-10 * (1.0 + big), "G rate {rate} q {q}");
            }
        }
    }

    #[test]
    fn general_distribution_matches_exponential() {
        let general = ClaimDistribution::General(GeneralClaims::new(|x: f64| (-2.0 * x).exp(), 1e-12).unwrap());
        let exp = ClaimDistribution::exponential(2.0);
        assert!((general.mean() - 0.5).abs() < 1e-10);
        assert!((general.variance() - 0.25).abs() < 1e-10);
        for q in [0.1, 0.5, 2.0, f64::INFINITY] {
            assert!((general.g(q) - exp.g(q)).abs() < 1e-10);
            assert!((general.g2m(q) - exp.g2m(q)).abs() < 1e-10);
        }
    }

    #[test]
    fn general_distribution_rejects_bad_survival() {
        assert!(GeneralClaims::new(|x: f64| 0.5 * (-x).exp(), 1e-10).is_err());
    }

    #[test]
    fn drift_and_variance_limits() {
        let m = Model::new(&base()).unwrap();
        let inf = f64::INFINITY;
        assert!((m.drift(0.0, 0.0) - m.k0()).abs() < 1e-14);
        assert!((m.drift(inf, inf) - 7.4).abs() < 1e-14);
        assert!((m.drift(inf, 0.0) - 4.4).abs() < 1e-14);
        assert_eq!(m.variance(0.0, 0.0), 0.0);
        assert!((m.variance(inf, inf) - 15.0).abs() < 1e-14);
        assert!((m.variance(inf, inf) - 2.0 * m.big_k1()).abs() < 1e-14);
        assert!((m.variance(inf, 0.0) - 10.0).abs() < 1e-14);
    }

    #[test]
    fn relabels_when_first_class_is_cheaper_to_reinsure() {
        let mut p = base();
        p.classes.swap(0, 1);
        p.thinning.probabilities.iter_mut().for_each(|q| q.swap(0, 1));
        let m = Model::new(&p).unwrap();
        assert!(m.relabeled());
        assert_eq!((m.c1(), m.c2(), m.c3()), (5.0, 6.0, 2.0));
        assert_eq!(m.class(0).reinsurer_loading, 1.2);
        assert_eq!(m.to_user((1, 2)), (2, 1));
    }

    #[test]
    fn validation_errors() {
        let mut p = base();
        p.classes[0].reinsurer_loading = 0.9;
        assert!(matches!(Model::new(&p), Err(crate::Error::InvalidParameter { .. })));
        let mut p = base();
        p.thinning.intensities[1] = 0.0;
        assert!(Model::new(&p).is_err());
        let mut p = base();
        p.thinning.probabilities[0][0] = 1.5;
        assert!(Model::new(&p).is_err());
        let mut p = base();
        p.thinning.probabilities = vec![[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]];
        assert!(Model::new(&p).is_err());
        let mut p = base();
        p.econ.tax_retention = 1.5;
        let err = Model::new(&p).unwrap_err().to_string();
        assert!(err.contains("tax_retention"), "{err}");
    }

    #[test]
    fn common_shock_bound() {
        let m = Model::new(&base()).unwrap();
        assert!(m.c3() * m.c3() <= m.c1() * m.c2());
    }
}
