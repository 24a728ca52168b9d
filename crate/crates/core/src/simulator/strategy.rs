use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::policy::{DividendBand, RetentionCurve, Solution};

/// Reinsurance treaty in force at one instant, canonical class order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Treaty {
    /// Retain `min(claim, q_l)`; `∞` is no reinsurance.
    ExcessOfLoss(f64, f64),
    /// Retain the fraction `a_l ∈ [0, 1]` of every claim.
    Proportional(f64, f64),
}

impl Treaty {
    pub const NONE: Treaty = Treaty::ExcessOfLoss(f64::INFINITY, f64::INFINITY);

    /// `(drift, variance rate)` of the diffusion under this treaty.
    pub fn coefficients(&self, model: &Model) -> (f64, f64) {
        match *self {
            Treaty::ExcessOfLoss(q1, q2) => (model.drift(q1, q2), model.variance(q1, q2)),
            Treaty::Proportional(a1, a2) => {
                let (x, y) = (model.class(0), model.class(1));
                let first = [a1 * x.mean(), a2 * y.mean()];
                let second = [a1 * a1 * x.claims.second_moment(), a2 * a2 * y.claims.second_moment()];
                (model.drift_from_moments(first[0], first[1]), model.variance_from_moments(first, second))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Treaty::ExcessOfLoss(a, b) => a >= 0.0 && b >= 0.0,
            Treaty::Proportional(a, b) => (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("treaty {self:?} out of range")))
        }
    }
}

/// Feedback map from surplus to treaty.
pub trait RetentionRule: Send + Sync {
    fn treaty(&self, x: f64) -> Treaty;

    /// Surplus from which the treaty no longer changes with `x`.
    fn constant_above(&self) -> f64;
}

impl RetentionRule for Treaty {
    fn treaty(&self, _: f64) -> Treaty {
        *self
    }

    fn constant_above(&self) -> f64 {
        0.0
    }
}

/// The solver's retention curve.
#[derive(Debug, Clone)]
pub struct OptimalRetention {
    curve: Arc<RetentionCurve>,
}

impl OptimalRetention {
    pub fn new(curve: Arc<RetentionCurve>) -> Self {
        Self { curve }
    }
}

impl RetentionRule for OptimalRetention {
    fn treaty(&self, x: f64) -> Treaty {
        let (q1, q2) = self.curve.eval_q(x.max(0.0)).unwrap_or((f64::NAN, f64::NAN));
        Treaty::ExcessOfLoss(q1, q2)
    }

    fn constant_above(&self) -> f64 {
        self.curve.x0()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DividendRule {
    /// Whenever surplus is at least `x_hat`, pay it down to `x_tilde`.
    /// With `x_tilde = 0` the first payment liquidates the company.
    Band { x_tilde: f64, x_hat: f64 },
    NeverPay,
}

impl DividendRule {
    pub fn band(b: DividendBand) -> Self {
        DividendRule::Band { x_tilde: b.x_tilde, x_hat: b.x_hat }
    }

    /// Same rule with both levels multiplied by `factor`.
    pub fn shifted(&self, factor: f64) -> Self {
        match *self {
            DividendRule::Band { x_tilde, x_hat } => DividendRule::Band { x_tilde: x_tilde * factor, x_hat: x_hat * factor },
            DividendRule::NeverPay => DividendRule::NeverPay,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let DividendRule::Band { x_tilde, x_hat } = *self {
            if !(x_tilde >= 0.0) {
                return Err(Error::NonAdmissible { dividend: x_hat - x_tilde, surplus: x_hat });
            }
            if !(x_hat > x_tilde && x_hat.is_finite()) {
                return Err(Error::InvalidConfig(format!("band needs x_tilde < x_hat < inf, got ({x_tilde}, {x_hat})")));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct Strategy {
    pub name: String,
    pub retention: Arc<dyn RetentionRule>,
    pub dividends: DividendRule,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategy").field("name", &self.name).field("dividends", &self.dividends).finish_non_exhaustive()
    }
}

impl Strategy {
    pub fn new(name: impl Into<String>, retention: Arc<dyn RetentionRule>, dividends: DividendRule) -> Self {
        Self { name: name.into(), retention, dividends }
    }

    /// Solver retentions with the solver's band.
    pub fn optimal(solution: &Solution) -> Self {
        Self::new(
            "optimal",
            Arc::new(OptimalRetention::new(solution.curve.clone())),
            DividendRule::band(solution.value.band()),
        )
    }

    /// Constant treaty with the given dividend rule.
    pub fn constant(name: impl Into<String>, treaty: Treaty, dividends: DividendRule) -> Result<Self> {
        treaty.validate()?;
        Ok(Self::new(name, Arc::new(treaty), dividends))
    }

    pub fn with_dividends(&self, name: impl Into<String>, dividends: DividendRule) -> Self {
        Self { name: name.into(), retention: self.retention.clone(), dividends }
    }

    /// The optimal strategy or one of the baselines in [`STRATEGY_NAMES`],
    /// all built around the solution's band.
    pub fn named(name: &str, solution: &Solution) -> Result<Self> {
        let optimal = Self::optimal(solution);
        let band = optimal.dividends;
        match name {
            "optimal" => Ok(optimal),
            "no-reinsurance" => Self::constant(name, Treaty::NONE, band),
            "proportional" => Self::constant(name, Treaty::Proportional(0.5, 0.5), band),
            "band-up" => Ok(optimal.with_dividends(name, band.shifted(1.2))),
            "band-down" => Ok(optimal.with_dividends(name, band.shifted(0.8))),
            "never-pay" => Ok(optimal.with_dividends(name, DividendRule::NeverPay)),
            _ => Err(Error::InvalidConfig(format!(
                "unknown strategy {name:?}, expected one of {}",
                STRATEGY_NAMES.join(", ")
            ))),
        }
    }
}

pub const STRATEGY_NAMES: [&str; 6] = ["optimal", "no-reinsurance", "proportional", "band-up", "band-down", "never-pay"];
