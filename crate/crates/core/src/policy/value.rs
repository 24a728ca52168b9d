//! Marginal value `U`, the dividend band and the assembled value function.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::curve::RetentionCurve;
use crate::error::{Error, Result};
use crate::model::{Case, DerivedConstants, EconParams};
use crate::numerics::{find_root, newton_bracketed};

/// `U = W′/c*`: decreasing on `[0, x₀]` with `U(x₀) = 1`, then
/// `b₁r₊e^{r₊z} + b₂r₋e^{r₋z}` with `z = x − x₀`.
#[derive(Debug, Clone)]
pub struct MarginalValue {
    curve: Arc<RetentionCurve>,
    r_plus: f64,
    r_minus: f64,
    b1: f64,
    b2: f64,
}

impl MarginalValue {
    pub fn new(curve: Arc<RetentionCurve>, constants: &DerivedConstants) -> Self {
        Self { curve, r_plus: constants.r_plus, r_minus: constants.r_minus, b1: constants.b1, b2: constants.b2 }
    }

    pub fn curve(&self) -> &Arc<RetentionCurve> {
        &self.curve
    }

    pub fn x0(&self) -> f64 {
        self.curve.x0()
    }

    fn upper(&self, z: f64, order: i32) -> f64 {
        self.b1 * self.r_plus.powi(order) * (self.r_plus * z).exp()
            + self.b2 * self.r_minus.powi(order) * (self.r_minus * z).exp()
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        if x >= self.x0() {
            return Ok(self.upper(x - self.x0(), 1));
        }
        let st = self.curve.state(x)?;
        Ok((self.curve.lambda0() - st.lambda).exp())
    }

    pub fn u_prime(&self, x: f64) -> Result<f64> {
        if x >= self.x0() {
            return Ok(self.upper(x - self.x0(), 2));
        }
        let st = self.curve.state(x)?;
        Ok(-st.a * (self.curve.lambda0() - st.lambda).exp())
    }

    /// `∫₀^x U`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        let lower = self.curve.lambda0().exp() * self.curve.integral0();
        if x >= self.x0() {
            let z = x - self.x0();
            return Ok(lower + self.b1 * (self.r_plus * z).exp_m1() + self.b2 * (self.r_minus * z).exp_m1());
        }
        let st = self.curve.state(x)?;
        Ok(self.curve.lambda0().exp() * st.integral)
    }

    /// `U(0) = e^{Λ(x₀)}`.
    pub fn at_zero(&self) -> f64 {
        self.curve.lambda0().exp()
    }

    /// `x̂_c ≥ x₀` with `c U(x̂_c) = k`, for `0 < c ≤ k`.
    pub fn x_hat(&self, c: f64, k: f64) -> Result<f64> {
        let level = k / c;
        if level <= 1.0 {
            return Ok(self.x0());
        }
        // U > b₁r₊e^{r₊z} above x₀, so this z overshoots the root
        // (padded: the bound is attained once the r₋ term underflows)
        let z_max = (level / (self.b1 * self.r_plus)).ln() / self.r_plus * (1.0 + 1e-9) + 1e-9;
        let z = newton_bracketed(
            |z| (self.upper(z, 1) - level, self.upper(z, 2)),
            0.0,
            z_max,
            1e-15 * z_max.max(1.0),
        )?;
        Ok(self.x0() + z)
    }

    /// `x̃_c ≤ x₀` with `c U(x̃_c) = k`, for `k/U(0) ≤ c ≤ k`.
    pub fn x_tilde(&self, c: f64, k: f64) -> Result<f64> {
        let target = self.curve.lambda0() - (k / c).ln();
        self.curve.x_at_lambda(target.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandBranch {
    /// `I₁(c̄) > K`: pay down to an interior `x̃ > 0` each time.
    Interior,
    /// `I₁(c̄) ≤ K`: the first payment takes the whole surplus.
    FromZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DividendBand {
    pub x_tilde: f64,
    pub x_hat: f64,
    pub branch: BandBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSolution {
    pub c_star: f64,
    pub c_bar: f64,
    pub band: DividendBand,
    /// Residual of the branch equation `I(c*) − K`.
    pub residual: f64,
}

/// `I₁(c) = ∫_{x̃_c}^{x̂_c} (k − cU)`.
pub fn i1(u: &MarginalValue, c: f64, econ: &EconParams) -> Result<f64> {
    let k = econ.tax_retention;
    let (lo, hi) = (u.x_tilde(c, k)?, u.x_hat(c, k)?);
    Ok(k * (hi - lo) - c * (u.integral(hi)? - u.integral(lo)?))
}

/// `I₂(c) = ∫₀^{x̂_c} (k − cU)`.
pub fn i2(u: &MarginalValue, c: f64, econ: &EconParams) -> Result<f64> {
    let k = econ.tax_retention;
    let hi = u.x_hat(c, k)?;
    Ok(k * hi - c * u.integral(hi)?)
}

/// Scale `c*` and band `(x̃, x̂)` from the fixed-cost condition.
pub fn determine_band(u: &MarginalValue, econ: &EconParams) -> Result<BandSolution> {
    let (k, big_k) = (econ.tax_retention, econ.transaction_cost);
    let u0 = u.at_zero();
    if !(u0.is_finite() && u0 > 1.0) {
        return Err(Error::DegenerateBand(format!("U(0) = {u0}")));
    }
    let c_bar = k / u0;
    let tol = 1e-15 * k;
    let mut failure = None;
    let mut guarded = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let i1_bar = i1(u, c_bar, econ)?;
    let (c_star, band) = if i1_bar > big_k {
        let c = find_root(|c| guarded(i1(u, c, econ)) - big_k, c_bar, k, tol)?;
        (c, DividendBand { x_tilde: u.x_tilde(c, k)?, x_hat: u.x_hat(c, k)?, branch: BandBranch::Interior })
    } else {
        // I₂ is decreasing and I₂(c̄) = I₁(c̄) ≤ K, so the root lies in (0, c̄]
        let mut lo = 0.5 * c_bar;
        while i2(u, lo, econ)? <= big_k {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::DegenerateBand("I2 stays below K as c → 0".into()));
            }
        }
        let c = find_root(|c| guarded(i2(u, c, econ)) - big_k, lo, c_bar, tol)?;
        (c, DividendBand { x_tilde: 0.0, x_hat: u.x_hat(c, k)?, branch: BandBranch::FromZero })
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let residual = match band.branch {
        BandBranch::Interior => i1(u, c_star, econ)? - big_k,
        BandBranch::FromZero => i2(u, c_star, econ)? - big_k,
    };
    Ok(BandSolution { c_star, c_bar, band, residual })
}

/// CASE2 integration constants: `W′ = C₂U`, `C₁ = C₂U(x̃₀)`, `C₃ = W(x̃₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Case2Constants {
    pub big_c1: f64,
    pub big_c2: f64,
    pub big_c3: f64,
}

/// `W(x) = c*∫₀^x U` below `x̂`, `W(x̃) + k(x − x̃) − K` from `x̂` on.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    u: MarginalValue,
    econ: EconParams,
    band: BandSolution,
    w_tilde: f64,
    scale: f64,
}

/// Serializable summary of a value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRecord {
    pub case: Case,
    pub x0: f64,
    #[serde(with = "crate::serde_float")]
    pub x_tilde0: f64,
    pub u_at_zero: f64,
    pub c_bar: f64,
    pub c_star: f64,
    pub band: DividendBand,
    pub band_residual: f64,
    pub case2: Option<Case2Constants>,
}

impl ValueFunction {
    pub fn new(u: MarginalValue, econ: EconParams) -> Result<Self> {
        let band = determine_band(&u, &econ)?;
        let w_tilde = band.c_star * u.integral(band.band.x_tilde)?;
        Ok(Self { u, econ, band, w_tilde, scale: 1.0 })
    }

    /// Copy with `W` multiplied by `factor` everywhere (negative control for
    /// the verification checks; the result is not a value function).
    pub fn scaled(&self, factor: f64) -> Self {
        Self { scale: self.scale * factor, ..self.clone() }
    }

    pub fn marginal(&self) -> &MarginalValue {
        &self.u
    }

    pub fn curve(&self) -> &Arc<RetentionCurve> {
        self.u.curve()
    }

    pub fn econ(&self) -> &EconParams {
        &self.econ
    }

    pub fn band(&self) -> DividendBand {
        self.band.band
    }

    pub fn band_solution(&self) -> &BandSolution {
        &self.band
    }

    pub fn c_star(&self) -> f64 {
        self.band.c_star
    }

    pub fn x0(&self) -> f64 {
        self.u.x0()
    }

    pub fn x_hat(&self) -> f64 {
        self.band.band.x_hat
    }

    pub fn x_tilde(&self) -> f64 {
        self.band.band.x_tilde
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn case2_constants(&self) -> Result<Option<Case2Constants>> {
        let Some(xt0) = self.curve().x_tilde0() else {
            return Ok(None);
        };
        let c2 = self.c_star();
        Ok(Some(Case2Constants { big_c1: c2 * self.u.u(xt0)?, big_c2: c2, big_c3: self.eval_w(xt0)? / self.scale }))
    }

    fn check(x: f64) -> Result<()> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeSurplus(x));
        }
        Ok(())
    }

    pub fn eval_w(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let w = if x >= self.x_hat() {
            self.w_tilde + self.econ.tax_retention * (x - self.x_tilde()) - self.econ.transaction_cost
        } else {
            self.c_star() * self.u.integral(x)?
        };
        Ok(self.scale * w)
    }

    pub fn eval_w_prime(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let w = if x >= self.x_hat() { self.econ.tax_retention } else { self.c_star() * self.u.u(x)? };
        Ok(self.scale * w)
    }

    pub fn eval_w_second(&self, x: f64) -> Result<f64> {
        Self::check(x)?;
        let w = if x >= self.x_hat() { 0.0 } else { self.c_star() * self.u.u_prime(x)? };
        Ok(self.scale * w)
    }

    /// Left limits of `W′` and `W″` at `x̂`, from the `c*U` branch.
    pub fn left_derivatives_at_band(&self) -> Result<(f64, f64)> {
        let x = self.x_hat();
        Ok((self.scale * self.c_star() * self.u.u(x)?, self.scale * self.c_star() * self.u.u_prime(x)?))
    }

    pub fn record(&self) -> Result<ValueRecord> {
        Ok(ValueRecord {
            case: self.curve().case(),
            x0: self.x0(),
            x_tilde0: self.curve().x_tilde0().unwrap_or(f64::NAN),
            u_at_zero: self.u.at_zero(),
            c_bar: self.band.c_bar,
            c_star: self.c_star(),
            band: self.band(),
            band_residual: self.band.residual,
            case2: self.case2_constants()?,
        })
    }
}
