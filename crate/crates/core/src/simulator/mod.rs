//! Monte Carlo evaluation of reinsurance-dividend strategies on the
//! diffusion approximation, by Euler-Maruyama on a tabulated coefficient
//! map.
//!
//! Every path owns its own ChaCha stream derived from the master seed, and
//! per-path results are reduced sequentially, so estimates are identical
//! for any number of rayon workers.

mod strategy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use strategy::{DividendRule, OptimalRetention, RetentionRule, Strategy, Treaty, STRATEGY_NAMES};

use crate::error::{Error, Result};
use crate::model::{EconParams, Model};

/// How ruin between grid times is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuinCheck {
    /// Ruin only when a grid value is negative.
    Grid,
    /// Additionally kill the path with the Brownian-bridge crossing
    /// probability `exp(−2 X_n X_{n+1} / (σ² Δt))` of each step.
    BrownianBridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub ruin_check: RuinCheck,
    /// Intervals of the uniform coefficient table on `[0, x_top]`.
    pub table_intervals: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            dt: 1e-3,
            horizon: 40.0,
            seed: 20_240_601,
            antithetic: false,
            ruin_check: RuinCheck::BrownianBridge,
            table_intervals: 1 << 14,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.paths == 0 {
            return bad("simulation.paths must be at least 1".into());
        }
        if self.antithetic && self.paths % 2 != 0 {
            return bad(format!("simulation.paths must be even with antithetic pairs, got {}", self.paths));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("simulation.dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("simulation.horizon must be positive, got {}", self.horizon));
        }
        if self.horizon / self.dt > 1e9 {
            return bad("simulation.horizon / simulation.dt exceeds 1e9 steps".into());
        }
        if self.table_intervals < 16 {
            return bad("simulation.table_intervals must be at least 16".into());
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.paths / 2
        } else {
            self.paths
        }
    }
}

/// Drift and volatility as functions of surplus: linear interpolation on a
/// uniform grid over `[0, x_top]`, constant above.
#[derive(Debug, Clone)]
pub struct Dynamics {
    x_top: f64,
    inv_h: f64,
    drift: Vec<f64>,
    vol: Vec<f64>,
    tail: (f64, f64),
}

impl Dynamics {
    /// Tabulates `coeffs(x) = (drift, volatility)`; `tail` applies from `x_top` on.
    pub fn from_fn<F>(coeffs: F, x_top: f64, tail: (f64, f64), intervals: usize) -> Result<Self>
    where
        F: Fn(f64) -> (f64, f64) + Sync,
    {
        if !(x_top >= 0.0 && x_top.is_finite()) {
            return Err(Error::InvalidConfig(format!("coefficient table top must be finite, got {x_top}")));
        }
        let n = if x_top > 0.0 { intervals } else { 0 };
        let h = if n > 0 { x_top / n as f64 } else { 1.0 };
        let pts: Vec<(f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|i| if i == n { tail } else { coeffs(i as f64 * h) })
            .collect();
        if let Some(bad) = pts.iter().find(|p| !(p.0.is_finite() && p.1.is_finite() && p.1 >= 0.0)) {
            return Err(Error::InvalidConfig(format!("non-finite coefficients {bad:?}")));
        }
        Ok(Self {
            x_top,
            inv_h: 1.0 / h,
            drift: pts.iter().map(|p| p.0).collect(),
            vol: pts.iter().map(|p| p.1).collect(),
            tail,
        })
    }

    pub fn from_rule(model: &Model, rule: &dyn RetentionRule, intervals: usize) -> Result<Self> {
        let top = rule.constant_above();
        let coeffs = |x: f64| {
            let (d, b2) = rule.treaty(x).coefficients(model);
            (d, b2.max(0.0).sqrt())
        };
        Self::from_fn(coeffs, top, coeffs(top.max(0.0)), intervals)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x >= self.x_top {
            return self.tail;
        }
        let u = x.max(0.0) * self.inv_h;
        let i = (u as usize).min(self.drift.len() - 2);
        let w = u - i as f64;
        (
            self.drift[i] + w * (self.drift[i + 1] - self.drift[i]),
            self.vol[i] + w * (self.vol[i + 1] - self.vol[i]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// 99% normal interval.
    pub ci99: [f64; 2],
    pub ruin_fraction: f64,
    /// Mean ruin time among ruined paths (`NaN` if none).
    #[serde(with = "crate::serde_float")]
    pub mean_ruin_time: f64,
    /// Upper bound on the discounted dividends lost by stopping at the
    /// horizon: `e^{−δT} k E[(X_T + K₂/δ) 1{alive at T}]`.
    pub truncation_bound: f64,
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl SimEstimate {
    /// Whether `value` lies within `sigmas` standard errors plus the
    /// truncation bound of the estimate (the bound only excuses `value`
    /// being above the mean).
    pub fn accepts(&self, value: f64, sigmas: f64) -> bool {
        let d = value - self.mean;
        let slack = sigmas * self.std_error;
        d >= -slack && d <= slack + self.truncation_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PathOutcome {
    value: f64,
    ruin_time: Option<f64>,
    /// Surplus at the horizon for surviving paths.
    terminal: f64,
}

const Z99: f64 = 2.575_829_303_548_901;

struct Engine<'a> {
    dynamics: &'a Dynamics,
    dividends: DividendRule,
    econ: EconParams,
    ruin_check: RuinCheck,
}

impl Engine<'_> {
    /// One path driven by `normal(step)`; `uniform()` feeds the bridge check.
    fn run(
        &self,
        x0: f64,
        dt: f64,
        steps: usize,
        mut normal: impl FnMut() -> f64,
        mut uniform: impl FnMut() -> f64,
    ) -> PathOutcome {
        let (k, big_k, delta) = (self.econ.tax_retention, self.econ.transaction_cost, self.econ.discount);
        let (x_tilde, x_hat) = match self.dividends {
            DividendRule::Band { x_tilde, x_hat } => (x_tilde, x_hat),
            DividendRule::NeverPay => (0.0, f64::INFINITY),
        };
        let sqdt = dt.sqrt();
        let bridge = self.ruin_check == RuinCheck::BrownianBridge;
        let mut x = x0;
        let mut value = 0.0;
        let mut n = 0usize;
        loop {
            let t = n as f64 * dt;
            if x < 0.0 {
                return PathOutcome { value, ruin_time: Some(t), terminal: 0.0 };
            }
            if x >= x_hat {
                value += (-delta * t).exp() * (k * (x - x_tilde) - big_k);
                x = x_tilde;
                if x_tilde == 0.0 {
                    return PathOutcome { value, ruin_time: Some(t), terminal: 0.0 };
                }
            }
            if n == steps {
                return PathOutcome { value, ruin_time: None, terminal: x };
            }
            let (mu, sigma) = self.dynamics.eval(x);
            let next = x + mu * dt + sigma * sqdt * normal();
            if bridge && next > 0.0 && sigma > 0.0 {
                let expo = 2.0 * x * next / (sigma * sigma * dt);
                if expo < 40.0 && uniform() < (-expo).exp() {
                    return PathOutcome { value, ruin_time: Some(t + dt), terminal: 0.0 };
                }
            }
            x = next;
            n += 1;
        }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Per-unit outcomes (a unit is a path, or an antithetic pair).
fn run_units(engine: &Engine<'_>, x0: f64, cfg: &SimConfig) -> Vec<[PathOutcome; 2]> {
    let steps = cfg.steps();
    (0..cfg.units() as u64)
        .into_par_iter()
        .map(|u| {
            let mut normals = rng(cfg.seed, 3 * u);
            let mut uniforms = rng(cfg.seed, 3 * u + 1);
            if cfg.antithetic {
                let mut replay = normals.clone();
                let a = engine.run(x0, cfg.dt, steps, || normals.sample(StandardNormal), || uniforms.random());
                let mut anti = rng(cfg.seed, 3 * u + 2);
                let b = engine.run(x0, cfg.dt, steps, || -replay.sample::<f64, _>(StandardNormal), || anti.random());
                [a, b]
            } else {
                let a = engine.run(x0, cfg.dt, steps, || normals.sample(StandardNormal), || uniforms.random());
                [a, a]
            }
        })
        .collect()
}

fn unit_value(o: &[PathOutcome; 2]) -> f64 {
    0.5 * (o[0].value + o[1].value)
}

fn summarize(outcomes: &[[PathOutcome; 2]], cfg: &SimConfig, econ: &EconParams, big_k2: f64) -> SimEstimate {
    let n = outcomes.len() as f64;
    let paths: Vec<&PathOutcome> = if cfg.antithetic {
        outcomes.iter().flat_map(|o| o.iter()).collect()
    } else {
        outcomes.iter().map(|o| &o[0]).collect()
    };
    let mut sum = 0.0;
    for o in outcomes {
        sum += unit_value(o);
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for o in outcomes {
        ss += (unit_value(o) - mean).powi(2);
    }
    let std_error = if n > 1.0 { (ss / (n - 1.0)).sqrt() / n.sqrt() } else { f64::INFINITY };
    let (mut ruined, mut ruin_time, mut tail) = (0usize, 0.0, 0.0);
    for p in &paths {
        match p.ruin_time {
            Some(t) => {
                ruined += 1;
                ruin_time += t;
            }
            None => tail += p.terminal + big_k2 / econ.discount,
        }
    }
    let np = paths.len() as f64;
    SimEstimate {
        mean,
        std_error,
        ci99: [mean - Z99 * std_error, mean + Z99 * std_error],
        ruin_fraction: ruined as f64 / np,
        mean_ruin_time: if ruined > 0 { ruin_time / ruined as f64 } else { f64::NAN },
        truncation_bound: (-econ.discount * cfg.horizon).exp() * econ.tax_retention * tail / np,
        paths: paths.len(),
        dt: cfg.dt,
        horizon: cfg.horizon,
    }
}

fn check_start(x0: f64) -> Result<()> {
    if x0 < 0.0 || !x0.is_finite() {
        return Err(Error::NegativeSurplus(x0));
    }
    Ok(())
}

/// Low-level entry: simulate given dynamics and dividend rule.
/// `big_k2` is the maximal drift, used only for the truncation bound.
pub fn simulate_dynamics(
    dynamics: &Dynamics,
    dividends: DividendRule,
    econ: &EconParams,
    big_k2: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.validate()?;
    dividends.validate()?;
    check_start(x0)?;
    let engine = Engine { dynamics, dividends, econ: *econ, ruin_check: cfg.ruin_check };
    Ok(summarize(&run_units(&engine, x0, cfg), cfg, econ, big_k2))
}

pub fn simulate(model: &Model, strategy: &Strategy, x0: f64, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    let dynamics = Dynamics::from_rule(model, strategy.retention.as_ref(), cfg.table_intervals)?;
    simulate_dynamics(&dynamics, strategy.dividends, model.econ(), model.big_k2(), x0, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDifference {
    pub first: String,
    pub second: String,
    /// Mean of per-path `first − second` under common random numbers.
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub names: Vec<String>,
    pub estimates: Vec<SimEstimate>,
    /// Indices into `names`, best first.
    pub ranking: Vec<usize>,
    pub differences: Vec<PairwiseDifference>,
}

/// Simulates every strategy on the same random numbers.
pub fn compare_strategies(model: &Model, strategies: &[Strategy], x0: f64, cfg: &SimConfig) -> Result<Comparison> {
    if strategies.len() < 2 {
        return Err(Error::InvalidConfig("need at least two strategies to compare".into()));
    }
    cfg.validate()?;
    check_start(x0)?;
    let mut runs = Vec::with_capacity(strategies.len());
    for s in strategies {
        s.dividends.validate()?;
        let dynamics = Dynamics::from_rule(model, s.retention.as_ref(), cfg.table_intervals)?;
        let engine = Engine { dynamics: &dynamics, dividends: s.dividends, econ: *model.econ(), ruin_check: cfg.ruin_check };
        runs.push(run_units(&engine, x0, cfg));
    }
    let estimates: Vec<SimEstimate> = runs.iter().map(|r| summarize(r, cfg, model.econ(), model.big_k2())).collect();
    let mut ranking: Vec<usize> = (0..strategies.len()).collect();
    ranking.sort_by(|&a, &b| estimates[b].mean.total_cmp(&estimates[a].mean));
    let mut differences = Vec::new();
    for i in 0..strategies.len() {
        for j in i + 1..strategies.len() {
            let d: Vec<f64> = runs[i].iter().zip(&runs[j]).map(|(a, b)| unit_value(a) - unit_value(b)).collect();
            let (mean, std_error) = mean_and_se(&d);
            differences.push(PairwiseDifference {
                first: strategies[i].name.clone(),
                second: strategies[j].name.clone(),
                mean,
                std_error,
            });
        }
    }
    Ok(Comparison { names: strategies.iter().map(|s| s.name.clone()).collect(), estimates, ranking, differences })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mut sum = 0.0;
    for x in v {
        sum += x;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for x in v {
        ss += (x - mean).powi(2);
    }
    (mean, if n > 1.0 { (ss / (n - 1.0)).sqrt() / n.sqrt() } else { f64::INFINITY })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub coarse: SimEstimate,
    pub fine: SimEstimate,
    /// Mean and standard error of per-path `fine − coarse`.
    pub difference: f64,
    pub difference_se: f64,
}

/// Runs the step sizes `Δt` and `Δt/2` on coupled Brownian paths: the
/// coarse increment is the sum of the two fine ones.
pub fn simulate_refined_pair(
    dynamics: &Dynamics,
    dividends: DividendRule,
    econ: &EconParams,
    big_k2: f64,
    x0: f64,
    cfg: &SimConfig,
) -> Result<RefinementCheck> {
    cfg.validate()?;
    dividends.validate()?;
    check_start(x0)?;
    if cfg.antithetic {
        return Err(Error::InvalidConfig("refinement check runs without antithetic pairs".into()));
    }
    let engine = Engine { dynamics, dividends, econ: *econ, ruin_check: cfg.ruin_check };
    let steps = cfg.steps();
    let fine_cfg = SimConfig { dt: 0.5 * cfg.dt, ..*cfg };
    let pairs: Vec<(PathOutcome, PathOutcome)> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut normals = rng(cfg.seed, 3 * p);
            let mut replay = normals.clone();
            let mut u_fine = rng(cfg.seed, 3 * p + 1);
            let fine = engine.run(x0, fine_cfg.dt, 2 * steps, || normals.sample(StandardNormal), || u_fine.random());
            let mut u_coarse = rng(cfg.seed, 3 * p + 2);
            let coarse = engine.run(
                x0,
                cfg.dt,
                steps,
                || {
                    let (a, b): (f64, f64) = (replay.sample(StandardNormal), replay.sample(StandardNormal));
                    (a + b) * std::f64::consts::FRAC_1_SQRT_2
                },
                || u_coarse.random(),
            );
            (coarse, fine)
        })
        .collect();
    let wrap = |f: fn(&(PathOutcome, PathOutcome)) -> PathOutcome| -> Vec<[PathOutcome; 2]> {
        pairs.iter().map(|p| { let o = f(p); [o, o] }).collect()
    };
    let coarse = summarize(&wrap(|p| p.0), cfg, econ, big_k2);
    let fine = summarize(&wrap(|p| p.1), &fine_cfg, econ, big_k2);
    let d: Vec<f64> = pairs.iter().map(|(c, f)| f.value - c.value).collect();
    let (difference, difference_se) = mean_and_se(&d);
    Ok(RefinementCheck { coarse, fine, difference, difference_se })
}
