//! Numerical verification that a value function solves the QVI
//! `max{ sup_q (L^q − δ) W, MW − W } = 0`.
//!
//! The checker uses `W` and its analytic derivatives only through
//! [`ValueFunction`]'s public evaluators, and maximizes over retentions by
//! brute force on a grid, so it is independent of the curve construction.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Case, Model};
use crate::numerics::{fd_weights, maximize};
use crate::policy::{RetentionCurve, ValueFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct QviOptions {
    /// Checkpoints in `(0, x̂)`.
    pub interior_points: usize,
    /// Checkpoints in `[x̂, 1.5 x̂]`.
    pub exterior_points: usize,
    /// Finite retention grid per axis (the `∞` sentinel is added).
    pub retention_grid: Vec<f64>,
    /// Generator tolerance; `None` means `1e-4 · δ · W(x₀)`.
    pub generator_tol: Option<f64>,
    pub intervention_tol: f64,
    pub slope_gap_tol: f64,
    pub curvature_gap_tol: f64,
    pub band_slope_tol: f64,
    /// Required share of interior checkpoints whose grid argmax lies
    /// within one cell of the solver's retentions.
    pub argmax_share: f64,
}

impl Default for QviOptions {
    fn default() -> Self {
        Self {
            interior_points: 120,
            exterior_points: 20,
            retention_grid: default_retention_grid(),
            generator_tol: None,
            intervention_tol: 1e-7,
            slope_gap_tol: 1e-6,
            curvature_gap_tol: 1e-5,
            band_slope_tol: 1e-8,
            argmax_share: 0.95,
        }
    }
}

/// `0` followed by 60 log-spaced values on `[1e-3, 1e3]`. Zero is needed for
/// the full-cession region, where the optimum has `q₂ = 0`.
pub fn default_retention_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..60).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 59.0)));
    g
}

/// `MW(x) = sup_{0 ≤ y ≤ x} W(y) + k(x − y) − K` and the maximizing `y`
/// (post-dividend surplus). Dense grid in `y`, then Brent refinement around
/// the best grid cell.
pub fn intervention_value<F>(w: F, x: f64, k: f64, big_k: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const N: usize = 256;
    let obj = |y: f64| w(y) + k * (x - y) - big_k;
    let ys: Vec<f64> = (0..=N).map(|i| x * i as f64 / N as f64).collect();
    let vals: Vec<f64> = ys.iter().map(|&y| obj(y)).collect();
    let (i, &best) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let (lo, hi) = (ys[i.saturating_sub(1)], ys[(i + 1).min(N)]);
    match maximize(obj, lo, hi, 1e-12 * x.max(1.0)) {
        Ok((y, v)) if v >= best => (v, y),
        _ => (best, ys[i]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorRecord {
    pub x: f64,
    /// `(L^q − δ)W` at the solver's retentions.
    pub at_solver: f64,
    /// Grid maximum of `(L^q − δ)W`.
    pub grid_max: f64,
    #[serde(with = "crate::serde_float::pair")]
    pub argmax: [f64; 2],
    #[serde(with = "crate::serde_float::pair")]
    pub solver: [f64; 2],
    pub argmax_match: bool,
}

/// Generator residual at `x` over `grid × grid` (plus `∞`), in canonical
/// class order.
pub fn generator_residual(vf: &ValueFunction, x: f64, grid: &[f64]) -> Result<GeneratorRecord> {
    let curve = vf.curve();
    let model = curve.aux().model();
    let (w, w1, w2) = (vf.eval_w(x)?, vf.eval_w_prime(x)?, vf.eval_w_second(x)?);
    let delta = model.econ().discount;
    let gen = |q1: f64, q2: f64| 0.5 * model.variance(q1, q2) * w2 + model.drift(q1, q2) * w1 - delta * w;
    let (s1, s2) = curve.eval_q(x)?;
    let axis: Vec<f64> = grid.iter().copied().chain(std::iter::once(f64::INFINITY)).collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (i, &q1) in axis.iter().enumerate() {
        for (j, &q2) in axis.iter().enumerate() {
            let v = gen(q1, q2);
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let argmax = [axis[best.1], axis[best.2]];
    let argmax_match = cell_match(model, 0, &axis, best.1, s1) && cell_match(model, 1, &axis, best.2, s2);
    Ok(GeneratorRecord { x, at_solver: gen(s1, s2), grid_max: best.0, argmax, solver: [s1, s2], argmax_match })
}

/// Whether grid index `idx` is within one cell of retention `q`. Retentions
/// whose survival probability is negligible are equivalent to `∞`.
fn cell_match(model: &Model, class: usize, axis: &[f64], idx: usize, q: f64) -> bool {
    let saturated = |q: f64| q.is_infinite() || model.class(class).survival(q) < 1e-12;
    let n = axis.len();
    let norm = |i: usize| if saturated(axis[i]) { n - 1 } else { i };
    let target = if saturated(q) {
        n - 1
    } else {
        // nearest finite node in log distance (0 matches index 0)
        let finite = &axis[..n - 1];
        let j = finite.partition_point(|&g| g < q).min(finite.len() - 1);
        if j > 0 && (q / finite[j - 1]).ln() < (finite[j] / q).ln() {
            j - 1
        } else {
            j
        }
    };
    let got = norm(idx);
    // the last finite node, the cell above it and ∞ are adjacent
    got.abs_diff(target) <= 1 || (got >= n - 2 && target >= n - 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PastingGap {
    pub label: &'static str,
    pub x: f64,
    /// `|W′(x+) − W′(x−)| / max(1, |W′|)` from one-sided finite differences.
    pub slope_gap: f64,
    /// `|W″(x+) − W″(x−)|`, where continuity is expected.
    pub curvature_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub gaps: Vec<PastingGap>,
    /// `W′(x̂) − k` from the analytic left limit.
    pub band_slope_error: f64,
    /// Maximum deviation of `W` from the line of slope `k` beyond `x̂`.
    pub linearity_error: f64,
}

/// One-sided derivative estimates of orders 1 and 2 at `x`.
fn one_sided<F: Fn(f64) -> f64>(w: &F, x: f64, h: f64, side: f64) -> (f64, f64) {
    let nodes: Vec<f64> = (0..6).map(|j| x + side * h * j as f64).collect();
    let vals: Vec<f64> = nodes.iter().map(|&y| w(y)).collect();
    let d = |order: usize| fd_weights(x, &nodes, order).iter().zip(&vals).map(|(c, v)| c * v).sum::<f64>();
    (d(1), d(2))
}

pub fn smoothness_check(vf: &ValueFunction) -> Result<SmoothnessReport> {
    let w = |x: f64| vf.eval_w(x).unwrap_or(f64::NAN);
    let x0 = vf.x0();
    let mut points = Vec::new();
    if let Some(xt0) = vf.curve().x_tilde0() {
        points.push(("x_tilde0", xt0, true));
    }
    points.push(("x0", x0, true));
    points.push(("x_hat", vf.x_hat(), false));
    let mut gaps = Vec::new();
    for (label, x, curvature) in points {
        let h = 2e-3 * x.clamp(0.05, 1.0);
        let (l1, l2) = one_sided(&w, x, h, -1.0);
        let (r1, r2) = one_sided(&w, x, h, 1.0);
        gaps.push(PastingGap {
            label,
            x,
            slope_gap: (r1 - l1).abs() / l1.abs().max(1.0),
            curvature_gap: curvature.then_some((r2 - l2).abs()),
        });
    }
    let k = vf.econ().tax_retention;
    let band_slope_error = vf.left_derivatives_at_band()?.0 - k;
    let base = vf.eval_w(vf.x_hat())?;
    let linearity_error = (1..=10)
        .map(|i| {
            let dx = i as f64 * vf.x_hat() / 10.0;
            (vf.eval_w(vf.x_hat() + dx).unwrap_or(f64::NAN) - base - k * dx).abs()
        })
        .fold(0.0, f64::max);
    Ok(SmoothnessReport { gaps, band_slope_error, linearity_error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiRecord {
    pub x: f64,
    pub q1_star: f64,
    /// `max_grid φ − φ(q₁*, 0)`; should be ≤ 0.
    pub grid_excess: f64,
    #[serde(with = "crate::serde_float::pair")]
    pub grid_argmax: [f64; 2],
    /// `∂φ/∂q₁` at `(q₁*, 0)`.
    pub d1_at_star: f64,
    /// Largest `∂φ/∂q₁` over `q₁ > q₁*`, `q₂ = 0`; should be < 0.
    pub d1_above_max: f64,
    /// Largest `∂φ/∂q₂` along `∂φ/∂q₁ = 0`; should be ≤ 0.
    pub d2_on_ridge_max: f64,
    pub passed: bool,
}

/// Checks, on the full-cession region `(0, x̃₀)`, that
/// `φ(q) = d(q) − (θ₁/(2q₁*)) b²(q)` is maximized at `(q₁*, 0)`.
pub fn phi_boundary_check(curve: &RetentionCurve, x: f64, grid: &[f64]) -> Result<PhiRecord> {
    let Some(xt0) = curve.x_tilde0() else {
        return Err(Error::WrongCase { expected: Case::Case2, found: curve.case() });
    };
    if !(x > 0.0 && x < xt0) {
        return Err(Error::Domain { q: x, z_l: xt0 });
    }
    let m = curve.aux().model();
    let (c1, c2, c3) = (m.c1(), m.c2(), m.c3());
    let (t1, t2) = (m.class(0).reinsurer_loading, m.class(1).reinsurer_loading);
    let (a, b) = (m.class(0), m.class(1));
    let q1s = curve.eval_q(x)?.0;
    let phi = |q1: f64, q2: f64| m.drift(q1, q2) - t1 / (2.0 * q1s) * m.variance(q1, q2);
    let d1 = |q1: f64, q2: f64| c1 * t1 * a.survival(q1) * (1.0 - (q1 + c3 / c1 * b.g(q2)) / q1s);
    let d2 = |q1: f64, q2: f64| b.survival(q2) * (c2 * t2 - t1 / q1s * (c2 * q2 + c3 * a.g(q1)));

    let star = phi(q1s, 0.0);
    let axis: Vec<f64> = grid.iter().copied().chain([q1s, f64::INFINITY]).collect();
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for &q1 in &axis {
        for &q2 in &axis {
            let v = phi(q1, q2);
            if v > best.0 {
                best = (v, [q1, q2]);
            }
        }
    }
    let scale = star.abs().max(1.0);
    let d1_at_star = d1(q1s, 0.0);
    let d1_above_max = grid
        .iter()
        .filter(|&&q| q > q1s * (1.0 + 1e-6) && a.survival(q) > 1e-12)
        .map(|&q| d1(q, 0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let d2_on_ridge_max = grid
        .iter()
        .map(|&q2| (q1s - c3 / c1 * b.g(q2), q2))
        .filter(|&(q1, _)| q1 >= 0.0)
        .map(|(q1, q2)| d2(q1, q2))
        .fold(f64::NEG_INFINITY, f64::max);
    let grid_excess = best.0 - star;
    let passed = grid_excess <= 1e-12 * scale
        && d1_at_star.abs() <= 1e-9 * c1 * t1
        && d1_above_max < 0.0
        && d2_on_ridge_max <= 1e-12;
    Ok(PhiRecord { x, q1_star: q1s, grid_excess, grid_argmax: best.1, d1_at_star, d1_above_max, d2_on_ridge_max, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QviPoint {
    pub x: f64,
    pub w: f64,
    pub intervention: f64,
    /// `MW − W`.
    pub intervention_gap: f64,
    pub generator: GeneratorRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QviReport {
    pub generator_tol: f64,
    pub intervention_tol: f64,
    pub points: Vec<QviPoint>,
    /// Over interior checkpoints `(0, x̂)`.
    pub max_generator: f64,
    pub max_solver_residual: f64,
    pub max_intervention_gap: f64,
    /// Over `[x̂, 1.5x̂]`: `max |MW − W|` and the generator maximum.
    pub max_exterior_intervention_gap: f64,
    pub max_exterior_generator: f64,
    pub argmax_share: f64,
    pub smoothness: SmoothnessReport,
    pub phi: Vec<PhiRecord>,
    pub failures: Vec<String>,
    pub passed: bool,
}

pub fn check(vf: &ValueFunction, opts: &QviOptions) -> Result<QviReport> {
    let econ = *vf.econ();
    let (k, big_k) = (econ.tax_retention, econ.transaction_cost);
    let gen_tol = opts.generator_tol.unwrap_or(1e-4 * econ.discount * vf.eval_w(vf.x0())?);
    let x_hat = vf.x_hat();
    let mut xs: Vec<f64> = (1..=opts.interior_points).map(|i| x_hat * i as f64 / (opts.interior_points + 1) as f64).collect();
    let n_interior = xs.len();
    xs.extend((0..opts.exterior_points).map(|i| x_hat * (1.0 + 0.5 * i as f64 / opts.exterior_points.max(1) as f64)));

    let points = xs
        .par_iter()
        .map(|&x| {
            let w = vf.eval_w(x)?;
            let (mw, _) = intervention_value(|y| vf.eval_w(y).unwrap_or(f64::NAN), x, k, big_k);
            let generator = generator_residual(vf, x, &opts.retention_grid)?;
            Ok(QviPoint { x, w, intervention: mw, intervention_gap: mw - w, generator })
        })
        .collect::<Result<Vec<_>>>()?;
    let (interior, exterior) = points.split_at(n_interior);

    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let max_generator = fold_max(&mut interior.iter().map(|p| p.generator.grid_max));
    let max_solver_residual = fold_max(&mut interior.iter().map(|p| p.generator.at_solver.abs()));
    let max_intervention_gap = fold_max(&mut interior.iter().map(|p| p.intervention_gap));
    let max_exterior_intervention_gap = fold_max(&mut exterior.iter().map(|p| p.intervention_gap.abs()));
    let max_exterior_generator = fold_max(&mut exterior.iter().map(|p| p.generator.grid_max));
    let argmax_share = interior.iter().filter(|p| p.generator.argmax_match).count() as f64 / n_interior.max(1) as f64;
    let smoothness = smoothness_check(vf)?;

    let phi = match vf.curve().x_tilde0() {
        Some(xt0) => (1..=10)
            .map(|i| phi_boundary_check(vf.curve(), xt0 * i as f64 / 11.0, &opts.retention_grid))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    let mut failures = Vec::new();
    let mut need = |ok: bool, msg: String| {
        if !ok {
            failures.push(msg);
        }
    };
    need(max_generator <= gen_tol, format!("generator max {max_generator:.3e} exceeds {gen_tol:.3e} on (0, x_hat)"));
    need(
        max_intervention_gap <= opts.intervention_tol,
        format!("MW - W reaches {max_intervention_gap:.3e} on (0, x_hat)"),
    );
    need(
        max_exterior_intervention_gap <= opts.intervention_tol,
        format!("|MW - W| reaches {max_exterior_intervention_gap:.3e} on [x_hat, 1.5 x_hat]"),
    );
    need(
        max_exterior_generator <= gen_tol,
        format!("generator max {max_exterior_generator:.3e} exceeds {gen_tol:.3e} beyond x_hat"),
    );
    need(argmax_share >= opts.argmax_share, format!("grid argmax matches the curve at only {:.1}% of points", 100.0 * argmax_share));
    for g in &smoothness.gaps {
        need(g.slope_gap <= opts.slope_gap_tol, format!("W' gap {:.3e} at {}", g.slope_gap, g.label));
        if let Some(c) = g.curvature_gap {
            need(c <= opts.curvature_gap_tol, format!("W'' gap {c:.3e} at {}", g.label));
        }
    }
    need(
        smoothness.band_slope_error.abs() <= opts.band_slope_tol,
        format!("W'(x_hat) - k = {:.3e}", smoothness.band_slope_error),
    );
    for p in &phi {
        need(p.passed, format!("phi maximum not at (q1*, 0) for x = {:.4}", p.x));
    }
    let passed = failures.is_empty();
    Ok(QviReport {
        generator_tol: gen_tol,
        intervention_tol: opts.intervention_tol,
        points,
        max_generator,
        max_solver_residual,
        max_intervention_gap,
        max_exterior_intervention_gap,
        max_exterior_generator,
        argmax_share,
        smoothness,
        phi,
        failures,
        passed,
    })
}
