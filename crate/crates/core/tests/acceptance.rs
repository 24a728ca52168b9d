//! One test per acceptance criterion; each prints a single PASS/FAIL line.
//! Run with `--nocapture` to see the lines.

mod common;

use std::time::Instant;

use common::*;
use thinrein_core::qvi::{self, default_retention_grid, intervention_value, phi_boundary_check, QviOptions};
use thinrein_core::simulator::{compare_strategies, simulate, SimConfig, Strategy};
use thinrein_core::{solve, Case, ModelParams, Solution, Tolerances};

fn verdict(id: u32, pass: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id}: {detail}");
}

fn solved(p: &ModelParams) -> Solution {
    solve(p, Tolerances::default()).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn critical_points(id: u32, params: &[ModelParams], expected: &[f64], tol: f64, budget_s: f64) {
    let t = Instant::now();
    let got: Vec<f64> = params.iter().map(|p| solved(p).x0()).collect();
    let secs = t.elapsed().as_secs_f64();
    let worst = got.iter().zip(expected).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max);
    verdict(
        id,
        worst <= tol && secs < budget_s,
        format!("x0 = {got:.4?} vs {expected:?}, max |err| {worst:.4} (tol {tol:e}), {secs:.2}s"),
    );
}

#[test]
fn criterion_1_critical_point_vs_common_intensity() {
    let params: Vec<_> = [1.0, 1.5, 2.0].iter().map(|&l| example(l, 1.2)).collect();
    critical_points(1, &params, &[2.2170, 2.4666, 2.7262], 2e-3, 60.0);
}

#[test]
fn criterion_2_critical_point_vs_reinsurer_loading() {
    let params: Vec<_> = [1.2, 1.5, 2.1].iter().map(|&t| example(2.0, t)).collect();
    critical_points(2, &params, &[2.7262, 4.8197, 7.8058], 5e-3, 120.0);
}

#[test]
fn criterion_3_retention_curve_shape() {
    let sols: Vec<Solution> = [1.0, 1.5, 2.0].iter().map(|&l| solved(&example(l, 1.2))).collect();
    let mut increasing = true;
    let mut worst_ratio = 0.0f64;
    for s in &sols {
        let x0 = s.x0();
        let qs: Vec<(f64, f64)> = (0..=400).map(|i| s.eval_q(x0 * i as f64 / 401.0).unwrap()).collect();
        increasing &= qs.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        for i in 20..=380 {
            let (q1, q2) = qs[i];
            worst_ratio = worst_ratio.max((q1 - q2).abs() / q1);
        }
    }
    let x_common = sols.iter().map(|s| s.x0()).fold(f64::INFINITY, f64::min);
    let mut ordered = true;
    for i in 1..=20 {
        let x = x_common * i as f64 / 21.0;
        let q: Vec<(f64, f64)> = sols.iter().map(|s| s.eval_q(x).unwrap()).collect();
        ordered &= q.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    }
    verdict(
        3,
        increasing && ordered && worst_ratio < 0.5,
        format!("increasing in x: {increasing}, decreasing in lambda3 at 20 points: {ordered}, max interior |q1-q2|/q1 = {worst_ratio:.3}"),
    );
}

#[test]
fn criterion_4_qvi_residuals() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, params) in [("case1", base()), ("case2", case2())] {
        let s = solved(&params);
        let v = &s.value;
        let opts = QviOptions::default();
        let report = qvi::check(v, &opts).unwrap();
        let tol = 1e-4 * params.econ.discount * s.eval_w(s.x0()).unwrap();
        let (k, big_k) = (params.econ.tax_retention, params.econ.transaction_cost);
        let (mw, _) = intervention_value(|y| v.eval_w(y).unwrap(), v.x_hat(), k, big_k);
        let at_band = (mw - v.eval_w(v.x_hat()).unwrap()).abs();
        let control = qvi::check(&v.scaled(1.01), &opts).unwrap();
        let ok = report.max_generator.abs() <= tol
            && report.max_solver_residual.abs() <= tol
            && report.max_intervention_gap <= 1e-7
            && at_band <= 1e-7
            && !control.passed;
        pass &= ok;
        lines.push(format!(
            "{name}: generator {:.1e} / solver {:.1e} (tol {tol:.1e}), max MW-W {:.1e}, |MW-W| at x_hat {at_band:.1e}, control fails: {}",
            report.max_generator, report.max_solver_residual, report.max_intervention_gap, !control.passed
        ));
    }
    verdict(4, pass, lines.join("; "));
}

#[test]
fn criterion_5_smooth_pasting() {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, params) in [("case1", base()), ("case2", case2())] {
        let s = solved(&params);
        let r = qvi::smoothness_check(&s.value).unwrap();
        for g in &r.gaps {
            let ok = g.slope_gap <= 1e-6 && (g.label != "x0" || g.curvature_gap.unwrap() <= 1e-5);
            pass &= ok;
            lines.push(format!("{name} {}: W' gap {:.1e}, W'' gap {:.1e}", g.label, g.slope_gap, g.curvature_gap.unwrap_or(0.0)));
        }
        pass &= r.band_slope_error.abs() <= 1e-8;
        lines.push(format!("{name} W'(x_hat)-k {:.1e}", r.band_slope_error));
    }
    verdict(5, pass, lines.join("; "));
}

#[test]
fn criterion_6_monte_carlo_agreement() {
    let s = solved(&base());
    let st = Strategy::optimal(&s);
    let cfg = SimConfig { paths: 100_000, dt: 1e-3, horizon: 40.0, ..SimConfig::default() };
    let (x0, x_hat) = (s.x0(), s.value.x_hat());
    let mut pass = true;
    let mut lines = Vec::new();
    for x in [0.5 * x0, x0, 0.5 * (x0 + x_hat)] {
        let t = Instant::now();
        let e = simulate(s.model(), &st, x, &cfg).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let w = s.eval_w(x).unwrap();
        let ok = (e.mean - w).abs() <= 3.0 * e.std_error + e.truncation_bound && secs < 300.0;
        pass &= ok;
        lines.push(format!("x {x:.4}: {:.5} ± {:.5} vs W {w:.5} ({:.1} SE, {secs:.0}s)", e.mean, e.std_error, (e.mean - w) / e.std_error));
    }
    verdict(6, pass, lines.join("; "));
}

#[test]
fn criterion_7_dominance_over_baselines() {
    let s = solved(&base());
    let names = ["optimal", "no-reinsurance", "proportional", "band-up", "band-down"];
    let strategies: Vec<Strategy> = names.iter().map(|n| Strategy::named(n, &s).unwrap()).collect();
    let cfg = SimConfig { paths: 50_000, dt: 1e-3, horizon: 40.0, ..SimConfig::default() };
    let c = compare_strategies(s.model(), &strategies, s.x0(), &cfg).unwrap();
    let opt = c.estimates[0];
    let mut pass = true;
    let mut lines = vec![format!("optimal {:.4} ± {:.4}", opt.mean, opt.std_error)];
    for (i, e) in c.estimates.iter().enumerate().skip(1) {
        pass &= opt.mean >= e.mean - 3.0 * e.std_error;
        let d = c.differences.iter().find(|d| d.first == "optimal" && d.second == names[i]).unwrap();
        lines.push(format!("{} {:.4} ± {:.4} (CRN diff {:+.4} ± {:.4})", names[i], e.mean, e.std_error, d.mean, d.std_error));
    }
    verdict(7, pass, lines.join("; "));
}

#[test]
fn criterion_8_structural_identities() {
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, params) in [("case1", base()), ("case2", case2())] {
        let s = solved(&params);
        let aux = s.aux();
        let c = &s.constants;
        let zl = aux.z_l();
        // H(z_l) against the reward k at z_l, with k(0⁺) = k₀
        let k_at = if zl == 0.0 { aux.model().k0() } else { aux.k_fn(zl) };
        let h_gap = (aux.h(zl).unwrap() - k_at).abs();
        let b_sum = (c.b1 * c.r_plus + c.b2 * c.r_minus - 1.0).abs();
        let b_sq = (c.b1 * c.r_plus.powi(2) + c.b2 * c.r_minus.powi(2)).abs();
        let u = s.value.marginal();
        let u_gap = (u.u(s.x0()).unwrap() - 1.0).abs().max(u.u_prime(s.x0()).unwrap().abs());
        let mut ok = h_gap <= 1e-8 && b_sum <= 1e-10 && b_sq <= 1e-10 && u_gap <= 1e-8;
        let mut line = format!("{name}: |H(z_l)-k| {h_gap:.1e}, b-identities {b_sum:.1e}/{b_sq:.1e}, U(x0) {u_gap:.1e}");
        match c.case {
            Case::Case1 => {
                let hq0 = aux.h(aux.q0().unwrap()).unwrap().abs();
                ok &= hq0 <= 1e-9;
                line += &format!(", |H(q0)| {hq0:.1e}");
            }
            Case::Case2 => {
                let k2 = s.value.case2_constants().unwrap().unwrap();
                let rel = (k2.big_c3 - aux.k_fn(zl) / params.econ.discount * k2.big_c1).abs() / k2.big_c3.abs();
                ok &= rel <= 1e-8;
                line += &format!(", C3 identity rel {rel:.1e}");
            }
        }
        pass &= ok;
        lines.push(line);
    }
    verdict(8, pass, lines.join("; "));
}

#[test]
fn criterion_9_small_scale_oracles() {
    let mut pass = true;
    let mut lines = Vec::new();

    let m = thinrein_core::Model::new(&base()).unwrap();
    let mut moment_err = 0.0f64;
    for l in 0..2 {
        let class = m.class(l);
        for q in [0.01, 0.3, 1.0, 2.5, 8.0] {
            let g = simpson(|x| class.survival(x), 0.0, q, 20_000);
            let big_g = simpson(|x| 2.0 * x * class.survival(x), 0.0, q, 20_000);
            moment_err = moment_err.max((class.g(q) - g).abs()).max((class.g2m(q) - big_g).abs());
        }
    }
    pass &= moment_err <= 1e-10;
    lines.push(format!("g/G vs quadrature {moment_err:.1e}"));

    let mut hp_err = 0.0f64;
    let mut trip_err = 0.0f64;
    for params in [base(), case2()] {
        let s = solved(&params);
        let aux = s.aux();
        let lo = aux.z_l().max(aux.z_k()).max(0.05);
        for q in [lo * 1.5, 1.0, 2.0, 5.0].into_iter().filter(|&q| q > lo) {
            let h = 1e-5 * q;
            let fd = (aux.h(q + h).unwrap() - aux.h(q - h).unwrap()) / (2.0 * h);
            let an = aux.h_prime(q).unwrap();
            hp_err = hp_err.max((fd - an).abs() / an.abs());
        }
        for i in 1..40 {
            let x = s.x0() * i as f64 / 40.0;
            let q1 = s.curve.eval_q(x).unwrap().0;
            trip_err = trip_err.max((s.curve.x_of_q1(q1).unwrap() - x).abs());
        }
    }
    pass &= hp_err <= 1e-6 && trip_err <= 1e-8;
    lines.push(format!("H' vs central differences {hp_err:.1e} rel, inverse round trips {trip_err:.1e}"));

    let s = solved(&case2());
    let xt0 = s.curve.x_tilde0().unwrap();
    let grid = default_retention_grid();
    let mut phi_ok = true;
    for i in 1..10 {
        let r = phi_boundary_check(&s.curve, xt0 * i as f64 / 10.0, &grid).unwrap();
        phi_ok &= r.passed && r.grid_argmax == [r.q1_star, 0.0];
    }
    pass &= phi_ok;
    lines.push(format!("phi grid argmax at (q1*, 0): {phi_ok}"));
    verdict(9, pass, lines.join("; "));
}
