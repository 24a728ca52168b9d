use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thinrein_core::simulator::{simulate, SimEstimate, Strategy};
use thinrein_core::{qvi, solve, Solution};

use crate::config::{resolve_param, RunConfig};
use crate::output::{csv_bytes, fmt_float, json_bytes, write_atomic};
use crate::CliError;

fn solve_config(cfg: &RunConfig) -> Result<Solution, CliError> {
    Ok(solve(&cfg.model_params()?, cfg.numerics.tolerances())?)
}

fn linspace(hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i + 1 == n { hi } else { hi * i as f64 / (n - 1) as f64 })
}

pub fn curve_rows(s: &Solution, n: usize) -> Result<Vec<[String; 4]>, CliError> {
    linspace(s.x0(), n)
        .map(|x| {
            let (q1, q2) = s.eval_q(x)?;
            Ok([fmt_float(x), fmt_float(q1), fmt_float(q2), fmt_float(q1 - q2)])
        })
        .collect()
}

pub fn value_rows(s: &Solution, n: usize, extent: f64) -> Result<Vec<[String; 3]>, CliError> {
    linspace(extent * s.value.x_hat(), n)
        .map(|x| Ok([fmt_float(x), fmt_float(s.eval_w(x)?), fmt_float(s.value.eval_w_prime(x)?)]))
        .collect()
}

pub fn cmd_solve(config: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let s = solve_config(&cfg)?;
    let dir = cfg.output_dir();
    let n = &cfg.numerics;
    write_atomic(&dir.join("constants.json"), &json_bytes(&s.record()?)?)?;
    write_atomic(&dir.join("curves.csv"), &csv_bytes(&["x", "q1", "q2", "diff"], curve_rows(&s, n.curve_points)?)?)?;
    write_atomic(
        &dir.join("value.csv"),
        &csv_bytes(&["x", "W", "Wprime"], value_rows(&s, n.value_points, n.value_extent)?)?,
    )?;
    let band = s.value.band();
    println!(
        "{:?} x0 = {:.6} band = ({:.6}, {:.6}) c* = {:.6} -> {}",
        s.constants.case,
        s.x0(),
        band.x_tilde,
        band.x_hat,
        s.value.c_star(),
        dir.display()
    );
    Ok(())
}

const SWEEP_HEADER: [&str; 11] =
    ["parameter", "value", "case", "z_l", "z_k", "x_tilde0", "x0", "c_star", "x_tilde", "x_hat", "error"];

fn sweep_row(doc: &serde_json::Value, pointer: &str, param: &str, v: f64) -> [String; 11] {
    let solved = (|| {
        let mut doc = doc.clone();
        *doc.pointer_mut(pointer).expect("resolved") = serde_json::json!(v);
        let cfg = RunConfig::from_value(doc)?;
        solve_config(&cfg)
    })();
    let mut row: [String; 11] = Default::default();
    row[0] = param.to_string();
    row[1] = fmt_float(v);
    match solved {
        Ok(s) => {
            let c = &s.constants;
            let band = s.value.band();
            row[2] = serde_json::to_value(c.case).ok().and_then(|t| t.as_str().map(String::from)).unwrap_or_default();
            let x_tilde0 = s.curve.x_tilde0().unwrap_or(0.0);
            for (slot, v) in row[3..10].iter_mut().zip([c.z_l, c.z_k, x_tilde0, s.x0(), s.value.c_star(), band.x_tilde, band.x_hat]) {
                *slot = fmt_float(v);
            }
        }
        Err(e) => row[10] = e.to_string(),
    }
    row
}

pub fn cmd_sweep(config: &Path, param: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let base = RunConfig::load(config)?;
    let text = std::fs::read_to_string(config).map_err(|e| CliError::Io(config.to_path_buf(), e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let pointer = resolve_param(&doc, param)?;
    let rows: Vec<_> = values.par_iter().map(|&v| sweep_row(&doc, &pointer, param, v)).collect();
    let bytes = csv_bytes(&SWEEP_HEADER, rows)?;
    write_atomic(&base.output_dir().join("sweep.csv"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn cmd_verify(config: &Path, perturb: Option<f64>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    if let Some(f) = perturb {
        if !(f.is_finite() && f > 0.0) {
            return Err(CliError::Usage(format!("--perturb must be a positive factor, got {f}")));
        }
    }
    let s = solve_config(&cfg)?;
    let vf = match perturb {
        Some(f) => s.value.scaled(f),
        None => s.value.clone(),
    };
    let report = qvi::check(&vf, &cfg.numerics.qvi_options())?;
    let bytes = json_bytes(&report)?;
    write_atomic(&cfg.output_dir().join("qvi_report.json"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if report.passed {
        eprintln!(
            "QVI check passed: generator max {:.3e} (tol {:.3e}), intervention gap {:.3e}",
            report.max_generator, report.generator_tol, report.max_intervention_gap
        );
        Ok(())
    } else {
        Err(CliError::CheckFailed(report.failures.join("; ")))
    }
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub strategy: String,
    pub x0: f64,
    pub estimate: SimEstimate,
    pub w: f64,
    pub deviation: f64,
    /// `3·SE + truncation bound`.
    pub tolerance: f64,
    /// Optimal: `|estimate − W| ≤ tolerance`; baselines: `estimate ≤ W + tolerance`.
    pub accepted: bool,
}

pub struct SimulateArgs<'a> {
    pub x0: f64,
    pub strategy: &'a str,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

pub fn cmd_simulate(config: &Path, args: SimulateArgs<'_>) -> Result<(), CliError> {
    let mut doc: serde_json::Value = {
        let text = std::fs::read_to_string(config).map_err(|e| CliError::Io(config.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config { field: "<document>".into(), reason: e.to_string() })?
    };
    // overrides go through the same validation as the file
    let sim = doc.as_object_mut().map(|m| m.entry("simulation").or_insert_with(|| serde_json::json!({})));
    if let Some(serde_json::Value::Object(sim)) = sim {
        let mut set = |k: &str, v: serde_json::Value| {
            sim.insert(k.into(), v);
        };
        if let Some(s) = args.seed {
            set("seed", s.into());
        }
        if let Some(p) = args.paths {
            set("paths", p.into());
        }
        if let Some(dt) = args.dt {
            set("dt", dt.into());
        }
        if let Some(h) = args.horizon {
            set("horizon", h.into());
        }
    }
    let cfg = RunConfig::from_value(doc)?;
    if !(args.x0 >= 0.0 && args.x0.is_finite()) {
        return Err(CliError::Usage(format!("--x0 must be a finite non-negative surplus, got {}", args.x0)));
    }
    let s = solve_config(&cfg)?;
    let strategy = Strategy::named(args.strategy, &s).map_err(|e| CliError::Usage(e.to_string()))?;
    let estimate = simulate(s.model(), &strategy, args.x0, &cfg.simulation)?;
    let w = s.eval_w(args.x0)?;
    let tolerance = 3.0 * estimate.std_error + estimate.truncation_bound;
    let deviation = estimate.mean - w;
    let accepted = if args.strategy == "optimal" { deviation.abs() <= tolerance } else { deviation <= tolerance };
    let report = SimulationReport { strategy: strategy.name, x0: args.x0, estimate, w, deviation, tolerance, accepted };
    let bytes = json_bytes(&report)?;
    write_atomic(&cfg.output_dir().join(format!("simulate-{}.json", report.strategy)), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if accepted {
        Ok(())
    } else {
        Err(CliError::SimulationRejected(format!(
            "estimate {:.6} ± {:.6} vs W = {:.6}: deviation {:.3e} exceeds {:.3e}",
            report.estimate.mean, report.estimate.std_error, w, deviation, tolerance
        )))
    }
}
