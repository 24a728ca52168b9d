//! Optimal retention curves `x ↦ (q₁(x), q₂(x))` on `[0, x₀)`.
//!
//! Each curve segment is integrated as an ODE in a compactified parameter
//! `s ∈ [0, 1]`: on an unbounded segment `q = q_start + w s/(1 − s)`, so the
//! point `q = ∞` (where `x = x₀`) is the regular endpoint `s = 1`. Alongside
//! `x(s)` the integrator carries `Λ = ∫₀^x A` and `S = ∫₀^x e^{−Λ}`, which
//! the value function needs; everything between accepted steps is recovered
//! by one extra Dormand-Prince step from the nearest node, so evaluations are
//! exact to the integrator tolerance rather than interpolated.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::auxiliary::AuxContext;
use crate::error::{Error, Result};
use crate::model::Case;
use crate::numerics::{dopri5, dopri5_step, newton_bracketed, OdeNode, OdeOptions};

const X: usize = 0;
const LAMBDA: usize = 1;
const S_INT: usize = 2;

/// Upper bound on the step in `s`, so every segment has at least this many
/// nodes for export and for the node bracket searches.
const MIN_NODES: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentKind {
    /// Class 2 fully ceded (`q₂ = 0`), class-1 retention from `z_k` to `z_l`.
    FullCession,
    /// `q₂ = l₂⁻¹(l₁(q₁))`, class-1 retention from the start point to `∞`.
    Paired,
}

#[derive(Debug, Clone)]
struct Segment {
    kind: SegmentKind,
    q_start: f64,
    /// `∞` for the paired segment.
    q_end: f64,
    width: f64,
    nodes: Vec<OdeNode<3>>,
}

impl Segment {
    fn q_of(&self, s: f64) -> f64 {
        if self.q_end.is_finite() {
            self.q_start + (self.q_end - self.q_start) * s
        } else if s >= 1.0 {
            f64::INFINITY
        } else {
            self.q_start + self.width * s / (1.0 - s)
        }
    }

    fn s_of(&self, q: f64) -> f64 {
        if self.q_end.is_finite() {
            (q - self.q_start) / (self.q_end - self.q_start)
        } else if q.is_infinite() {
            1.0
        } else {
            let d = q - self.q_start;
            d / (self.width + d)
        }
    }

    fn dq_ds(&self, s: f64) -> f64 {
        if self.q_end.is_finite() {
            self.q_end - self.q_start
        } else {
            self.width / ((1.0 - s) * (1.0 - s))
        }
    }

    fn first(&self) -> &OdeNode<3> {
        &self.nodes[0]
    }

    fn last(&self) -> &OdeNode<3> {
        self.nodes.last().unwrap()
    }
}

/// Retention levels and curve integrals at one surplus level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveState {
    pub x: f64,
    pub q1: f64,
    pub q2: f64,
    /// `Λ(x) = ∫₀^x A(y) dy`.
    pub lambda: f64,
    /// `∫₀^x e^{−Λ(y)} dy`.
    pub integral: f64,
    /// Risk coefficient `A(x)`.
    pub a: f64,
}

#[derive(Debug, Clone)]
pub struct RetentionCurve {
    aux: Arc<AuxContext>,
    case: Case,
    segments: Vec<Segment>,
    x_tilde0: Option<f64>,
    x0: f64,
}

/// Serializable sample of a retention curve, in canonical class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub case: Case,
    #[serde(with = "crate::serde_float")]
    pub x_tilde0: f64,
    pub x0: f64,
    pub x: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

impl RetentionCurve {
    /// Builds the curve for whichever case `aux` is in.
    pub fn build(aux: Arc<AuxContext>) -> Result<Self> {
        match aux.case() {
            Case::Case1 => Self::build_case1(aux),
            Case::Case2 => Self::build_case2(aux),
        }
    }

    /// `q₁ = G⁻¹(x)` with `G(q) = ∫_{q₀}^q H′/(δ + H A)`.
    pub fn build_case1(aux: Arc<AuxContext>) -> Result<Self> {
        if aux.case() != Case::Case1 {
            return Err(Error::WrongCase { expected: Case::Case1, found: aux.case() });
        }
        let q0 = aux.q0()?;
        let paired = integrate_segment(&aux, SegmentKind::Paired, q0, f64::INFINITY, [0.0; 3])?;
        let mut curve = Self { aux, case: Case::Case1, segments: vec![paired], x_tilde0: None, x0: 0.0 };
        curve.finish()?;
        Ok(curve)
    }

    /// `q₁ = R₁⁻¹(x)`, `q₂ = 0` on `[0, x̃₀)`, then `q₁ = R₂⁻¹(x − x̃₀)` with
    /// paired `q₂` on `[x̃₀, x₀)`.
    pub fn build_case2(aux: Arc<AuxContext>) -> Result<Self> {
        if aux.case() != Case::Case2 {
            return Err(Error::WrongCase { expected: Case::Case2, found: aux.case() });
        }
        let (z_k, z_l) = (aux.z_k(), aux.z_l());
        let full = integrate_segment(&aux, SegmentKind::FullCession, z_k, z_l, [0.0; 3])?;
        let x_tilde0 = full.last().y[X];
        let paired = integrate_segment(&aux, SegmentKind::Paired, z_l, f64::INFINITY, full.last().y)?;
        let mut curve =
            Self { aux, case: Case::Case2, segments: vec![full, paired], x_tilde0: Some(x_tilde0), x0: 0.0 };
        curve.finish()?;
        Ok(curve)
    }

    fn finish(&mut self) -> Result<()> {
        self.x0 = self.segments.last().unwrap().last().y[X];
        check_tail(&self.aux, self.segments.last().unwrap())?;
        Ok(())
    }

    pub fn aux(&self) -> &Arc<AuxContext> {
        &self.aux
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// Critical point `x₀` above which no reinsurance is bought.
    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// End `x̃₀` of the full-cession region (CASE2 only).
    pub fn x_tilde0(&self) -> Option<f64> {
        self.x_tilde0
    }

    /// `Λ(x₀) = ∫₀^{x₀} A`; `U(0) = e^{Λ(x₀)}`.
    pub fn lambda0(&self) -> f64 {
        self.segments.last().unwrap().last().y[LAMBDA]
    }

    /// `∫₀^{x₀} e^{−Λ}`.
    pub fn integral0(&self) -> f64 {
        self.segments.last().unwrap().last().y[S_INT]
    }

    /// Number of accepted integrator nodes over all segments.
    pub fn node_count(&self) -> usize {
        self.segments.iter().map(|s| s.nodes.len()).sum()
    }

    /// Canonical-order retentions at surplus `x`; `(∞, ∞)` for `x ≥ x₀`.
    pub fn eval_q(&self, x: f64) -> Result<(f64, f64)> {
        let st = self.state(x)?;
        Ok((st.q1, st.q2))
    }

    /// Full curve state at surplus `x ≥ 0`.
    pub fn state(&self, x: f64) -> Result<CurveState> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeSurplus(x));
        }
        if x >= self.x0 {
            return Ok(CurveState {
                x,
                q1: f64::INFINITY,
                q2: f64::INFINITY,
                lambda: self.lambda0(),
                integral: self.integral0(),
                a: 0.0,
            });
        }
        let seg = self.segments.iter().find(|s| x < s.last().y[X]).unwrap_or(self.segments.last().unwrap());
        let s = self.solve_component(seg, X, x)?;
        self.state_at(seg, s)
    }

    /// Surplus `x` at which `Λ(x) = target`, for `0 ≤ target ≤ Λ(x₀)`.
    pub fn x_at_lambda(&self, target: f64) -> Result<f64> {
        if target <= 0.0 {
            return Ok(0.0);
        }
        if target >= self.lambda0() {
            return Ok(self.x0);
        }
        let seg = self.segments.iter().find(|s| target < s.last().y[LAMBDA]).unwrap();
        let s = self.solve_component(seg, LAMBDA, target)?;
        Ok(self.local(seg, s).0[X])
    }

    /// Surplus `x` at which the class-1 retention equals `q` (i.e. `G(q)`
    /// in CASE1, the `R₁`/`R₂` chain in CASE2).
    pub fn x_of_q1(&self, q: f64) -> Result<f64> {
        let first = &self.segments[0];
        if q < first.q_start || q.is_nan() {
            return Err(Error::Domain { q, z_l: first.q_start });
        }
        let seg = self.segments.iter().find(|s| q < s.q_end).unwrap_or(self.segments.last().unwrap());
        Ok(self.local(seg, seg.s_of(q)).0[X])
    }

    /// Nodes of the integrator as `(x, q₁, q₂)`, strictly increasing in `x`
    /// and ending at `(x₀, ∞, ∞)`.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::with_capacity(self.node_count());
        for seg in &self.segments {
            for n in &seg.nodes {
                if out.last().is_some_and(|p| p.0 >= n.y[X]) {
                    continue;
                }
                let q1 = seg.q_of(n.t);
                let q2 = match seg.kind {
                    SegmentKind::FullCession => 0.0,
                    SegmentKind::Paired => self.aux.q2_of(q1).unwrap_or(f64::NAN),
                };
                out.push((n.y[X], q1, q2));
            }
        }
        out
    }

    pub fn record(&self) -> CurveRecord {
        let samples = self.samples();
        CurveRecord {
            case: self.case,
            x_tilde0: self.x_tilde0.unwrap_or(f64::NAN),
            x0: self.x0,
            x: samples.iter().map(|p| p.0).collect(),
            q1: samples.iter().map(|p| p.1).collect(),
            q2: samples.iter().map(|p| p.2).collect(),
        }
    }

    fn state_at(&self, seg: &Segment, s: f64) -> Result<CurveState> {
        let (y, _) = self.local(seg, s);
        let q1 = seg.q_of(s);
        let (q2, a) = match seg.kind {
            SegmentKind::FullCession => (0.0, self.aux.model().class(0).reinsurer_loading / q1),
            SegmentKind::Paired => {
                let p = self.aux.curve_point(q1)?;
                (p.q2, p.a)
            }
        };
        Ok(CurveState { x: y[X], q1, q2, lambda: y[LAMBDA], integral: y[S_INT], a })
    }

    /// State and slope at parameter `s`, one step from the node below.
    fn local(&self, seg: &Segment, s: f64) -> ([f64; 3], [f64; 3]) {
        let i = seg.nodes.partition_point(|n| n.t <= s).saturating_sub(1);
        let n = &seg.nodes[i];
        if s == n.t {
            return (n.y, n.dy);
        }
        let mut f = |t: f64, y: &[f64; 3]| rhs(&self.aux, seg, t, y);
        let (y, dy, _) = dopri5_step(&mut f, n.t, &n.y, &n.dy, s - n.t);
        (y, dy)
    }

    /// Parameter `s` where component `comp` (increasing in `s`) hits `target`.
    fn solve_component(&self, seg: &Segment, comp: usize, target: f64) -> Result<f64> {
        if target <= seg.first().y[comp] {
            return Ok(seg.first().t);
        }
        let j = seg.nodes.partition_point(|n| n.y[comp] < target);
        if j >= seg.nodes.len() {
            return Ok(seg.last().t);
        }
        if seg.nodes[j].y[comp] == target {
            return Ok(seg.nodes[j].t);
        }
        let (lo, hi) = (seg.nodes[j - 1].t, seg.nodes[j].t);
        let s = newton_bracketed(
            |s| {
                let (y, dy) = self.local(seg, s);
                (y[comp] - target, dy[comp])
            },
            lo,
            hi,
            1e-16,
        )?;
        Ok(s)
    }
}

fn integrate_segment(aux: &AuxContext, kind: SegmentKind, q_start: f64, q_end: f64, y0: [f64; 3]) -> Result<Segment> {
    let m = aux.model();
    let width = [1.0, q_start, m.class(0).mean(), m.class(1).mean()].into_iter().fold(0.0, f64::max);
    let mut seg = Segment { kind, q_start, q_end, width, nodes: Vec::new() };
    let tol = aux.tolerances();
    let opts = OdeOptions {
        rtol: tol.ode_local * 1e-2,
        atol: tol.ode_local * 1e-4,
        h_max: 1.0 / MIN_NODES,
        h_init: 1e-4,
        max_steps: 1_000_000,
    };
    let nodes = {
        let seg_ref = &seg;
        dopri5(|t, y: &[f64; 3]| rhs(aux, seg_ref, t, y), 0.0, 1.0, y0, opts)?
    };
    seg.nodes = nodes;
    Ok(seg)
}

/// Right-hand side in the compactified parameter.
fn rhs(aux: &AuxContext, seg: &Segment, s: f64, y: &[f64; 3]) -> [f64; 3] {
    let m = aux.model();
    let delta = m.econ().discount;
    let theta1 = m.class(0).reinsurer_loading;
    let (dx, a) = match seg.kind {
        SegmentKind::FullCession => {
            let q = seg.q_of(s);
            let a = theta1 / q;
            let dx = aux.k_prime(q) / (delta + aux.k_fn(q) * a) * seg.dq_ds(s);
            (dx, a)
        }
        SegmentKind::Paired if s >= 1.0 => (theta1 * m.big_k1() / (delta * seg.width), 0.0),
        SegmentKind::Paired => match aux.curve_point(seg.q_of(s)) {
            Ok(p) => (p.h_prime / (delta + p.h * p.a) * seg.dq_ds(s), p.a),
            Err(_) => (f64::NAN, f64::NAN),
        },
    };
    [dx, a * dx, (-y[LAMBDA]).exp() * dx]
}

/// The compactification relies on `G′(q) ~ θ₁K₁/(δ q²)`; reject claim
/// distributions for which this has not set in far out.
fn check_tail(aux: &AuxContext, seg: &Segment) -> Result<()> {
    let m = aux.model();
    let limit = m.class(0).reinsurer_loading * m.big_k1() / m.econ().discount;
    let q = seg.q_start + 1e6 * seg.width;
    let p = aux.curve_point(q)?;
    let ratio = q * q * p.h_prime / (m.econ().discount + p.h * p.a) / limit;
    if (ratio - 1.0).abs() > 1e-2 || !ratio.is_finite() {
        return Err(Error::TailNotQuadratic { ratio });
    }
    Ok(())
}
