use super::{NumericsError, Result};

const MAX_ITER: usize = 500;

/// Brent's derivative-free maximization on `[a, b]` (golden section with
/// parabolic steps). Returns `(argmax, max)` of a unimodal `f`.
pub fn maximize<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut neg = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_nan() {
            return Err(NumericsError::NonFinite { at: x, value: v });
        }
        Ok(-v)
    };
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x = lo + GOLD * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = neg(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let best = |x: f64, fx: f64, lo: f64, flo: f64, hi: f64, fhi: f64| {
        // endpoints are never sampled by the iteration; compare at the end
        let mut out = (x, fx);
        for (p, fp) in [(lo, flo), (hi, fhi)] {
            if fp < out.1 {
                out = (p, fp);
            }
        }
        (out.0, -out.1)
    };
    let (a0, b0) = (lo, hi);
    for _ in 0..MAX_ITER {
        let m = 0.5 * (lo + hi);
        let tol1 = tol + 1e-10 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (hi - lo) {
            let (fa, fb) = (neg(a0)?, neg(b0)?);
            return Ok(best(x, fx, a0, fa, b0, fb));
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { hi - x } else { lo - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = neg(u)?;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    Err(NumericsError::MaxIterations(MAX_ITER))
}
