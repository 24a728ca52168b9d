use super::{NumericsError, Result};

const MAX_ITER: usize = 500;

/// Brent's method on a sign-changing bracket.
///
/// Returns an argument whose bracket has shrunk below `tol` (absolute)
/// plus a few ulps of relative slack. Bisection steps keep the bracket
/// valid at every iteration.
pub fn find_root<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    find_root_with(f, a, b, tol).map(|(x, _)| x)
}

/// Like [`find_root`] but also reports the iteration count.
pub fn find_root_with<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> f64,
{
    let mut a = a;
    let mut b = b;
    let mut fa = eval(&mut f, a)?;
    let mut fb = eval(&mut f, b)?;
    if fa == 0.0 {
        return Ok((a, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0));
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::NoBracket { a, b, fa, fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol_act = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol_act || fb == 0.0 {
            return Ok((b, iter));
        }
        if e.abs() >= tol_act && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                // secant
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                // inverse quadratic interpolation
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol_act * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol_act { d } else { tol_act.copysign(m) };
        fb = eval(&mut f, b)?;
    }
    Err(NumericsError::MaxIterations(MAX_ITER))
}

/// Newton's method kept inside a sign-changing bracket; falls back to
/// bisection whenever the Newton step leaves the bracket or stalls.
/// `f` returns the value and the derivative.
pub fn newton_bracketed<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if !flo.is_finite() {
        return Err(NumericsError::NonFinite { at: lo, value: flo });
    }
    if !fhi.is_finite() {
        return Err(NumericsError::NonFinite { at: hi, value: fhi });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(NumericsError::NoBracket { a: lo, b: hi, fa: flo, fb: fhi });
    }
    let rising = fhi > 0.0;
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return Err(NumericsError::NonFinite { at: x, value: fx });
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let dx = if dfx != 0.0 && newton > lo && newton < hi && (fx / dfx).abs() < 0.5 * dx_old.abs() {
            fx / dfx
        } else {
            x - 0.5 * (lo + hi)
        };
        dx_old = dx;
        let next = x - dx;
        if dx.abs() <= tol + 4.0 * f64::EPSILON * x.abs() || next == x {
            return Ok(next);
        }
        x = next;
    }
    Err(NumericsError::MaxIterations(MAX_ITER))
}

/// Grows `hi` geometrically from `lo` until `f(hi)` has the opposite sign of
/// `f(lo)`. Returns the new upper end of the bracket.
pub fn expand_bracket_up<F>(mut f: F, lo: f64, hi: f64, max_doublings: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let flo = eval(&mut f, lo)?;
    let mut width = (hi - lo).max(f64::MIN_POSITIVE);
    let mut hi = hi;
    let mut fhi = eval(&mut f, hi)?;
    for _ in 0..max_doublings {
        if fhi.signum() != flo.signum() || fhi == 0.0 {
            return Ok(hi);
        }
        width *= 2.0;
        hi = lo + width;
        fhi = eval(&mut f, hi)?;
    }
    Err(NumericsError::NoBracket { a: lo, b: hi, fa: flo, fb: fhi })
}

fn eval<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericsError::NonFinite { at: x, value: v })
    }
}
