use super::{NumericsError, Result};

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size.
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_max: f64::INFINITY, h_init: 1e-3, max_steps: 1_000_000 }
    }
}

/// Accepted step of the integrator: time, state and state derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeNode<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

/// One Dormand-Prince step of size `h` from `(t, y)` with known slope `dy`.
/// Returns the fifth-order solution, its slope and the embedded error vector.
pub fn dopri5_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], dy: &[f64; N], h: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut k = [[0.0; N]; 7];
    k[0] = *dy;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        if s == 6 {
            // stage 7 is evaluated at the fifth-order solution (FSAL)
            let y_new = ys;
            k[6] = f(t + h, &y_new);
            let mut err = [0.0; N];
            for i in 0..N {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += (A[6].get(j).copied().unwrap_or(0.0) - B4[j]) * kj[i];
                }
                err[i] = h * e;
            }
            return (y_new, k[6], err);
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    unreachable!()
}

/// Adaptive integration from `t0` to `t1`, returning every accepted node
/// (including both endpoints).
pub fn dopri5<const N: usize, F>(mut f: F, t0: f64, t1: f64, y0: [f64; N], opts: OdeOptions) -> Result<Vec<OdeNode<N>>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut dy = f(t, &y);
    check(t, &dy)?;
    let mut nodes = vec![OdeNode { t, y, dy }];
    let span = (t1 - t0).abs();
    let mut h = opts.h_init.min(opts.h_max).min(span);
    let mut steps = 0;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(NumericsError::StepUnderflow(t));
        }
        let last = (t1 - t).abs() <= h * (1.0 + 1e-12);
        let step = if last { t1 - t } else { dir * h };
        let (y_new, dy_new, err) = dopri5_step(&mut f, t, &y, &dy, step);
        let finite = y_new.iter().chain(dy_new.iter()).all(|v| v.is_finite());
        let mut e_norm: f64 = 0.0;
        for i in 0..N {
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            e_norm = e_norm.max(err[i].abs() / scale);
        }
        if finite && e_norm <= 1.0 {
            t = if last { t1 } else { t + step };
            y = y_new;
            dy = dy_new;
            nodes.push(OdeNode { t, y, dy });
            let factor = if e_norm == 0.0 { 5.0 } else { (0.9 * e_norm.powf(-0.2)).clamp(0.2, 5.0) };
            h = (step.abs() * factor).min(opts.h_max);
        } else {
            let factor = if finite { (0.9 * e_norm.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            h = step.abs() * factor;
            if h < 1e-14 * span.max(1.0) {
                if !finite {
                    let bad = dy_new.iter().chain(y_new.iter()).find(|v| !v.is_finite()).copied().unwrap_or(f64::NAN);
                    return Err(NumericsError::NonFinite { at: t, value: bad });
                }
                return Err(NumericsError::StepUnderflow(t));
            }
        }
    }
    Ok(nodes)
}

fn check<const N: usize>(t: f64, v: &[f64; N]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(bad) => Err(NumericsError::NonFinite { at: t, value: *bad }),
        None => Ok(()),
    }
}
