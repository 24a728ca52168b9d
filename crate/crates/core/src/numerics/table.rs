use std::fmt;
use std::sync::Arc;

use super::{find_root, integrate, NumericsError, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Tabulation grid: uniform steps of `uniform_step` below 1, geometric
/// steps of ratio `geometric_ratio` above, ending at `upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub uniform_step: f64,
    pub geometric_ratio: f64,
    pub upper: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { uniform_step: 0.02, geometric_ratio: 1.05, upper: 200.0 }
    }
}

impl GridSpec {
    pub fn nodes(&self, start: f64) -> Vec<f64> {
        assert!(self.uniform_step > 0.0 && self.geometric_ratio > 1.0);
        let mut out = vec![start];
        let mut x = start;
        while x < self.upper {
            let next = if x < 1.0 { (x + self.uniform_step).min(1.0) } else { x * self.geometric_ratio };
            x = next.min(self.upper);
            out.push(x);
        }
        out
    }
}

enum Source {
    /// Values are `f(arg)` for a directly evaluable increasing `f`.
    Samples(ScalarFn),
    /// Values are `∫_{start}^{arg} integrand`.
    Integral { integrand: ScalarFn, tol: f64 },
}

/// Strictly increasing table `arg ↦ value` with exact (not interpolated)
/// refinement between nodes, so both forward and inverse lookups are
/// accurate to the root/quadrature tolerance rather than the grid spacing.
pub struct MonotoneTable {
    args: Vec<f64>,
    values: Vec<f64>,
    source: Source,
    root_tol: f64,
}

impl fmt::Debug for MonotoneTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneTable")
            .field("nodes", &self.args.len())
            .field("arg_range", &(self.args[0], *self.args.last().unwrap()))
            .field("value_range", &(self.values[0], *self.values.last().unwrap()))
            .finish()
    }
}

impl MonotoneTable {
    /// Samples an increasing function on the given grid.
    pub fn from_fn<F>(f: F, grid: &[f64], root_tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let values: Vec<f64> = grid.iter().map(|&q| f(q)).collect();
        let table = Self {
            args: grid.to_vec(),
            values,
            source: Source::Samples(Arc::new(f)),
            root_tol,
        };
        table.check()?;
        Ok(table)
    }

    /// Tabulates `F(q) = ∫_start^q integrand` on `grid.nodes(start)`.
    /// `integrand` must be strictly positive on the tabulated range.
    pub fn tabulate_inverse<F>(integrand: F, start: f64, grid: GridSpec, quad_tol: f64, root_tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let args = grid.nodes(start);
        let mut values = Vec::with_capacity(args.len());
        let mut acc = 0.0;
        values.push(0.0);
        for w in args.windows(2) {
            acc += integrate(&integrand, w[0], w[1], quad_tol)?;
            values.push(acc);
        }
        let table = Self {
            args,
            values,
            source: Source::Integral { integrand: Arc::new(integrand), tol: quad_tol },
            root_tol,
        };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<()> {
        for (i, w) in self.values.windows(2).enumerate() {
            if !(w[1] > w[0]) || !(self.args[i + 1] > self.args[i]) {
                return Err(NumericsError::NonFinite { at: self.args[i + 1], value: w[1] });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.args.len()
    }

    pub fn is_empty(&self) -> bool {
        self.args.is_empty()
    }

    pub fn args(&self) -> &[f64] {
        &self.args
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn arg_range(&self) -> (f64, f64) {
        (self.args[0], *self.args.last().unwrap())
    }

    pub fn value_range(&self) -> (f64, f64) {
        (self.values[0], *self.values.last().unwrap())
    }

    /// Exact forward evaluation. Arguments past the last node are allowed
    /// (the source is evaluated directly), arguments before the first are not.
    pub fn value(&self, q: f64) -> Result<f64> {
        if q < self.args[0] || q.is_nan() {
            return Err(NumericsError::OutOfRange(q));
        }
        match &self.source {
            Source::Samples(f) => Ok(f(q)),
            Source::Integral { integrand, tol } => {
                let i = self.node_below_arg(q);
                Ok(self.values[i] + integrate(|y| integrand(y), self.args[i], q, *tol)?)
            }
        }
    }

    /// Argument `q` with `value(q) = v`. Values beyond the table are located
    /// by doubling the bracket past the last node.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        let (v_lo, v_hi) = self.value_range();
        if v < v_lo || v.is_nan() {
            return Err(NumericsError::OutOfRange(v));
        }
        if v == v_lo {
            return Ok(self.args[0]);
        }
        let (lo, hi) = if v <= v_hi {
            let i = self.values.partition_point(|&x| x < v).max(1);
            (self.args[i - 1], self.args[i])
        } else {
            let lo = *self.args.last().unwrap();
            let mut width = lo - self.args[self.args.len() - 2];
            let mut hi = lo + width;
            let mut guard = 0;
            while self.value(hi)? < v {
                width *= 2.0;
                hi = lo + width;
                guard += 1;
                if guard > 200 {
                    return Err(NumericsError::OutOfRange(v));
                }
            }
            (lo, hi)
        };
        let mut err = None;
        let root = find_root(
            |q| match self.value(q) {
                Ok(x) => x - v,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            self.root_tol,
        );
        match (root, err) {
            (_, Some(e)) => Err(e),
            (r, None) => r,
        }
    }

    /// Adjacent nodes `(q_i, q_{i+1})` whose values bracket `v`, if `v`
    /// lies inside the tabulated value range.
    pub fn bracket(&self, v: f64) -> Option<(f64, f64)> {
        let (v_lo, v_hi) = self.value_range();
        if !(v >= v_lo && v <= v_hi) {
            return None;
        }
        let i = self.values.partition_point(|&x| x < v).max(1);
        Some((self.args[i - 1], self.args[i]))
    }

    fn node_below_arg(&self, q: f64) -> usize {
        self.args.partition_point(|&a| a <= q).saturating_sub(1)
    }
}
