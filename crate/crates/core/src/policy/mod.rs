//! Optimal retention curves, value function and dividend band.

mod curve;
mod value;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use curve::{CurveRecord, CurveState, RetentionCurve};
pub use value::{
    determine_band, i1, i2, BandBranch, BandSolution, Case2Constants, DividendBand, MarginalValue, ValueFunction,
    ValueRecord,
};

use crate::auxiliary::AuxContext;
use crate::error::Result;
use crate::model::{DerivedConstants, Model, ModelParams};
use crate::numerics::Tolerances;

/// Everything the solver produces for one parameter set.
#[derive(Debug, Clone)]
pub struct Solution {
    pub constants: DerivedConstants,
    pub curve: Arc<RetentionCurve>,
    pub value: ValueFunction,
}

/// Summary of a solve, with retentions in the caller's class order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub constants: DerivedConstants,
    #[serde(with = "crate::serde_float")]
    pub q0: f64,
    pub relabeled: bool,
    pub value: ValueRecord,
}

pub fn solve(params: &ModelParams, tol: Tolerances) -> Result<Solution> {
    let aux = Arc::new(AuxContext::new(Model::new(params)?, tol)?);
    solve_with(aux)
}

pub fn solve_with(aux: Arc<AuxContext>) -> Result<Solution> {
    let constants = aux.constants();
    let curve = Arc::new(RetentionCurve::build(aux.clone())?);
    let u = MarginalValue::new(curve.clone(), &constants);
    let value = ValueFunction::new(u, *aux.model().econ())?;
    Ok(Solution { constants, curve, value })
}

impl Solution {
    pub fn aux(&self) -> &Arc<AuxContext> {
        self.curve.aux()
    }

    pub fn model(&self) -> &Model {
        self.aux().model()
    }

    pub fn x0(&self) -> f64 {
        self.curve.x0()
    }

    pub fn eval_w(&self, x: f64) -> Result<f64> {
        self.value.eval_w(x)
    }

    /// Optimal retentions at `x` in the caller's class order.
    pub fn eval_q(&self, x: f64) -> Result<(f64, f64)> {
        Ok(self.model().to_user(self.curve.eval_q(x)?))
    }

    pub fn record(&self) -> Result<SolutionRecord> {
        let q0 = match self.aux().case() {
            crate::model::Case::Case1 => self.aux().q0()?,
            crate::model::Case::Case2 => f64::NAN,
        };
        Ok(SolutionRecord { constants: self.constants, q0, relabeled: self.model().relabeled(), value: self.value.record()? })
    }
}
