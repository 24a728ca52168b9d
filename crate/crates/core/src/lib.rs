pub mod auxiliary;
pub mod error;
pub mod model;
pub mod numerics;
pub mod policy;
pub mod qvi;
pub mod serde_float;
pub mod simulator;

pub use auxiliary::{AuxContext, CurvePoint};
pub use error::{Error, Result};
pub use model::{
    derive_constants, Case, ClaimClass, ClaimDistribution, DerivedConstants, EconParams, GeneralClaims, Model,
    ModelParams, ThinningStructure,
};
pub use numerics::Tolerances;
pub use policy::{solve, Solution};
