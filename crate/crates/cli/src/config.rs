use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thinrein_core::qvi::QviOptions;
use thinrein_core::simulator::SimConfig;
use thinrein_core::{
    ClaimClass, ClaimDistribution, EconParams, Error as CoreError, GeneralClaims, ModelParams, ThinningStructure,
    Tolerances,
};

use crate::CliError;

/// One run: model, economics, numerics, simulation and where to write.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub economics: EconBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub groups: Vec<GroupSpec>,
    pub classes: [ClassSpec; 2],
}

/// A Poisson event group; `probabilities[l]` thins it into class `l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub intensity: f64,
    pub probabilities: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub name: String,
    pub claims: ClaimsSpec,
    pub insurer_loading: f64,
    pub reinsurer_loading: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimsSpec {
    Exponential { rate: f64 },
    /// Survival `(1 + x/scale)^-shape`; needs `shape > 2`.
    Lomax { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconBlock {
    pub discount: f64,
    pub tax_retention: f64,
    pub transaction_cost: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsBlock {
    pub root_abs: f64,
    pub quad_rel: f64,
    pub ode_local: f64,
    pub tail_abs: f64,
    /// Points of curves.csv on `[0, x₀]`.
    pub curve_points: usize,
    /// Points of value.csv on `[0, value_extent·x̂]`.
    pub value_points: usize,
    pub value_extent: f64,
    pub qvi_interior_points: usize,
    pub qvi_exterior_points: usize,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        let t = Tolerances::default();
        let q = QviOptions::default();
        Self {
            root_abs: t.root_abs,
            quad_rel: t.quad_rel,
            ode_local: t.ode_local,
            tail_abs: t.tail_abs,
            curve_points: 401,
            value_points: 401,
            value_extent: 1.5,
            qvi_interior_points: q.interior_points,
            qvi_exterior_points: q.exterior_points,
        }
    }
}

impl NumericsBlock {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances { root_abs: self.root_abs, quad_rel: self.quad_rel, ode_local: self.ode_local, tail_abs: self.tail_abs }
    }

    pub fn qvi_options(&self) -> QviOptions {
        QviOptions {
            interior_points: self.qvi_interior_points,
            exterior_points: self.qvi_exterior_points,
            ..QviOptions::default()
        }
    }
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), reason: reason.into() }
}

/// Maps a core parameter path onto the config layout.
fn config_path(field: &str) -> String {
    if let Some(rest) = field.strip_prefix("thinning.groups") {
        format!("model.groups{rest}")
    } else if field == "thinning" {
        "model.groups".into()
    } else if field.starts_with("classes") {
        format!("model.{field}")
    } else {
        field.to_string()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| field_error("<document>", e.to_string()))?;
        Self::from_value(value)
    }

    /// Parses and validates; every error carries a field path.
    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            field_error(if path == "." { "<document>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut seen = HashSet::new();
        for (k, g) in self.model.groups.iter().enumerate() {
            if !seen.insert(g.name.as_str()) {
                return Err(field_error(format!("model.groups[{k}].name"), format!("duplicate group name {:?}", g.name)));
            }
        }
        if self.model.classes[0].name == self.model.classes[1].name {
            return Err(field_error("model.classes[1].name", "class names must differ"));
        }
        for (l, c) in self.model.classes.iter().enumerate() {
            if let ClaimsSpec::Lomax { shape, scale } = c.claims {
                if !(shape > 2.0 && shape.is_finite()) {
                    return Err(field_error(format!("model.classes[{l}].claims.shape"), format!("must exceed 2, got {shape}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(field_error(format!("model.classes[{l}].claims.scale"), format!("must be positive, got {scale}")));
                }
            }
        }
        self.numerics
            .tolerances()
            .validate()
            .map_err(|reason| field_error("numerics", reason))?;
        let n = &self.numerics;
        if n.curve_points < 2 || n.value_points < 2 {
            return Err(field_error("numerics.curve_points", "curves.csv and value.csv need at least 2 points"));
        }
        if !(n.value_extent >= 1.0 && n.value_extent.is_finite()) {
            return Err(field_error("numerics.value_extent", format!("must be at least 1, got {}", n.value_extent)));
        }
        if n.qvi_interior_points == 0 {
            return Err(field_error("numerics.qvi_interior_points", "must be at least 1"));
        }
        self.simulation.validate().map_err(|e| match e {
            CoreError::InvalidConfig(msg) => {
                let field = msg.split_whitespace().next().unwrap_or("simulation").to_string();
                field_error(field, msg)
            }
            other => field_error("simulation", other.to_string()),
        })?;
        self.model_params()?.validate().map_err(|e| match e {
            CoreError::InvalidParameter { field, reason } => field_error(config_path(&field), reason),
            other => field_error("model", other.to_string()),
        })
    }

    pub fn econ(&self) -> EconParams {
        let e = self.economics;
        EconParams { discount: e.discount, tax_retention: e.tax_retention, transaction_cost: e.transaction_cost }
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let mut classes = Vec::with_capacity(2);
        for (l, c) in self.model.classes.iter().enumerate() {
            let claims = match c.claims {
                ClaimsSpec::Exponential { rate } => ClaimDistribution::exponential(rate),
                ClaimsSpec::Lomax { shape, scale } => {
                    let survival = move |x: f64| (1.0 + x / scale).powf(-shape);
                    ClaimDistribution::General(
                        GeneralClaims::new(survival, self.numerics.quad_rel)
                            .map_err(|e| field_error(format!("model.classes[{l}].claims"), e.to_string()))?,
                    )
                }
            };
            classes.push(ClaimClass { claims, insurer_loading: c.insurer_loading, reinsurer_loading: c.reinsurer_loading });
        }
        let [c1, c2]: [ClaimClass; 2] = classes.try_into().expect("two classes");
        let thinning = ThinningStructure::new(self.model.groups.iter().map(|g| (g.intensity, g.probabilities)));
        Ok(ModelParams { classes: [c1, c2], thinning, econ: self.econ() })
    }

    /// `THINREIN_OUTPUT_DIR`, else the configured directory, else `out`.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os("THINREIN_OUTPUT_DIR") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        }
    }
}

/// Resolves a sweep parameter to a pointer into the config document.
///
/// Accepts `lambda.<group>`, `theta.<class>`, `eta.<class>` and general
/// dotted paths whose array steps are indices or `name` values.
pub fn resolve_param(doc: &serde_json::Value, param: &str) -> Result<String, CliError> {
    let expanded = match param.split_once('.') {
        Some(("lambda", g)) => format!("model.groups.{g}.intensity"),
        Some(("theta", c)) => format!("model.classes.{c}.reinsurer_loading"),
        Some(("eta", c)) => format!("model.classes.{c}.insurer_loading"),
        _ => param.to_string(),
    };
    let mut node = doc;
    let mut pointer = String::new();
    for seg in expanded.split('.') {
        let step = match node {
            serde_json::Value::Object(map) if map.contains_key(seg) => seg.to_string(),
            serde_json::Value::Array(items) => match seg.parse::<usize>() {
                Ok(i) if i < items.len() => i.to_string(),
                _ => items
                    .iter()
                    .position(|it| it.get("name").and_then(|n| n.as_str()) == Some(seg))
                    .map(|i| i.to_string())
                    .ok_or_else(|| field_error(param, format!("no element {seg:?} in {}", display_path(&pointer))))?,
            },
            _ => return Err(field_error(param, format!("no field {seg:?} in {}", display_path(&pointer)))),
        };
        pointer.push('/');
        pointer.push_str(&step);
        node = doc.pointer(&pointer).expect("step exists");
    }
    if !node.is_number() {
        return Err(field_error(param, "sweep parameter must be a numeric leaf"));
    }
    Ok(pointer)
}

fn display_path(pointer: &str) -> String {
    if pointer.is_empty() {
        "the document".into()
    } else {
        pointer.trim_start_matches('/').replace('/', ".")
    }
}
