//! Scenario configuration: a JSON document describing a model, a simulation
//! grid, evaluation points and output locations.
//!
//! A single LDTSM factor may be written inline in the model block:
//!
//! ```json
//! {
//!   "model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0,
//!             "lambda": {"times": [0.0], "values": [1.0]}, "z0": [0.0]},
//!   "evaluation": {"maturities": [0.5, 1.0, 2.0]}
//! }
//! ```
//!
//! Several factors go in `"factors": [...]`, each with the same fields.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;
use crate::hjm::{HjmVolFamily, InitialCurve, QtsmSpec, ShirakawaSpec};
use crate::ldtsm::{LambdaSchedule, LdtsmFactor, LdtsmModel, StateSnapshot};
use crate::levy::LevySpec;
use crate::simulation::PathGrid;

/// A problem with one field of the configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("invalid scenario:\n{}", render(.0))]
    Invalid(Vec<FieldError>),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ScenarioError {
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ScenarioError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn render(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorConfig {
    pub levy: LevySpec,
    pub lambda: LambdaSchedule,
    pub z0: Vec<f64>,
}

impl FactorConfig {
    pub fn build(&self) -> crate::Result<LdtsmFactor> {
        LdtsmFactor::new(self.levy.clone(), self.lambda.clone(), self.z0.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HjmConfig {
    pub vol: HjmVolFamily,
    pub curve: InitialCurve,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    Ldtsm(Vec<FactorConfig>),
    Hjm(HjmConfig),
    Qtsm(QtsmSpec),
    Shirakawa(ShirakawaSpec),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Ldtsm(_) => "ldtsm",
            ModelConfig::Hjm(_) => "hjm",
            ModelConfig::Qtsm(_) => "qtsm",
            ModelConfig::Shirakawa(_) => "shirakawa",
        }
    }

    pub fn ldtsm(&self) -> Option<crate::Result<LdtsmModel>> {
        match self {
            ModelConfig::Ldtsm(factors) => Some(
                factors
                    .iter()
                    .map(FactorConfig::build)
                    .collect::<crate::Result<Vec<_>>>()
                    .and_then(LdtsmModel::new),
            ),
            _ => None,
        }
    }

    /// Number of state coordinates accepted by `evaluation.state`.
    pub fn state_dimension(&self) -> Option<usize> {
        match self {
            ModelConfig::Ldtsm(f) => Some(f.iter().map(|f| f.levy.dimension()).sum()),
            ModelConfig::Qtsm(q) => Some(q.dimension()),
            _ => None,
        }
    }

    fn to_value(&self) -> Value {
        let mut map = match self {
            ModelConfig::Ldtsm(factors) if factors.len() == 1 => factor_value(&factors[0]),
            ModelConfig::Ldtsm(factors) => {
                let mut m = Map::new();
                m.insert(
                    "factors".into(),
                    Value::Array(
                        factors
                            .iter()
                            .map(|f| Value::Object(factor_value(f)))
                            .collect(),
                    ),
                );
                m
            }
            ModelConfig::Hjm(h) => object(h),
            ModelConfig::Qtsm(q) => object(q),
            ModelConfig::Shirakawa(s) => object(s),
        };
        map.insert("kind".into(), Value::String(self.kind().into()));
        Value::Object(map)
    }
}

fn object<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn factor_value(f: &FactorConfig) -> Map<String, Value> {
    let mut m = object(&f.levy);
    m.insert(
        "lambda".into(),
        serde_json::json!({ "times": f.lambda.times(), "values": f.lambda.values() }),
    );
    m.insert("z0".into(), serde_json::json!(f.z0));
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            step: 0.01,
        }
    }
}

impl GridConfig {
    pub fn path_grid(&self) -> crate::Result<PathGrid> {
        PathGrid::with_step(self.horizon, self.step)
    }
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

/// Valuation times and maturities. Maturities are absolute; rows with
/// `T < t` are skipped. `state` holds the driver values used for curves at
/// `t > 0` (all factors concatenated); HJM-type models use the zero path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    pub maturities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
}

fn default_paths() -> usize {
    10_000
}

fn default_dump() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of leading paths written out individually.
    #[serde(default = "default_dump")]
    pub dump_paths: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            seed: 0,
            dump_paths: default_dump(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// CSV file with header `T,price`.
    pub curve: PathBuf,
    /// λ(0); defaults to the model's λ at time 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub evaluation: EvaluationConfig,
    pub simulation: SimulationConfig,
    pub calibration: Option<CalibrationConfig>,
    pub outputs: OutputConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: Value,
    #[serde(default)]
    grid: GridConfig,
    evaluation: EvaluationConfig,
    #[serde(default)]
    simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationConfig>,
    #[serde(default)]
    outputs: OutputConfig,
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawScenario {
            model: self.model.to_value(),
            grid: self.grid.clone(),
            evaluation: self.evaluation.clone(),
            simulation: self.simulation.clone(),
            calibration: self.calibration.clone(),
            outputs: self.outputs.clone(),
        }
        .serialize(s)
    }
}

impl Scenario {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes to JSON")
    }

    /// Curve state at valuation time `t` for LDTSM models.
    pub fn ldtsm_state(&self, model: &LdtsmModel, t: f64) -> StateSnapshot {
        let flat = self.evaluation.state.clone();
        let mut states = Vec::new();
        let mut at = 0;
        for f in model.factors() {
            let d = f.dimension();
            states.push(match (&flat, t > 0.0) {
                (Some(v), true) => v[at..at + d].to_vec(),
                _ => vec![0.0; d],
            });
            at += d;
        }
        StateSnapshot::new(t, states)
    }

    /// Curve state at valuation time `t` for the quadratic model.
    pub fn qtsm_state(&self, d: usize, t: f64) -> Vec<f64> {
        match (&self.evaluation.state, t > 0.0) {
            (Some(v), true) => v.clone(),
            _ => vec![0.0; d],
        }
    }
}

fn join(prefix: &str, path: &str) -> String {
    if path.is_empty() || path == "." {
        prefix.to_string()
    } else if path.starts_with('[') || prefix.is_empty() {
        format!("{prefix}{path}")
    } else {
        format!("{prefix}.{path}")
    }
}

fn typed<T: DeserializeOwned>(
    value: Value,
    prefix: &str,
    errors: &mut Vec<FieldError>,
) -> Option<T> {
    match serde_path_to_error::deserialize::<_, T>(value) {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(FieldError {
                path: join(prefix, &e.path().to_string()),
                message: e.inner().to_string(),
            });
            None
        }
    }
}

fn field_error(prefix: &str, err: Error) -> FieldError {
    match err {
        Error::InvalidParameter { field, reason } => FieldError {
            path: join(prefix, &field),
            message: reason,
        },
        other => FieldError {
            path: join(prefix, "family"),
            message: other.to_string(),
        },
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLambda {
    times: Vec<f64>,
    values: Vec<f64>,
}

fn parse_factor(
    mut map: Map<String, Value>,
    prefix: &str,
    errors: &mut Vec<FieldError>,
) -> Option<FactorConfig> {
    let lambda = map.remove("lambda");
    let z0 = map.remove("z0");
    let levy: Option<LevySpec> = typed(Value::Object(map), prefix, errors);
    let lambda = match lambda {
        None => {
            errors.push(FieldError {
                path: join(prefix, "lambda"),
                message: "missing field `lambda`".into(),
            });
            None
        }
        Some(v) => typed::<RawLambda>(v, &join(prefix, "lambda"), errors).and_then(|raw| {
            LambdaSchedule::new(raw.times, raw.values)
                .map_err(|e| errors.push(field_error(&join(prefix, "lambda"), e)))
                .ok()
        }),
    };
    let levy = levy?;
    let z0 = match z0 {
        Some(v) => typed::<Vec<f64>>(v, &join(prefix, "z0"), errors)?,
        None => vec![0.0; levy.dimension()],
    };
    let lambda = lambda?;
    let cfg = FactorConfig { levy, lambda, z0 };
    if let Err(e) = cfg.build() {
        errors.push(field_error(prefix, e));
        return None;
    }
    Some(cfg)
}

fn parse_model(value: Value, errors: &mut Vec<FieldError>) -> Option<ModelConfig> {
    let Value::Object(mut map) = value else {
        errors.push(FieldError {
            path: "model".into(),
            message: "expected an object".into(),
        });
        return None;
    };
    let kind = match map.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => {
            errors.push(FieldError {
                path: "model.kind".into(),
                message: "expected a string".into(),
            });
            return None;
        }
        None => {
            errors.push(FieldError {
                path: "model.kind".into(),
                message: "missing field `kind` (one of ldtsm, hjm, qtsm, shirakawa)".into(),
            });
            return None;
        }
    };
    let invalid = |errors: &mut Vec<FieldError>, r: crate::Result<()>, prefix: &str| {
        if let Err(e) = r {
            errors.push(field_error(prefix, e));
            false
        } else {
            true
        }
    };
    match kind.as_str() {
        "ldtsm" => {
            if let Some(list) = map.remove("factors") {
                if !map.is_empty() {
                    let keys: Vec<_> = map.keys().cloned().collect();
                    errors.push(FieldError {
                        path: "model".into(),
                        message: format!("fields {keys:?} are not allowed next to `factors`"),
                    });
                    return None;
                }
                let Value::Array(items) = list else {
                    errors.push(FieldError {
                        path: "model.factors".into(),
                        message: "expected an array".into(),
                    });
                    return None;
                };
                if items.is_empty() {
                    errors.push(FieldError {
                        path: "model.factors".into(),
                        message: "at least one factor is required".into(),
                    });
                    return None;
                }
                let mut out = Vec::new();
                for (i, item) in items.into_iter().enumerate() {
                    let prefix = format!("model.factors[{i}]");
                    match item {
                        Value::Object(m) => out.push(parse_factor(m, &prefix, errors)),
                        _ => errors.push(FieldError {
                            path: prefix,
                            message: "expected an object".into(),
                        }),
                    }
                }
                out.into_iter()
                    .collect::<Option<Vec<_>>>()
                    .map(ModelConfig::Ldtsm)
            } else {
                parse_factor(map, "model", errors).map(|f| ModelConfig::Ldtsm(vec![f]))
            }
        }
        "hjm" => {
            let h: HjmConfig = typed(Value::Object(map), "model", errors)?;
            let ok = invalid(errors, h.vol.validate(), "model.vol")
                & invalid(errors, h.curve.validate(), "model.curve");
            ok.then_some(ModelConfig::Hjm(h))
        }
        "qtsm" => {
            let q: QtsmSpec = typed(Value::Object(map), "model", errors)?;
            invalid(errors, q.validate(), "model").then_some(ModelConfig::Qtsm(q))
        }
        "shirakawa" => {
            let s: ShirakawaSpec = typed(Value::Object(map), "model", errors)?;
            invalid(errors, s.validate(), "model").then_some(ModelConfig::Shirakawa(s))
        }
        other => {
            errors.push(FieldError {
                path: "model.kind".into(),
                message: format!(
                    "unknown model kind `{other}`, expected one of ldtsm, hjm, qtsm, shirakawa"
                ),
            });
            None
        }
    }
}

fn check_blocks(s: &Scenario, errors: &mut Vec<FieldError>) {
    let mut push = |path: &str, message: String| {
        errors.push(FieldError {
            path: path.into(),
            message,
        })
    };
    let g = &s.grid;
    let mut grid = None;
    if !(g.horizon > 0.0 && g.horizon.is_finite()) {
        push(
            "grid.horizon",
            format!("must be positive and finite, got {}", g.horizon),
        );
    } else if !(g.step > 0.0 && g.step <= g.horizon) {
        push(
            "grid.step",
            format!("must lie in (0, horizon], got {}", g.step),
        );
    } else {
        let n = g.horizon / g.step;
        if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
            push(
                "grid.step",
                format!("must divide the horizon {} evenly", g.horizon),
            );
        } else {
            grid = g.path_grid().ok();
        }
    }
    let e = &s.evaluation;
    if e.times.is_empty() {
        push(
            "evaluation.times",
            "at least one valuation time is required".into(),
        );
    }
    for (i, &t) in e.times.iter().enumerate() {
        let path = format!("evaluation.times[{i}]");
        if !(t >= 0.0 && t.is_finite()) || (i > 0 && !(t > e.times[i - 1])) {
            push(
                &path,
                format!("times must be non-negative and strictly increasing, got {t}"),
            );
        } else if let Some(grid) = &grid {
            if grid.node_index(t).is_err() {
                push(&path, format!("{t} is not a node of the simulation grid"));
            }
        }
    }
    if e.maturities.is_empty() {
        push(
            "evaluation.maturities",
            "at least one maturity is required".into(),
        );
    }
    for (i, &m) in e.maturities.iter().enumerate() {
        if !(m > 0.0 && m.is_finite()) || (i > 0 && !(m > e.maturities[i - 1])) {
            push(
                &format!("evaluation.maturities[{i}]"),
                format!("maturities must be positive, finite and strictly increasing, got {m}"),
            );
        }
    }
    if let Some(state) = &e.state {
        match s.model.state_dimension() {
            None => push(
                "evaluation.state",
                format!(
                    "not supported for `{}` models, curves use the zero path",
                    s.model.kind()
                ),
            ),
            Some(d) if d != state.len() => push(
                "evaluation.state",
                format!("expected {d} coordinates, got {}", state.len()),
            ),
            _ => {
                if let Some(i) = state.iter().position(|v| !v.is_finite()) {
                    push(&format!("evaluation.state[{i}]"), "must be finite".into());
                }
            }
        }
    }
    if s.simulation.paths == 0 {
        push("simulation.paths", "must be at least one".into());
    }
    if s.simulation.dump_paths > s.simulation.paths {
        push(
            "simulation.dump_paths",
            "cannot exceed simulation.paths".into(),
        );
    }
    if let Some(c) = &s.calibration {
        match &s.model {
            ModelConfig::Ldtsm(f) if f.len() == 1 => {}
            _ => push("calibration", "requires a single-factor ldtsm model".into()),
        }
        if let Some(l) = c.lambda0 {
            if !(l > 0.0 && l.is_finite()) {
                push("calibration.lambda0", format!("must be positive, got {l}"));
            }
        }
        if c.curve.as_os_str().is_empty() {
            push("calibration.curve", "path must not be empty".into());
        }
    }
}

/// Parses and validates a scenario. File references are not checked; see
/// [`load_scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();
    let raw: Option<RawScenario> = typed(value, "", &mut errors);
    let Some(raw) = raw else {
        return Err(ScenarioError::Invalid(errors));
    };
    let model = parse_model(raw.model, &mut errors);
    let Some(model) = model else {
        return Err(ScenarioError::Invalid(errors));
    };
    let s = Scenario {
        model,
        grid: raw.grid,
        evaluation: raw.evaluation,
        simulation: raw.simulation,
        calibration: raw.calibration,
        outputs: raw.outputs,
    };
    check_blocks(&s, &mut errors);
    if errors.is_empty() {
        Ok(s)
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}

/// Reads a scenario file. Relative paths inside it are resolved against the
/// file's directory and referenced input files must exist.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut s = parse_scenario(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    if let Some(c) = &mut s.calibration {
        if c.curve.is_relative() {
            c.curve = base.join(&c.curve);
        }
        if !c.curve.is_file() {
            return Err(ScenarioError::Invalid(vec![FieldError {
                path: "calibration.curve".into(),
                message: format!("file {} does not exist", c.curve.display()),
            }]));
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0,
                  "lambda": {"times": [0.0], "values": [1.0]}},
        "evaluation": {"maturities": [0.5, 1.0, 2.0]}
    }"#;

    fn paths(err: ScenarioError) -> Vec<String> {
        err.field_errors().iter().map(|e| e.path.clone()).collect()
    }

    #[test]
    fn minimal_cauchy_parses() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.model.kind(), "ldtsm");
        assert_eq!(s.simulation, SimulationConfig::default());
        let m = s.model.ldtsm().unwrap().unwrap();
        assert_eq!(m.factors()[0].shift(), &[0.0]);
    }

    #[test]
    fn alpha_out_of_range_names_model_alpha() {
        let text = r#"{"model": {"kind": "ldtsm", "family": "stable", "alpha": 2.5, "theta": 1.0,
                       "lambda": {"times": [0.0], "values": [1.0]}},
                       "evaluation": {"maturities": [1.0]}}"#;
        let err = parse_scenario(text).unwrap_err();
        assert_eq!(paths(err), ["model.alpha"]);
    }

    #[test]
    fn negative_knot_names_index() {
        let text = r#"{"model": {"kind": "ldtsm", "factors": [
                          {"family": "cauchy", "theta": 1.0, "lambda": {"times": [0.0, 1.0, 2.0], "values": [1.0, 0.5, -1.0]}}]},
                       "evaluation": {"maturities": [1.0]}}"#;
        let err = parse_scenario(text).unwrap_err();
        assert_eq!(paths(err), ["model.factors[0].lambda.values[2]"]);
    }

    #[test]
    fn unknown_family_and_missing_fields() {
        let text = r#"{"model": {"kind": "ldtsm", "family": "laplace", "lambda": {"times": [0.0], "values": [1.0]}},
                       "evaluation": {"maturities": [1.0]}}"#;
        let err = parse_scenario(text).unwrap_err();
        assert!(err.to_string().contains("laplace"), "{err}");
        let err = parse_scenario(r#"{"model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0}, "evaluation": {"maturities": [1.0]}}"#).unwrap_err();
        assert_eq!(paths(err), ["model.lambda"]);
        let err = parse_scenario(r#"{"model": {"kind": "hjm", "curve": {"kind": "flat", "rate": 0.01}}, "evaluation": {"maturities": [1.0]}}"#).unwrap_err();
        assert!(err.to_string().contains("vol"), "{err}");
        let err =
            parse_scenario(r#"{"model": {"kind": "cir"}, "evaluation": {"maturities": [1.0]}}"#)
                .unwrap_err();
        assert_eq!(paths(err), ["model.kind"]);
        assert!(matches!(parse_scenario("{"), Err(ScenarioError::Syntax(_))));
    }

    #[test]
    fn block_checks_collect_every_error() {
        let text = r#"{
            "model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0, "lambda": {"times": [0.0], "values": [1.0]}},
            "grid": {"horizon": 1.0, "step": 0.3},
            "evaluation": {"maturities": [1.0, 0.5]},
            "simulation": {"paths": 0}
        }"#;
        let p = paths(parse_scenario(text).unwrap_err());
        assert_eq!(
            p,
            [
                "grid.step",
                "evaluation.maturities[1]",
                "simulation.paths",
                "simulation.dump_paths"
            ]
        );
    }

    #[test]
    fn off_grid_time_and_bad_state() {
        let text = r#"{
            "model": {"kind": "qtsm", "a0": [0.5], "a_inf": [0.5]},
            "grid": {"horizon": 2.0, "step": 0.5},
            "evaluation": {"times": [0.0, 0.7], "maturities": [1.0], "state": [1.0, 2.0]}
        }"#;
        let p = paths(parse_scenario(text).unwrap_err());
        assert_eq!(p, ["evaluation.times[1]", "evaluation.state"]);
    }

    #[test]
    fn gamma_factor_needs_positive_start() {
        let text = r#"{"model": {"kind": "ldtsm", "family": "gamma", "a": 1.0, "b": 1.0,
                       "lambda": {"times": [0.0], "values": [1.0]}},
                       "evaluation": {"maturities": [1.0]}}"#;
        assert_eq!(paths(parse_scenario(text).unwrap_err()), ["model.z0"]);
    }

    #[test]
    fn every_kind_round_trips() {
        let texts = [
            MINIMAL.to_string(),
            r#"{"model": {"kind": "ldtsm", "factors": [
                  {"family": "gaussian", "covariance": [[1.0, 0.2], [0.2, 2.0]], "lambda": {"times": [0.0, 1.0], "values": [1.0, 2.0]}, "z0": [0.1, 0.2]},
                  {"family": "gamma", "a": 2.0, "b": 3.0, "lambda": {"times": [0.0], "values": [0.5]}, "z0": [1.0]}]},
                "evaluation": {"times": [0.0, 1.0], "maturities": [1.0, 2.0], "state": [0.3, 0.4, 0.5]},
                "calibration": null}"#
                .to_string(),
            r#"{"model": {"kind": "hjm", "vol": {"family": "vasicek", "sigma": 0.02, "kappa": 0.5},
                          "curve": {"kind": "pillars", "maturities": [1.0, 5.0], "discounts": [0.98, 0.86]}},
                "grid": {"horizon": 5.0, "step": 0.05},
                "evaluation": {"times": [0.0, 1.0], "maturities": [1.0, 2.0, 5.0]},
                "simulation": {"paths": 100, "seed": 7, "dump_paths": 2},
                "outputs": {"dir": "results"}}"#
                .to_string(),
            r#"{"model": {"kind": "qtsm", "a0": [0.5, 0.3], "a_inf": [0.4, 0.4], "rho": 0.2,
                          "frame": [[0.6, 0.8], [-0.8, 0.6]], "k": {"times": [0.0, 1.0], "values": [0.0, -0.1]}},
                "evaluation": {"maturities": [1.0]}}"#
                .to_string(),
            format!(
                r#"{{"model": {}, "evaluation": {{"maturities": [1.0]}}, "calibration": {{"curve": "c.csv", "lambda0": 2.0}}}}"#,
                r#"{"kind": "ldtsm", "family": "stable", "alpha": 1.5, "theta": 1.0, "lambda": {"times": [0.0], "values": [1.0]}}"#
            ),
            format!(
                r#"{{"model": {}, "evaluation": {{"maturities": [1.0]}}}}"#,
                serde_json::to_string(&ModelConfig::Shirakawa(crate::validation::default_shirakawa()).to_value()).unwrap()
            ),
        ];
        for text in texts {
            let s = parse_scenario(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            let again = parse_scenario(&s.to_json_pretty()).unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn load_checks_referenced_files() {
        let dir = std::env::temp_dir().join(format!("ldtsm-scenario-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let text = r#"{"model": {"kind": "ldtsm", "family": "cauchy", "theta": 1.0, "lambda": {"times": [0.0], "values": [1.0]}},
                       "evaluation": {"maturities": [1.0]}, "calibration": {"curve": "curve.csv"}}"#;
        let cfg = dir.join("s.json");
        std::fs::write(&cfg, text).unwrap();
        let err = load_scenario(&cfg).unwrap_err();
        assert_eq!(paths(err), ["calibration.curve"]);
        std::fs::write(dir.join("curve.csv"), "T,price\n1,0.9\n").unwrap();
        let s = load_scenario(&cfg).unwrap();
        assert_eq!(s.calibration.unwrap().curve, dir.join("curve.csv"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
