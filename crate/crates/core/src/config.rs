//! Versioned JSON problem description.
//!
//! ```json
//! {
//!   "schema": "jte/1",
//!   "robot": { "kind": "planar", "link_lengths": [1.0, 1.0] },
//!   "reference": ["pi/3", "pi/6"],
//!   "constraints": [{ "name": "x-wall", "normal": [1, 0], "offset": 1.456 }]
//! }
//! ```
//!
//! `robot` may also be a path to a robot file, resolved relative to the
//! config. Angles are radians, written as numbers or as `pi` expressions such
//! as `"-pi/2"` or `"3*pi/20"`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::kinematics::{
    eval_constraint, HalfPlaneConstraint, LowerBoundOptions, RobotModel, SpatialArm, SpatialJoint,
    SMALL_ANGLE_LIMIT,
};
use crate::nlp::NlpOptions;

pub const SCHEMA: &str = "jte/1";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("reference configuration violates constraint `{name}` (f = {value:.6} m)")]
    InfeasibleReference { name: String, value: f64 },
}

/// A radian value, or a string such as `"pi/3"`, `"-pi/2"`, `"3*pi/20"`, `"0.25"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64, String> {
        match self {
            Angle::Radians(v) => Ok(*v),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

/// Parses `[-](k[*]pi | pi | number)[/m]`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
    if s.ends_with("deg") || s.contains('°') {
        return Err(format!("angle `{text}` is in degrees; only radians are accepted"));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (body, None),
    };
    let bad = || format!("cannot parse angle `{text}`");
    let numerator = if let Some(k) = num.strip_suffix("pi") {
        let k = k.strip_suffix('*').unwrap_or(k);
        let factor = if k.is_empty() { 1.0 } else { k.parse::<f64>().map_err(|_| bad())? };
        factor * std::f64::consts::PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let denominator = match den {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None => 1.0,
    };
    if denominator == 0.0 {
        return Err(bad());
    }
    let v = sign * numerator / denominator;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// One row of a standard Denavit–Hartenberg table (meters, radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow {
    pub a: f64,
    pub alpha: Angle,
    pub d: f64,
}

/// Robot descriptions accepted in config and robot files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobotSpec {
    Planar {
        link_lengths: Vec<f64>,
    },
    Spatial {
        joints: Vec<SpatialJoint>,
        #[serde(default)]
        tool: [f64; 3],
    },
    /// Revolute chain from a DH table; `base` translates the first joint.
    Dh {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        note: Option<String>,
        #[serde(default)]
        base: [f64; 3],
        links: Vec<DhRow>,
    },
}

fn snap(v: f64) -> f64 {
    for target in [-1.0, 0.0, 1.0] {
        if (v - target).abs() < 1e-14 {
            return target;
        }
    }
    v
}

impl RobotSpec {
    pub fn build(&self) -> Result<RobotModel, Vec<String>> {
        let model = match self {
            RobotSpec::Planar { link_lengths } => RobotModel::Planar(crate::kinematics::PlanarArm {
                link_lengths: link_lengths.clone(),
            }),
            RobotSpec::Spatial { joints, tool } => RobotModel::Spatial(SpatialArm { joints: joints.clone(), tool: *tool }),
            RobotSpec::Dh { base, links, .. } => {
                let mut errs = Vec::new();
                let identity = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
                let z = [0.0, 0.0, 1.0];
                let mut joints = vec![SpatialJoint { rotation: identity, translation: *base, axis: z }];
                let mut tool = [0.0; 3];
                for (i, row) in links.iter().enumerate() {
                    let alpha = match row.alpha.radians() {
                        Ok(v) => v,
                        Err(e) => {
                            errs.push(format!("robot.links[{i}].alpha: {e}"));
                            0.0
                        }
                    };
                    let (c, s) = (snap(alpha.cos()), snap(alpha.sin()));
                    let rotation = [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]];
                    let translation = [row.a, 0.0, row.d];
                    if i + 1 < links.len() {
                        joints.push(SpatialJoint { rotation, translation, axis: z });
                    } else {
                        tool = translation;
                    }
                }
                if !errs.is_empty() {
                    return Err(errs);
                }
                if links.is_empty() {
                    return Err(vec!["robot.links: at least one DH row is required".into()]);
                }
                RobotModel::Spatial(SpatialArm { joints, tool })
            }
        };
        let errs = model.validate();
        if errs.is_empty() {
            Ok(model)
        } else {
            Err(errs.into_iter().map(|e| format!("robot: {e}")).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationOptions {
    /// Monte-Carlo sample count; 0 disables sampling checks.
    pub samples: usize,
    pub seed: u64,
    pub corner_bias: f64,
    pub oracle: bool,
    pub grid_per_axis: Option<usize>,
    pub oracle_tol: f64,
    pub lambda_max: f64,
    /// Sample `g − f` at the certified tolerance.
    pub lower_bound_check: bool,
}

impl Default for VerificationOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            corner_bias: 0.0,
            oracle: true,
            grid_per_axis: None,
            oracle_tol: 1e-6,
            lambda_max: SMALL_ANGLE_LIMIT,
            lower_bound_check: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    robot: Value,
    #[serde(default = "default_unit")]
    angle_unit: String,
    reference: Vec<Angle>,
    #[serde(default)]
    constraints: Vec<HalfPlaneConstraint>,
    #[serde(default = "default_order")]
    cone_order: usize,
    #[serde(default)]
    model: LowerBoundOptions,
    #[serde(default)]
    solver: NlpOptions,
    #[serde(default)]
    verification: VerificationOptions,
}

fn default_unit() -> String {
    "rad".into()
}

fn default_order() -> usize {
    2
}

/// Validated problem description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub name: String,
    pub description: Option<String>,
    pub robot: RobotModel,
    pub reference: Vec<f64>,
    pub constraints: Vec<HalfPlaneConstraint>,
    pub cone_order: usize,
    pub model: LowerBoundOptions,
    pub solver: NlpOptions,
    pub verification: VerificationOptions,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = if path == "." {
            inner.to_string()
        } else {
            format!("field `{path}`: {inner}")
        };
        ConfigError::Parse { origin: origin.to_string(), message }
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

/// Reads, validates and fills defaults; robot file references resolve
/// against the config's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ProblemSpec, ConfigError> {
    let path = path.as_ref();
    let text = read(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse_config(&text, &path.display().to_string(), path.parent(), stem)
}

/// Same as [`load_config`] for in-memory text.
pub fn parse_config(
    text: &str,
    origin: &str,
    base_dir: Option<&Path>,
    fallback_name: Option<String>,
) -> Result<ProblemSpec, ConfigError> {
    let raw: RawConfig = parse_json(text, origin)?;
    let mut errs = Vec::new();
    if raw.schema != SCHEMA {
        errs.push(format!("schema: expected `{SCHEMA}`, got `{}`", raw.schema));
    }
    if raw.angle_unit != "rad" {
        errs.push(format!("angle_unit: only `rad` is accepted, got `{}`", raw.angle_unit));
    }
    let robot_spec: RobotSpec = match &raw.robot {
        Value::String(file) => {
            let p = base_dir.map_or_else(|| PathBuf::from(file), |d| d.join(file));
            let text = read(&p)?;
            parse_json(&text, &p.display().to_string())?
        }
        other => parse_json(&other.to_string(), &format!("{origin} (robot)"))?,
    };
    let robot = match robot_spec.build() {
        Ok(r) => Some(r),
        Err(e) => {
            errs.extend(e);
            None
        }
    };

    let mut reference = Vec::new();
    for (i, a) in raw.reference.iter().enumerate() {
        match a.radians() {
            Ok(v) if v.is_finite() => reference.push(v),
            Ok(v) => errs.push(format!("reference[{i}]: not finite ({v})")),
            Err(e) => errs.push(format!("reference[{i}]: {e}")),
        }
    }
    if raw.constraints.is_empty() {
        errs.push("constraints: at least one constraint is required".into());
    }
    let mut seen = std::collections::BTreeSet::new();
    for (i, c) in raw.constraints.iter().enumerate() {
        if !seen.insert(c.name.as_str()) {
            errs.push(format!("constraints[{i}]: duplicate name `{}`", c.name));
        }
        if c.normal.iter().all(|v| *v == 0.0) || c.normal.iter().any(|v| !v.is_finite()) {
            errs.push(format!("constraints[{i}] `{}`: normal must be finite and nonzero", c.name));
        }
        if !c.offset.is_finite() {
            errs.push(format!("constraints[{i}] `{}`: offset must be finite", c.name));
        }
    }
    if let Some(robot) = &robot {
        let n = robot.dof();
        if reference.len() != n && raw.reference.len() == reference.len() {
            errs.push(format!("reference: expected {n} joint angles, got {}", reference.len()));
        }
        for (i, c) in raw.constraints.iter().enumerate() {
            if c.normal.len() != robot.workspace_dim() {
                errs.push(format!(
                    "constraints[{i}] `{}`: normal has {} components, workspace is {}-D",
                    c.name,
                    c.normal.len(),
                    robot.workspace_dim()
                ));
            }
            if let crate::kinematics::BodyPoint::LinkTip(k) = c.point {
                if k == 0 || k > n {
                    errs.push(format!("constraints[{i}] `{}`: link tip {k} outside 1..={n}", c.name));
                }
            }
        }
        if raw.cone_order == 0 || raw.cone_order > n + 1 {
            errs.push(format!("cone_order: must lie in 1..={}, got {}", n + 1, raw.cone_order));
        }
    }
    errs.extend(raw.solver.validate());
    let v = &raw.verification;
    if !(0.0..=1.0).contains(&v.corner_bias) {
        errs.push(format!("verification.corner_bias: must lie in [0, 1], got {}", v.corner_bias));
    }
    if !(v.lambda_max > 0.0 && v.lambda_max.is_finite()) {
        errs.push("verification.lambda_max: must be positive".into());
    }
    if !(v.oracle_tol > 0.0) {
        errs.push("verification.oracle_tol: must be positive".into());
    }
    if matches!(v.grid_per_axis, Some(g) if g < 2) {
        errs.push("verification.grid_per_axis: must be at least 2".into());
    }
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    let robot = robot.expect("robot validated");

    for c in &raw.constraints {
        let value = eval_constraint(c, &robot, &reference).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
        if !(value > 0.0) {
            return Err(ConfigError::InfeasibleReference { name: c.name.clone(), value });
        }
    }
    Ok(ProblemSpec {
        name: raw.name.or(fallback_name).unwrap_or_else(|| "problem".into()),
        description: raw.description,
        robot,
        reference,
        constraints: raw.constraints,
        cone_order: raw.cone_order,
        model: raw.model,
        solver: raw.solver,
        verification: raw.verification,
    })
}
