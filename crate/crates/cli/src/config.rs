//! Scenario files: one TOML document with a `[model]` table plus optional
//! `[numerics]`, `[sweep]`, and `[ramsey]` tables.
//!
//! ```toml
//! [model]
//! kind = "jc"        # "dispersive" (decaying qubit) or "jc" (damped dimer)
//! g = 1.0            # dimer coupling
//! delta = 0.5        # dimer detuning
//! gamma = 0.1        # decay rate (dispersive) / atomic rate (jc)
//! kappa = 0.05       # photon loss rate (jc only, default 0)
//! n = 0              # photon number (jc only, default 0)
//! # b = 1.0          # level splitting (dispersive)
//! # theta = 1.57     # initial polar angle (dispersive)
//! # t = 3.0          # evolution time; omitted = one natural period
//! # degrees = true   # interpret theta (and theta axes) in degrees
//!
//! [numerics]
//! dt = 0.001         # integrator step; omitted = automatic
//!
//! [sweep]
//! methods = ["joint", "jump"]
//! [[sweep.axis]]
//! name = "gamma"     # dispersive: theta|gamma|b|t; jc: gamma|delta|g|kappa|n|t
//! start = 0.0
//! stop = 0.5
//! steps = 11
//!
//! [ramsey]
//! protocol = "auto"  # auto | ground | multichannel | fock
//! recapture = 0.05   # reabsorbed-jump rate, multichannel only
//! ```
//!
//! Angles are radians unless `degrees = true`, which converts at this
//! boundary only; everything downstream, output included, is radians.

use std::path::Path;

use serde::Deserialize;

use geomphase::models::{DispersiveQubitParams, JCParams};
use geomphase::Result as CoreResult;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    pub sweep: Option<SweepSection>,
    pub ramsey: Option<RamseySection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    #[serde(default)]
    pub degrees: bool,
    pub b: Option<f64>,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub g: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub n: Option<u32>,
    pub t: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub axis: Vec<AxisSection>,
}

fn default_methods() -> Vec<String> {
    vec!["joint".into(), "jump".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySection {
    #[serde(default = "default_protocol")]
    pub protocol: String,
    pub recapture: Option<f64>,
}

fn default_protocol() -> String {
    "auto".into()
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Dispersive,
    Jc,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Dispersive => "dispersive",
            ModelKind::Jc => "jc",
        }
    }
}

/// One fully numeric grid point: the base scenario with axis values applied.
#[derive(Debug, Clone)]
pub struct PointParams {
    pub kind: ModelKind,
    pub b: f64,
    pub theta: f64,
    pub gamma: f64,
    pub g: f64,
    pub delta: f64,
    pub kappa: f64,
    pub n: usize,
    /// Explicit duration; `None` means one natural period of the point.
    pub t: Option<f64>,
}

fn require(field: Option<f64>, name: &str, kind: &str) -> Result<f64, CliError> {
    field.ok_or_else(|| CliError::Config(format!("model.{name} is required for kind \"{kind}\"")))
}

impl PointParams {
    pub fn from_model(section: &ModelSection) -> Result<Self, CliError> {
        let kind = match section.kind.as_str() {
            "dispersive" => ModelKind::Dispersive,
            "jc" => ModelKind::Jc,
            other => {
                return Err(CliError::Config(format!(
                    "unknown model.kind \"{other}\" (dispersive|jc)"
                )))
            }
        };
        let mut point = PointParams {
            kind,
            b: 0.0,
            theta: 0.0,
            gamma: require(section.gamma, "gamma", section.kind.as_str())?,
            g: 0.0,
            delta: 0.0,
            kappa: section.kappa.unwrap_or(0.0),
            n: section.n.unwrap_or(0) as usize,
            t: section.t,
        };
        match kind {
            ModelKind::Dispersive => {
                point.b = require(section.b, "b", "dispersive")?;
                let theta = require(section.theta, "theta", "dispersive")?;
                point.theta = if section.degrees {
                    theta.to_radians()
                } else {
                    theta
                };
            }
            ModelKind::Jc => {
                point.g = require(section.g, "g", "jc")?;
                point.delta = require(section.delta, "delta", "jc")?;
            }
        }
        Ok(point)
    }

    /// Axis names this point accepts.
    pub fn axis_names(&self) -> &'static [&'static str] {
        match self.kind {
            ModelKind::Dispersive => &["theta", "gamma", "b", "t"],
            ModelKind::Jc => &["gamma", "delta", "g", "kappa", "n", "t"],
        }
    }

    /// Overwrite one named field with an axis value.  `degrees` applies the
    /// same boundary conversion as the base theta.
    pub fn set_axis(&mut self, name: &str, value: f64, degrees: bool) -> Result<(), CliError> {
        if !self.axis_names().contains(&name) {
            return Err(CliError::Config(format!(
                "axis \"{name}\" does not apply to kind \"{}\" (expected one of {:?})",
                self.kind.label(),
                self.axis_names()
            )));
        }
        match name {
            "theta" => self.theta = if degrees { value.to_radians() } else { value },
            "gamma" => self.gamma = value,
            "b" => self.b = value,
            "g" => self.g = value,
            "delta" => self.delta = value,
            "kappa" => self.kappa = value,
            "n" => {
                if value < -0.5 {
                    return Err(CliError::Config(format!(
                        "axis \"n\" produced the negative value {value}"
                    )));
                }
                self.n = value.round() as usize;
            }
            "t" => self.t = Some(value),
            _ => unreachable!("axis list checked above"),
        }
        Ok(())
    }

    /// Validate the numbers through the engine's own constructors.
    pub fn build(&self) -> CoreResult<BuiltPoint> {
        match self.kind {
            ModelKind::Dispersive => {
                let p = match self.t {
                    Some(t) => DispersiveQubitParams::new(self.b, self.gamma, self.theta, t)?,
                    None => DispersiveQubitParams::cyclic(self.b, self.gamma, self.theta)?,
                };
                Ok(BuiltPoint::Dispersive { p })
            }
            ModelKind::Jc => {
                let p = JCParams::new(self.g, self.delta, self.gamma, self.kappa, self.n)?;
                let t = self.t.unwrap_or_else(|| p.cycle_time());
                Ok(BuiltPoint::Jc { p, t })
            }
        }
    }
}

/// A point whose parameters passed validation.
pub enum BuiltPoint {
    Dispersive { p: DispersiveQubitParams },
    Jc { p: JCParams, t: f64 },
}

impl BuiltPoint {
    pub fn duration(&self) -> f64 {
        match self {
            BuiltPoint::Dispersive { p } => p.t_total,
            BuiltPoint::Jc { t, .. } => *t,
        }
    }
}
