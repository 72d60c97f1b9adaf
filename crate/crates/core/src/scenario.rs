//! Scenario files.
//!
//! A scenario is one TOML document. Every table except `start` and the
//! top-level `goal` is optional; unknown keys are rejected.
//!
//! ```toml
//! schema_version = 1
//! id = "urban-01"            # defaults to the file stem
//! goal = [250.0, 40.0, 30.0]
//! vehicle_radius = 2.0       # added to every semi-axis on load
//!
//! [start]
//! position = [0.0, 0.0, 30.0]
//! velocity = [14.0, 0.0, 0.0]
//! acceleration = [0.0, 0.0, 0.0]
//! heading = 0.0              # optional
//! heading_rate = 0.0
//!
//! [limits]                   # v_min, v_max, gamma_max, phi_max, g
//! [horizon]                  # n, degree, total_time = <seconds> | "auto"
//! [solver]                   # max_iter, residual_tol, pre_iterations,
//!                            # heading_variant, rho_nh, rho_c, rho_in,
//!                            # w_goal, w_smooth
//!
//! [[obstacles]]
//! center = [120.0, 10.0, 0.0]
//! semi_axes = [15.0, 12.0, 50.0]
//! ```
//!
//! Angles are in radians, lengths in meters, times in seconds.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{
    inflate_obstacles, BoundaryState, Ellipsoid, Horizon, Limits, ProblemSpec, TotalTime, Weights,
};
use crate::solver::{HeadingVariant, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub goal: [f64; 3],
    #[serde(default)]
    pub vehicle_radius: f64,
    pub start: StartSection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub horizon: HorizonSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSection {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub acceleration: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    #[serde(default)]
    pub heading_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSection {
    pub v_min: f64,
    pub v_max: f64,
    pub gamma_max: f64,
    pub phi_max: f64,
    pub g: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = Limits::default();
        LimitsSection {
            v_min: l.v_min,
            v_max: l.v_max,
            gamma_max: l.gamma_max,
            phi_max: l.phi_max,
            g: l.g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonSection {
    pub n: usize,
    pub degree: usize,
    #[serde(serialize_with = "ser_total_time", deserialize_with = "de_total_time")]
    pub total_time: TotalTime,
}

impl Default for HorizonSection {
    fn default() -> Self {
        let h = Horizon::default();
        HorizonSection {
            n: h.n,
            degree: h.degree,
            total_time: h.total_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub pre_iterations: usize,
    pub heading_variant: HeadingVariant,
    pub rho_nh: f64,
    pub rho_c: f64,
    pub rho_in: f64,
    pub w_goal: f64,
    pub w_smooth: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        let w = Weights::default();
        SolverSection {
            max_iter: c.max_iter,
            residual_tol: c.residual_tol,
            pre_iterations: c.pre_iterations,
            heading_variant: c.heading_variant,
            rho_nh: w.rho_nh,
            rho_c: w.rho_c,
            rho_in: w.rho_in,
            w_goal: w.w_goal,
            w_smooth: w.w_smooth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
}

fn ser_total_time<S: Serializer>(t: &TotalTime, s: S) -> std::result::Result<S::Ok, S::Error> {
    match t {
        TotalTime::Fixed(v) => s.serialize_f64(*v),
        TotalTime::Auto => s.serialize_str("auto"),
    }
}

fn de_total_time<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TotalTime, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Word(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(TotalTime::Fixed(v)),
        Raw::Int(v) => Ok(TotalTime::Fixed(v as f64)),
        Raw::Word(w) if w == "auto" => Ok(TotalTime::Auto),
        Raw::Word(w) => Err(serde::de::Error::custom(format!(
            "total_time must be a number of seconds or \"auto\", got \"{w}\""
        ))),
    }
}

/// A parsed scenario: its id, the validated problem and the solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub spec: ProblemSpec,
    pub config: SolverConfig,
}

impl ScenarioFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", file.schema_version),
            ));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: "<serialize>".into(),
            message: e.to_string(),
        })
    }

    /// Builds the problem with obstacles inflated by `vehicle_radius`.
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        if !(self.vehicle_radius.is_finite() && self.vehicle_radius >= 0.0) {
            return Err(Error::validation("vehicle_radius", "must be finite and non-negative"));
        }
        let raw: Vec<Ellipsoid> = self
            .obstacles
            .iter()
            .map(|o| Ellipsoid::new(o.center, o.semi_axes))
            .collect();
        let s = &self.start;
        let l = &self.limits;
        let sv = &self.solver;
        let spec = ProblemSpec {
            start: BoundaryState {
                position: Vector3::from(s.position),
                velocity: Vector3::from(s.velocity),
                acceleration: Vector3::from(s.acceleration),
                heading: s.heading,
                heading_rate: s.heading_rate,
            },
            goal: Vector3::from(self.goal),
            limits: Limits {
                v_min: l.v_min,
                v_max: l.v_max,
                gamma_max: l.gamma_max,
                phi_max: l.phi_max,
                g: l.g,
            },
            obstacles: inflate_obstacles(&raw, self.vehicle_radius),
            weights: Weights {
                rho_nh: sv.rho_nh,
                rho_c: sv.rho_c,
                rho_in: sv.rho_in,
                w_goal: sv.w_goal,
                w_smooth: sv.w_smooth,
            },
            horizon: Horizon {
                n: self.horizon.n,
                degree: self.horizon.degree,
                total_time: self.horizon.total_time,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_config(&self) -> Result<SolverConfig> {
        let c = SolverConfig {
            max_iter: self.solver.max_iter,
            residual_tol: self.solver.residual_tol,
            pre_iterations: self.solver.pre_iterations,
            heading_variant: self.solver.heading_variant,
        };
        c.validate()?;
        Ok(c)
    }

    /// Inverse of [`ScenarioFile::to_spec`]; obstacles are written already
    /// inflated with a zero vehicle radius.
    pub fn from_spec(id: Option<String>, spec: &ProblemSpec, config: &SolverConfig) -> Self {
        let w = &spec.weights;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            id,
            goal: spec.goal.into(),
            vehicle_radius: 0.0,
            start: StartSection {
                position: spec.start.position.into(),
                velocity: spec.start.velocity.into(),
                acceleration: spec.start.acceleration.into(),
                heading: spec.start.heading,
                heading_rate: spec.start.heading_rate,
            },
            limits: LimitsSection {
                v_min: spec.limits.v_min,
                v_max: spec.limits.v_max,
                gamma_max: spec.limits.gamma_max,
                phi_max: spec.limits.phi_max,
                g: spec.limits.g,
            },
            horizon: HorizonSection {
                n: spec.horizon.n,
                degree: spec.horizon.degree,
                total_time: spec.horizon.total_time,
            },
            solver: SolverSection {
                max_iter: config.max_iter,
                residual_tol: config.residual_tol,
                pre_iterations: config.pre_iterations,
                heading_variant: config.heading_variant,
                rho_nh: w.rho_nh,
                rho_c: w.rho_c,
                rho_in: w.rho_in,
                w_goal: w.w_goal,
                w_smooth: w.w_smooth,
            },
            obstacles: spec
                .obstacles
                .iter()
                .map(|o| ObstacleSection {
                    center: o.center.into(),
                    semi_axes: o.semi_axes.into(),
                })
                .collect(),
        }
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file = ScenarioFile::parse(&text, path)?;
    let id = file.id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    Ok(Scenario {
        id,
        spec: file.to_spec()?,
        config: file.to_config()?,
    })
}

/// Reads a scenario file and returns only its validated problem.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    Ok(load_scenario_file(path)?.spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
goal = [200.0, 0.0, 30.0]
[start]
position = [0.0, 0.0, 30.0]
velocity = [14.0, 0.0, 0.0]
[horizon]
n = 40
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let f = ScenarioFile::parse(MINIMAL, Path::new("m.toml")).unwrap();
        let spec = f.to_spec().unwrap();
        assert_eq!(spec.weights, Weights::default());
        assert_eq!(spec.horizon.n, 40);
        assert_eq!(spec.horizon.total_time, TotalTime::Auto);
        assert_eq!(f.to_config().unwrap(), SolverConfig::default());
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = ScenarioFile::parse(&text, Path::new("m.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn total_time_accepts_number_and_auto() {
        let text = MINIMAL.replace("n = 40", "n = 40\ntotal_time = 18");
        let f = ScenarioFile::parse(&text, Path::new("m.toml")).unwrap();
        assert_eq!(f.horizon.total_time, TotalTime::Fixed(18.0));
        let text = MINIMAL.replace("n = 40", "n = 40\ntotal_time = \"fast\"");
        assert!(ScenarioFile::parse(&text, Path::new("m.toml")).is_err());
    }

    #[test]
    fn speed_order_violation_names_field() {
        let text = format!("{MINIMAL}\n[limits]\nv_min = 25.0\nv_max = 20.0\n");
        let f = ScenarioFile::parse(&text, Path::new("m.toml")).unwrap();
        let msg = f.to_spec().unwrap_err().to_string();
        assert!(msg.contains("limits.v_min"), "{msg}");
    }

    #[test]
    fn vehicle_radius_inflates_obstacles() {
        let text = format!(
            "vehicle_radius = 2.0\n{MINIMAL}\n[[obstacles]]\ncenter = [100.0, 30.0, 0.0]\nsemi_axes = [10.0, 10.0, 40.0]\n"
        );
        let spec = ScenarioFile::parse(&text, Path::new("m.toml")).unwrap().to_spec().unwrap();
        assert_eq!(spec.obstacles[0].semi_axes, Vector3::new(12.0, 12.0, 42.0));
    }
}
