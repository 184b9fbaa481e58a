//! Robot morphologies: the flat joint/feet attribute lists that drive
//! the surrogate dynamics and, normalized, become the fixed-length
//! description vectors the policy routes on.

mod describe;
mod generate;
mod randomize;

pub use describe::{
    build_foot_description, build_joint_description, DescriptionVector, FOOT_DESC_LEN,
    JOINT_DESC_LEN,
};
pub use generate::{generate_surrogate_robot, joints_per_leg, table_robot, table_robot_names};
pub use randomize::{randomize_robot, DrRanges};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::RewardCoefficients;

#[derive(Debug, Error)]
pub enum MorphologyError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("robot {robot:?}: {message}")]
    Invalid { robot: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphologyClass {
    Quadruped,
    Biped,
    Humanoid,
    Hexapod,
    Other,
}

impl MorphologyClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            MorphologyClass::Quadruped => "quadruped",
            MorphologyClass::Biped => "biped",
            MorphologyClass::Humanoid => "humanoid",
            MorphologyClass::Hexapod => "hexapod",
            MorphologyClass::Other => "other",
        }
    }
}

/// Which lateral half a foot belongs to. Center feet (the middle pair
/// of a hexapod) are excluded from the left/right symmetry penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Center,
}

/// One controlled joint: everything the policy is allowed to know about
/// it, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// Relative 3D position in the nominal configuration, trunk frame, meters.
    pub position: [f64; 3],
    /// Unit rotation axis in the trunk frame.
    pub axis: [f64; 3],
    /// Number of direct child joints.
    pub child_count: u32,
    /// Nominal position, radians.
    pub q_nominal: f64,
    /// Torque limit, N*m.
    pub torque_limit: f64,
    /// Velocity limit, rad/s.
    pub velocity_limit: f64,
    /// Viscous damping, N*m*s/rad.
    pub damping: f64,
    /// Rotor inertia, kg*m^2.
    pub rotor_inertia: f64,
    /// Spring stiffness toward the nominal position, N*m/rad.
    pub stiffness: f64,
    /// Dry friction coefficient.
    pub friction: f64,
    /// Control range, radians.
    pub control_min: f64,
    pub control_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootSpec {
    pub name: String,
    /// Relative 3D position in the nominal configuration, meters.
    pub position: [f64; 3],
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub kp: f64,
    pub kd: f64,
    /// Scaling factor from policy action to joint-position offset.
    pub action_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    /// Total mass, kg.
    pub mass: f64,
    /// Length, width, height, meters.
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Target trunk height while walking, meters.
    pub nominal_height: f64,
}

/// A complete morphology. Immutable after loading; domain randomization
/// produces perturbed copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub name: String,
    pub class: MorphologyClass,
    pub pd: PdConfig,
    pub body: BodyConfig,
    pub joints: Vec<JointSpec>,
    pub feet: Vec<FootSpec>,
    pub reward_coefficients: RewardCoefficients,
}

impl RobotSpec {
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn foot_count(&self) -> usize {
        self.feet.len()
    }

    /// Check every structural invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), MorphologyError> {
        let fail = |message: String| MorphologyError::Invalid {
            robot: self.name.clone(),
            message,
        };
        if self.joints.is_empty() {
            return Err(fail("a robot needs at least one joint".into()));
        }
        if self.feet.is_empty() {
            return Err(fail("a robot needs at least one foot".into()));
        }
        for (field, v) in [
            ("body.mass", self.body.mass),
            ("body.length", self.body.length),
            ("body.width", self.body.width),
            ("body.height", self.body.height),
            ("body.nominal_height", self.body.nominal_height),
            ("pd.action_scale", self.pd.action_scale),
            ("pd.kp", self.pd.kp),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(fail(format!("{field} must be positive, got {v}")));
            }
        }
        if self.pd.kd < 0.0 || !self.pd.kd.is_finite() {
            return Err(fail(format!("pd.kd must be non-negative, got {}", self.pd.kd)));
        }
        let mut seen = std::collections::HashSet::new();
        for joint in &self.joints {
            if !seen.insert(joint.name.as_str()) {
                return Err(fail(format!("duplicate joint name {:?}", joint.name)));
            }
            let norm = joint
                .axis
                .iter()
                .map(|a| a * a)
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(fail(format!(
                    "joint {:?}: rotation axis has norm {norm}, expected a unit vector",
                    joint.name
                )));
            }
            if !(joint.control_min < joint.control_max) {
                return Err(fail(format!(
                    "joint {:?}: control range [{}, {}] is inverted or empty",
                    joint.name, joint.control_min, joint.control_max
                )));
            }
            if !(joint.torque_limit > 0.0) {
                return Err(fail(format!(
                    "joint {:?}: torque_limit must be positive, got {}",
                    joint.name, joint.torque_limit
                )));
            }
            if !(joint.velocity_limit > 0.0) {
                return Err(fail(format!(
                    "joint {:?}: velocity_limit must be positive, got {}",
                    joint.name, joint.velocity_limit
                )));
            }
            if joint.q_nominal < joint.control_min || joint.q_nominal > joint.control_max {
                return Err(fail(format!(
                    "joint {:?}: q_nominal {} outside control range [{}, {}]",
                    joint.name, joint.q_nominal, joint.control_min, joint.control_max
                )));
            }
            for (field, v) in [
                ("damping", joint.damping),
                ("rotor_inertia", joint.rotor_inertia),
                ("stiffness", joint.stiffness),
                ("friction", joint.friction),
            ] {
                if v < 0.0 || !v.is_finite() {
                    return Err(fail(format!(
                        "joint {:?}: {field} must be non-negative, got {v}",
                        joint.name
                    )));
                }
            }
        }
        self.reward_coefficients
            .validate()
            .map_err(|e| fail(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("RobotSpec serializes")
    }
}

/// Load and validate a robot spec file.
pub fn load_robot_spec(path: impl AsRef<Path>) -> Result<RobotSpec, MorphologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MorphologyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let spec: RobotSpec = toml::from_str(&text).map_err(|source| MorphologyError::Parse {
        path: path.display().to_string(),
        source: Box::new(source),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Write a spec in the same format `load_robot_spec` reads.
pub fn save_robot_spec(spec: &RobotSpec, path: impl AsRef<Path>) -> Result<(), MorphologyError> {
    std::fs::write(path.as_ref(), spec.to_toml()).map_err(|source| MorphologyError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_joint_names_are_named_in_the_error() {
        let mut spec = table_robot("A1").unwrap();
        let name = spec.joints[0].name.clone();
        spec.joints[1].name = name.clone();
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains(&name), "error: {err}");
    }

    #[test]
    fn spec_files_round_trip() {
        let spec = table_robot("Hexapod").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hexapod.toml");
        save_robot_spec(&spec, &path).unwrap();
        let loaded = load_robot_spec(&path).unwrap();
        assert_eq!(spec, loaded);
    }

    #[test]
    fn parse_error_reports_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.toml");
        std::fs::write(&path, "name = \"x\"\nclass = 5\n").unwrap();
        let err = load_robot_spec(&path).unwrap_err();
        assert!(err.to_string().contains("broken.toml"));
    }
}
