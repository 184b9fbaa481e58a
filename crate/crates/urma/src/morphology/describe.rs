//! Fixed-length description vectors.
//!
//! Every joint of every robot maps to the same 23-entry layout and
//! every foot to the same 10-entry layout, each entry divided by its
//! global scale constant. This fixed layout is what lets a single
//! network identify and route arbitrary joints.

use crate::morphology::RobotSpec;
use crate::scales;

/// Joint-specific part (16 entries) plus the general robot part (7).
pub const JOINT_DESC_LEN: usize = 23;
/// Foot position (3) plus the general robot part (7).
pub const FOOT_DESC_LEN: usize = 10;

/// A normalized description vector for one joint or foot.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptionVector(pub Vec<f64>);

impl DescriptionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn general_part(robot: &RobotSpec, out: &mut Vec<f64>) {
    out.push(robot.pd.kp / scales::KP);
    out.push(robot.pd.kd / scales::KD);
    out.push(robot.pd.action_scale / scales::ACTION_SCALE);
    out.push(robot.body.mass / scales::MASS_KG);
    out.push(robot.body.length / scales::DIMENSION_M);
    out.push(robot.body.width / scales::DIMENSION_M);
    out.push(robot.body.height / scales::DIMENSION_M);
}

/// Build the 23-entry description for one joint. Pure function of
/// `(robot, joint_index)`; field order is fixed across all robots.
pub fn build_joint_description(robot: &RobotSpec, joint_index: usize) -> DescriptionVector {
    let j = &robot.joints[joint_index];
    let mut out = Vec::with_capacity(JOINT_DESC_LEN);
    for p in j.position {
        out.push(p / scales::POSITION_M);
    }
    for a in j.axis {
        out.push(a / scales::AXIS);
    }
    out.push(j.child_count as f64 / scales::CHILD_COUNT);
    out.push(j.q_nominal / scales::ANGLE_RAD);
    out.push(j.torque_limit / scales::TORQUE_NM);
    out.push(j.velocity_limit / scales::JOINT_VEL);
    out.push(j.damping / scales::DAMPING);
    out.push(j.rotor_inertia / scales::ROTOR_INERTIA);
    out.push(j.stiffness / scales::STIFFNESS);
    out.push(j.friction / scales::FRICTION);
    out.push(j.control_min / scales::ANGLE_RAD);
    out.push(j.control_max / scales::ANGLE_RAD);
    general_part(robot, &mut out);
    debug_assert_eq!(out.len(), JOINT_DESC_LEN);
    DescriptionVector(out)
}

/// Build the 10-entry description for one foot.
pub fn build_foot_description(robot: &RobotSpec, foot_index: usize) -> DescriptionVector {
    let f = &robot.feet[foot_index];
    let mut out = Vec::with_capacity(FOOT_DESC_LEN);
    for p in f.position {
        out.push(p / scales::POSITION_M);
    }
    general_part(robot, &mut out);
    debug_assert_eq!(out.len(), FOOT_DESC_LEN);
    DescriptionVector(out)
}
