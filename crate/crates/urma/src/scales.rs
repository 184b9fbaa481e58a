//! Global normalization constants.
//!
//! Every description and observation entry is divided by the fixed
//! constant below for its physical quantity so that typical values land
//! near [-1, 1] for every robot in the fleet. Keeping them in one table
//! makes the normalization auditable and identical on both the
//! description and observation paths.

use std::f64::consts::PI;

/// Relative positions, meters.
pub const POSITION_M: f64 = 1.0;
/// Rotation axes are already unit vectors.
pub const AXIS: f64 = 1.0;
/// Direct child-joint counts.
pub const CHILD_COUNT: f64 = 4.0;
/// Joint angles (nominal positions, control ranges, measured q), radians.
pub const ANGLE_RAD: f64 = PI;
/// Torque limits, N*m.
pub const TORQUE_NM: f64 = 200.0;
/// Velocity limits and measured joint velocities, rad/s.
pub const JOINT_VEL: f64 = 30.0;
/// Joint damping, N*m*s/rad.
pub const DAMPING: f64 = 2.0;
/// Rotor inertia, kg*m^2.
pub const ROTOR_INERTIA: f64 = 0.1;
/// Joint stiffness, N*m/rad.
pub const STIFFNESS: f64 = 50.0;
/// Joint dry-friction coefficient.
pub const FRICTION: f64 = 2.0;
/// Proportional PD gain.
pub const KP: f64 = 100.0;
/// Derivative PD gain.
pub const KD: f64 = 4.0;
/// Action scaling factor.
pub const ACTION_SCALE: f64 = 1.0;
/// Total robot mass, kg.
pub const MASS_KG: f64 = 100.0;
/// Body dimensions L, W, H, meters.
pub const DIMENSION_M: f64 = 2.0;

/// Trunk angular velocity, rad/s.
pub const ANG_VEL: f64 = 10.0;
/// Commanded velocities.
pub const COMMAND: f64 = 2.0;
/// Foot air timers, seconds.
pub const AIR_TIME_S: f64 = 2.0;
/// Previous actions (clipped to +-10 upstream).
pub const PREV_ACTION: f64 = 3.0;
/// Trunk linear velocity (privileged), m/s.
pub const LIN_VEL: f64 = 2.0;
/// Height above ground (privileged), meters.
pub const HEIGHT_M: f64 = 2.0;
