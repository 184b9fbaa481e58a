//! Observation assembly: normalize by the global scale table, attach
//! the active description vectors, add per-group noise, apply dropout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{EnvConfig, EnvState, NoiseScales};
use crate::morphology::{build_foot_description, build_joint_description};
use crate::scales;

/// Width of the per-joint observation block: q, qd, previous action.
pub const JOINT_OBS_LEN: usize = 3;
/// Width of the per-foot observation block: contact flag, air timer.
pub const FOOT_OBS_LEN: usize = 2;
/// General observations: angular velocity (3), command (3), gravity
/// direction (3), kp, kd, action scale, mass, length, width, height.
pub const GENERAL_OBS_LEN: usize = 16;
/// Privileged critic extras: trunk linear velocity (3) and height.
pub const PRIVILEGED_OBS_LEN: usize = 4;

/// One step's observations for one robot, already normalized. Joint and
/// foot blocks are flat row-major (`J x width`). Descriptions snapshot
/// the randomization draw that produced this observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBundle {
    pub joints: usize,
    pub feet: usize,
    pub joint_obs: Vec<f64>,
    pub foot_obs: Vec<f64>,
    pub general: Vec<f64>,
    /// Consumed only by the critic.
    pub privileged: Vec<f64>,
    pub joint_desc: Vec<f64>,
    pub foot_desc: Vec<f64>,
}

impl ObservationBundle {
    /// Zero the whole feet observation group (the sensor-dropout
    /// evaluation). Descriptions are left intact.
    pub fn drop_feet(&mut self) {
        for v in &mut self.foot_obs {
            *v = 0.0;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.joint_obs
            .iter()
            .chain(&self.foot_obs)
            .chain(&self.general)
            .chain(&self.privileged)
            .chain(&self.joint_desc)
            .chain(&self.foot_desc)
            .all(|v| v.is_finite())
    }
}

/// Gravity direction in the trunk frame from pitch and roll; level
/// pose gives (0, 0, -1).
pub fn gravity_in_trunk(pitch: f64, roll: f64) -> [f64; 3] {
    [
        pitch.sin(),
        -roll.sin() * pitch.cos(),
        -pitch.cos() * roll.cos(),
    ]
}

pub(super) fn assemble(
    state: &EnvState,
    config: &EnvConfig,
    noise: NoiseScales,
    rng: &mut ChaCha8Rng,
) -> ObservationBundle {
    let robot = &state.active;
    let nj = robot.joints.len();
    let nf = robot.feet.len();

    let mut draw = |scale: f64| -> f64 {
        if scale > 0.0 {
            scale * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    };

    let mut joint_obs = Vec::with_capacity(nj * JOINT_OBS_LEN);
    for j in 0..nj {
        joint_obs.push(state.q[j] / scales::ANGLE_RAD + draw(noise.joints));
        joint_obs.push(state.qd[j] / scales::JOINT_VEL + draw(noise.joints));
        joint_obs.push(state.prev_action[j] / scales::PREV_ACTION);
    }

    let mut foot_obs = Vec::with_capacity(nf * FOOT_OBS_LEN);
    for f in 0..nf {
        foot_obs.push(if state.contact[f] { 1.0 } else { 0.0 });
        foot_obs.push(state.air_time[f] / scales::AIR_TIME_S + draw(noise.feet));
    }

    let gravity = gravity_in_trunk(state.pitch, state.roll);
    let mut general = Vec::with_capacity(GENERAL_OBS_LEN);
    for w in state.omega {
        general.push(w / scales::ANG_VEL + draw(noise.ang_vel));
    }
    for c in state.command {
        general.push(c / scales::COMMAND);
    }
    for g in gravity {
        general.push(g + draw(noise.gravity));
    }
    general.push(robot.pd.kp / scales::KP);
    general.push(robot.pd.kd / scales::KD);
    general.push(robot.pd.action_scale / scales::ACTION_SCALE);
    general.push(robot.body.mass / scales::MASS_KG);
    general.push(robot.body.length / scales::DIMENSION_M);
    general.push(robot.body.width / scales::DIMENSION_M);
    general.push(robot.body.height / scales::DIMENSION_M);
    debug_assert_eq!(general.len(), GENERAL_OBS_LEN);

    let privileged = vec![
        state.v[0] / scales::LIN_VEL,
        state.v[1] / scales::LIN_VEL,
        state.v[2] / scales::LIN_VEL,
        state.height / scales::HEIGHT_M,
    ];

    let mut joint_desc = Vec::with_capacity(nj * crate::morphology::JOINT_DESC_LEN);
    for j in 0..nj {
        joint_desc.extend_from_slice(build_joint_description(robot, j).as_slice());
    }
    let mut foot_desc = Vec::with_capacity(nf * crate::morphology::FOOT_DESC_LEN);
    for f in 0..nf {
        foot_desc.extend_from_slice(build_foot_description(robot, f).as_slice());
    }

    // independent per-entry dropout on the policy observations
    if config.dropout_prob > 0.0 {
        let p = config.dropout_prob.min(1.0);
        for group in [&mut joint_obs, &mut foot_obs, &mut general] {
            for v in group.iter_mut() {
                if rng.gen_bool(p) {
                    *v = 0.0;
                }
            }
        }
    }

    let mut bundle = ObservationBundle {
        joints: nj,
        feet: nf,
        joint_obs,
        foot_obs,
        general,
        privileged,
        joint_desc,
        foot_desc,
    };
    if config.drop_feet_group {
        bundle.drop_feet();
    }
    bundle
}
