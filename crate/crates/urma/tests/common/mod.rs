#![allow(dead_code)]
//! Oracles shared by the integration tests: a straight-line evaluation
//! of the reward table and a brute-force advantage estimator, both
//! written directly against the defining formulas and sharing nothing
//! with the library implementations they check.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use urma::env::EnvState;
use urma::morphology::{RobotSpec, Side};

pub const DT: f64 = 0.02;

/// Structurally valid random state pair plus actions.
pub fn random_states(
    robot: &RobotSpec,
    rng: &mut ChaCha8Rng,
) -> (EnvState, EnvState, Vec<f64>, Vec<f64>) {
    let nj = robot.joint_count();
    let nf = robot.foot_count();
    let mut rand_state = |step: usize| EnvState {
        q: (0..nj).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        qd: (0..nj).map(|_| rng.gen_range(-8.0..8.0)).collect(),
        v: [
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-0.5..0.5),
        ],
        pitch: rng.gen_range(-0.6..0.6),
        roll: rng.gen_range(-0.6..0.6),
        omega: [
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ],
        height: rng.gen_range(0.05..1.5),
        contact: (0..nf).map(|_| rng.gen_bool(0.6)).collect(),
        air_time: (0..nf).map(|_| rng.gen_range(0.0..1.5)).collect(),
        leg_phase: vec![0.0; nf],
        command: [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ],
        step_index: step,
        prev_action: (0..nj).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        applied_torque: (0..nj).map(|_| rng.gen_range(-30.0..30.0)).collect(),
        fall_event: false,
        active: robot.clone(),
    };
    let state = rand_state(0);
    let mut next = rand_state(1);
    next.command = state.command;
    next.fall_event = rng.gen_bool(0.1);
    let action: Vec<f64> = (0..nj).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let prev_action = state.prev_action.clone();
    (state, next, action, prev_action)
}

/// Straight-line re-derivation of the 14-term reward table.
pub fn straightline_reward(
    prev: &EnvState,
    next: &EnvState,
    action: &[f64],
    prev_action: &[f64],
    robot: &RobotSpec,
    t: u64,
) -> ([f64; 14], f64) {
    let c = robot.reward_coefficients.as_array();
    let big_t = robot.reward_coefficients.curriculum_steps;
    let cmd = next.command;

    let mut raw = [0.0f64; 14];
    raw[0] = (-((next.v[0] - cmd[0]).powi(2) + (next.v[1] - cmd[1]).powi(2)) / 0.25).exp();
    raw[1] = (-(next.omega[2] - cmd[2]).powi(2) / 0.25).exp();
    raw[2] = -next.v[2] * next.v[2];
    raw[3] = -(next.omega[0] * next.omega[0] + next.omega[1] * next.omega[1]);
    raw[4] = -(next.pitch * next.pitch + next.roll * next.roll);
    for (j, joint) in robot.joints.iter().enumerate() {
        raw[5] -= (next.q[j] - joint.q_nominal) * (next.q[j] - joint.q_nominal);
        let range = joint.control_max - joint.control_min;
        let lo = joint.control_min + 0.05 * range;
        let hi = joint.control_max - 0.05 * range;
        if !(next.q[j] > lo && next.q[j] < hi) {
            raw[6] -= 1.0;
        }
        let qdd = (next.qd[j] - prev.qd[j]) / DT;
        raw[7] -= qdd * qdd;
        raw[8] -= next.applied_torque[j] * next.applied_torque[j];
        let adot = (action[j] - prev_action[j]) / DT;
        raw[9] -= adot * adot;
    }
    raw[10] = -(next.height - robot.body.nominal_height)
        * (next.height - robot.body.nominal_height);
    raw[11] = if next.fall_event { -1.0 } else { 0.0 };
    for f in 0..robot.foot_count() {
        if next.contact[f] {
            raw[12] -= next.air_time[f] - 0.5;
        }
    }
    let lefts: Vec<usize> = (0..robot.foot_count())
        .filter(|&f| robot.feet[f].side == Side::Left)
        .collect();
    let rights: Vec<usize> = (0..robot.foot_count())
        .filter(|&f| robot.feet[f].side == Side::Right)
        .collect();
    for (l, r) in lefts.iter().zip(rights.iter()) {
        if !next.contact[*l] && !next.contact[*r] {
            raw[13] -= 1.0;
        }
    }

    let ramp = (t as f64 / big_t).min(1.0);
    let mut total = 0.0;
    for i in 0..14 {
        let w = if i < 2 { c[i] } else { ramp * c[i] };
        total += w * raw[i];
    }
    (raw, total.max(0.0))
}

/// Brute-force evaluation of the exponentially weighted sum of TD
/// residuals, stopping at episode boundaries.
pub fn brute_force_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| -> f64 {
        if dones[t] {
            0.0
        } else if t == n - 1 {
            bootstrap
        } else {
            values[t + 1]
        }
    };
    (0..n)
        .map(|t| {
            let mut acc = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                let delta = rewards[k] + gamma * next_value(k) - values[k];
                acc += weight * delta;
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            acc
        })
        .collect()
}
