//! The 14-term locomotion reward: two exponential command-tracking
//! terms plus twelve gait-shaping penalties, each scaled by a per-robot
//! coefficient, penalties ramped in linearly over a fixed curriculum
//! length, and the weighted sum clipped to be non-negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvState;
use crate::morphology::{RobotSpec, Side};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("no reward coefficients registered for robot {0:?} (single-set mode is off)")]
    UnknownRobot(String),
    #[error("reward coefficients invalid: {0}")]
    Invalid(String),
    #[error("action arity {actual} does not match the robot's {expected} joints")]
    ArityMismatch { expected: usize, actual: usize },
}

/// Per-robot weights for the 14 reward terms plus the curriculum length
/// in environment steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCoefficients {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t5: f64,
    pub t6: f64,
    pub t7: f64,
    pub t8: f64,
    pub t9: f64,
    pub t10: f64,
    pub t11: f64,
    pub t12: f64,
    pub t13: f64,
    pub t14: f64,
    pub curriculum_steps: f64,
}

impl RewardCoefficients {
    pub fn as_array(&self) -> [f64; 14] {
        [
            self.t1, self.t2, self.t3, self.t4, self.t5, self.t6, self.t7, self.t8, self.t9,
            self.t10, self.t11, self.t12, self.t13, self.t14,
        ]
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let arr = self.as_array();
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(RewardError::Invalid(
                "tracking coefficients t1 and t2 must be positive".into(),
            ));
        }
        for (i, v) in arr.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(RewardError::Invalid(format!(
                    "t{} must be finite and non-negative, got {v}",
                    i + 1
                )));
            }
        }
        if !(self.curriculum_steps > 0.0) {
            return Err(RewardError::Invalid(format!(
                "curriculum_steps must be positive, got {}",
                self.curriculum_steps
            )));
        }
        Ok(())
    }
}

/// Raw term values, their curriculum-scaled weighted values, and the
/// clipped total for one transition.
#[derive(Debug, Clone)]
pub struct RewardBreakdown {
    pub raw: [f64; 14],
    pub weighted: [f64; 14],
    pub total: f64,
}

impl RewardBreakdown {
    /// Weighted tracking reward (terms 1 and 2) for this step; the
    /// tracking-share diagnostic divides this by `t1 + t2`.
    pub fn tracking_weighted(&self) -> f64 {
        self.weighted[0] + self.weighted[1]
    }
}

/// Linear penalty ramp: `min(t/T, 1) * r_final`.
pub fn curriculum_coefficient(t: u64, curriculum_steps: f64, r_final: f64) -> f64 {
    debug_assert!(curriculum_steps > 0.0);
    (t as f64 / curriculum_steps).min(1.0) * r_final
}

/// Indices of the 90%-interior of a control range used by the
/// joint-limit penalty: a joint is penalized while outside
/// `[min + 0.05 range, max - 0.05 range]`.
fn outside_soft_limits(q: f64, min: f64, max: f64) -> bool {
    let margin = 0.05 * (max - min);
    q < min + margin || q > max - margin
}

/// Evaluate the full reward table for one transition.
///
/// `robot` is the active (possibly randomized) spec so nominal
/// positions and control ranges match what the policy observed;
/// coefficients always come from the same spec. `global_step` drives
/// the penalty curriculum; tracking terms are never ramped. `dt` is the
/// control period used for the finite-difference accelerations.
pub fn compute_reward(
    prev: &EnvState,
    next: &EnvState,
    action: &[f64],
    prev_action: &[f64],
    robot: &RobotSpec,
    global_step: u64,
    dt: f64,
) -> Result<RewardBreakdown, RewardError> {
    let nj = robot.joints.len();
    if action.len() != nj || prev_action.len() != nj || next.q.len() != nj {
        return Err(RewardError::ArityMismatch {
            expected: nj,
            actual: action.len(),
        });
    }

    let c = &next.command;
    let vxy_err = (next.v[0] - c[0]).powi(2) + (next.v[1] - c[1]).powi(2);
    let t1 = (-vxy_err / 0.25).exp();
    let t2 = (-(next.omega[2] - c[2]).powi(2) / 0.25).exp();
    let t3 = -next.v[2].powi(2);
    let t4 = -(next.omega[0].powi(2) + next.omega[1].powi(2));
    let t5 = -(next.pitch.powi(2) + next.roll.powi(2));

    let mut t6 = 0.0;
    let mut t7 = 0.0;
    let mut t8 = 0.0;
    let mut t9 = 0.0;
    let mut t10 = 0.0;
    for j in 0..nj {
        let spec = &robot.joints[j];
        t6 -= (next.q[j] - spec.q_nominal).powi(2);
        if outside_soft_limits(next.q[j], spec.control_min, spec.control_max) {
            t7 -= 1.0;
        }
        t8 -= ((next.qd[j] - prev.qd[j]) / dt).powi(2);
        t9 -= next.applied_torque[j].powi(2);
        t10 -= ((action[j] - prev_action[j]) / dt).powi(2);
    }

    let t11 = -(next.height - robot.body.nominal_height).powi(2);
    let t12 = -(next.fall_event as u8 as f64);

    let mut t13 = 0.0;
    for f in 0..robot.feet.len() {
        if next.contact[f] {
            t13 -= next.air_time[f] - 0.5;
        }
    }

    // pair the k-th left foot with the k-th right foot; center feet and
    // unpaired feet contribute nothing
    let mut t14 = 0.0;
    let lefts: Vec<usize> = (0..robot.feet.len())
        .filter(|&f| robot.feet[f].side == Side::Left)
        .collect();
    let rights: Vec<usize> = (0..robot.feet.len())
        .filter(|&f| robot.feet[f].side == Side::Right)
        .collect();
    for (l, r) in lefts.iter().zip(rights.iter()) {
        if !next.contact[*l] && !next.contact[*r] {
            t14 -= 1.0;
        }
    }

    let raw = [t1, t2, t3, t4, t5, t6, t7, t8, t9, t10, t11, t12, t13, t14];
    let coefs = robot.reward_coefficients.as_array();
    let curriculum = &robot.reward_coefficients;
    let mut weighted = [0.0; 14];
    for (i, w) in weighted.iter_mut().enumerate() {
        let c_eff = if i < 2 {
            coefs[i]
        } else {
            curriculum_coefficient(global_step, curriculum.curriculum_steps, coefs[i])
        };
        *w = c_eff * raw[i];
    }
    let total = weighted.iter().sum::<f64>().max(0.0);
    Ok(RewardBreakdown {
        raw,
        weighted,
        total,
    })
}

/// Coefficient registry for the 16 stock robots.
pub fn coefficient_table(robot_name: &str) -> Option<RewardCoefficients> {
    let row = |t1: f64, t2: f64, t6: f64, t8: f64, t9: f64, t10: f64, steps: f64| {
        RewardCoefficients {
            t1,
            t2,
            t3: 2.0,
            t4: 0.05,
            t5: 0.2,
            t6,
            t7: 10.0,
            t8,
            t9,
            t10,
            t11: 30.0,
            t12: 1.0,
            t13: 0.1,
            t14: 0.5,
            curriculum_steps: steps,
        }
    };
    let row4 = |t1: f64, t2: f64, t4: f64, t6: f64, t8: f64, t9: f64, t10: f64, steps: f64| {
        let mut c = row(t1, t2, t6, t8, t9, t10, steps);
        c.t4 = t4;
        c
    };
    Some(match robot_name {
        "ANYmal B" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 20e6),
        "ANYmal C" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 20e6),
        "Barkour v0" => row(3.0, 1.5, 0.0, 2.5e-7, 2e-4, 0.01, 15e6),
        "Barkour vB" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 15e6),
        "Silver Badger" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 12e6),
        "Bittle" => row(5.0, 2.5, 0.0, 2.5e-7, 2e-4, 0.01, 40e6),
        "A1" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 12e6),
        "Go1" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 12e6),
        "Go2" => row(2.0, 1.0, 0.0, 2.5e-7, 2e-4, 0.01, 12e6),
        "Cassie" => row(3.0, 1.5, 0.0, 2.5e-7, 2e-5, 0.01, 50e6),
        "Talos" => row(4.0, 2.0, 0.2, 2.5e-7, 2e-5, 0.01, 80e6),
        "OP3" => row4(4.0, 2.0, 0.1, 0.4, 1.2e-6, 4e-4, 6e-3, 40e6),
        "Nao V5" => row4(4.0, 2.0, 0.1, 0.15, 1.2e-6, 4e-4, 6e-3, 40e6),
        "G1" => row(3.0, 1.5, 0.2, 2.5e-7, 5e-5, 0.01, 50e6),
        "H1" => row(2.0, 1.0, 0.2, 2.5e-7, 2e-5, 0.01, 50e6),
        "Hexapod" => row(4.0, 2.0, 0.0, 2.5e-7, 2e-4, 0.01, 15e6),
        _ => return None,
    })
}

/// The conservative single set usable for every robot: high tracking
/// weights, low penalties, long curriculum.
pub fn single_set() -> RewardCoefficients {
    RewardCoefficients {
        t1: 5.0,
        t2: 2.5,
        t3: 2.0,
        t4: 0.05,
        t5: 0.2,
        t6: 0.2,
        t7: 10.0,
        t8: 2.5e-7,
        t9: 2e-5,
        t10: 6e-3,
        t11: 30.0,
        t12: 1.0,
        t13: 0.1,
        t14: 0.5,
        curriculum_steps: 80e6,
    }
}

/// Look a robot's coefficients up by name, falling back to the single
/// conservative set when `use_single_set` is on.
pub fn load_coefficients(
    robot_name: &str,
    use_single_set: bool,
) -> Result<RewardCoefficients, RewardError> {
    if use_single_set {
        return Ok(single_set());
    }
    coefficient_table(robot_name).ok_or_else(|| RewardError::UnknownRobot(robot_name.to_string()))
}
