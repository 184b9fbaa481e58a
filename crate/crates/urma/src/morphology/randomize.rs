//! Domain randomization over robot attributes. Each draw perturbs a
//! copy of the base spec; the policy observes the perturbed values
//! through freshly built description vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::morphology::RobotSpec;

/// Half-widths of the randomization intervals. Fractions are
/// multiplicative (`x * U[1-f, 1+f]`), the nominal-position jitter is
/// additive in radians. All zeros is the identity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DrRanges {
    pub mass_frac: f64,
    pub gain_frac: f64,
    pub limit_frac: f64,
    pub joint_frac: f64,
    pub control_range_frac: f64,
    pub q_nominal_jitter: f64,
}

impl Default for DrRanges {
    fn default() -> Self {
        Self {
            mass_frac: 0.2,
            gain_frac: 0.2,
            limit_frac: 0.2,
            joint_frac: 0.2,
            control_range_frac: 0.2,
            q_nominal_jitter: 0.05,
        }
    }
}

impl DrRanges {
    pub fn zero() -> Self {
        Self {
            mass_frac: 0.0,
            gain_frac: 0.0,
            limit_frac: 0.0,
            joint_frac: 0.0,
            control_range_frac: 0.0,
            q_nominal_jitter: 0.0,
        }
    }
}

fn mult(rng: &mut ChaCha8Rng, frac: f64) -> f64 {
    1.0 + frac * rng.gen_range(-1.0..1.0)
}

/// Draw a perturbed copy of `base`. The draw order is fixed so a given
/// RNG state always produces the same spec.
pub fn randomize_robot(base: &RobotSpec, rng: &mut ChaCha8Rng, ranges: &DrRanges) -> RobotSpec {
    let mut spec = base.clone();
    spec.body.mass *= mult(rng, ranges.mass_frac);
    spec.pd.kp *= mult(rng, ranges.gain_frac);
    spec.pd.kd *= mult(rng, ranges.gain_frac);
    spec.pd.action_scale *= mult(rng, ranges.gain_frac);
    for joint in &mut spec.joints {
        joint.torque_limit *= mult(rng, ranges.limit_frac);
        joint.velocity_limit *= mult(rng, ranges.limit_frac);
        joint.damping *= mult(rng, ranges.joint_frac);
        joint.rotor_inertia *= mult(rng, ranges.joint_frac);
        joint.stiffness *= mult(rng, ranges.joint_frac);
        joint.friction *= mult(rng, ranges.joint_frac);
        // shrink or stretch each endpoint's distance from the nominal
        // position so the range never inverts and still contains it
        let lo_span = joint.q_nominal - joint.control_min;
        let hi_span = joint.control_max - joint.q_nominal;
        joint.control_min = joint.q_nominal - lo_span * mult(rng, ranges.control_range_frac);
        joint.control_max = joint.q_nominal + hi_span * mult(rng, ranges.control_range_frac);
        let jitter = ranges.q_nominal_jitter * rng.gen_range(-1.0..1.0);
        joint.q_nominal = (joint.q_nominal + jitter)
            .clamp(joint.control_min, joint.control_max);
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::table_robot;
    use rand::SeedableRng;

    #[test]
    fn zero_ranges_are_the_identity() {
        let base = table_robot("A1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let drawn = randomize_robot(&base, &mut rng, &DrRanges::zero());
        assert_eq!(base, drawn);
    }

    #[test]
    fn mass_draws_stay_inside_twenty_percent() {
        let base = table_robot("A1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ranges = DrRanges::default();
        for _ in 0..1000 {
            let drawn = randomize_robot(&base, &mut rng, &ranges);
            assert!(drawn.body.mass >= 0.8 * base.body.mass);
            assert!(drawn.body.mass <= 1.2 * base.body.mass);
        }
    }

    #[test]
    fn control_ranges_never_invert_and_specs_stay_valid() {
        let base = table_robot("Talos").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ranges = DrRanges::default();
        for _ in 0..500 {
            let drawn = randomize_robot(&base, &mut rng, &ranges);
            for j in &drawn.joints {
                assert!(j.control_min < j.control_max);
            }
            drawn.validate().unwrap();
        }
    }
}
