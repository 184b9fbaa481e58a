//! Procedural morphologies: the 16 stock robots (attribute rows with
//! synthesized limb layouts) and a seeded generator for arbitrarily
//! many surrogate robots of a given class.
//!
//! Limb layout convention used across the crate: with J joints and F
//! feet, each leg owns `min(J / F, 6)` consecutive joints (leg k starts
//! at `k * legn`), proximal first; any remaining joints are torso
//! joints. The surrogate dynamics use the same convention to group
//! joints into legs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::morphology::{
    BodyConfig, FootSpec, JointSpec, MorphologyClass, PdConfig, RobotSpec, Side,
};
use crate::reward::{coefficient_table, single_set, RewardCoefficients};

/// Joints per leg for a flat joint list.
pub fn joints_per_leg(joint_count: usize, foot_count: usize) -> usize {
    (joint_count / foot_count).clamp(1, 6)
}

fn feet_for_class(class: MorphologyClass) -> usize {
    match class {
        MorphologyClass::Quadruped => 4,
        MorphologyClass::Biped | MorphologyClass::Humanoid => 2,
        MorphologyClass::Hexapod => 6,
        MorphologyClass::Other => 4,
    }
}

struct SlotTemplate {
    suffix: &'static str,
    axis: [f64; 3],
    q_nominal: f64,
}

/// Joint layout within one leg, proximal to distal. Index 0..legn.
fn leg_slot(slot: usize, legn: usize, class: MorphologyClass) -> SlotTemplate {
    let upright = matches!(class, MorphologyClass::Biped | MorphologyClass::Humanoid);
    let (suffix, axis, q_nominal) = if legn == 1 {
        ("pitch", [0.0, 1.0, 0.0], 0.0)
    } else if legn == 2 {
        match slot {
            0 => ("hip_pitch", [0.0, 1.0, 0.0], if upright { -0.2 } else { 0.4 }),
            _ => ("knee", [0.0, 1.0, 0.0], if upright { 0.4 } else { -0.9 }),
        }
    } else {
        match slot {
            0 => ("hip_roll", [1.0, 0.0, 0.0], 0.0),
            1 => ("hip_pitch", [0.0, 1.0, 0.0], if upright { -0.2 } else { 0.4 }),
            2 => ("knee", [0.0, 1.0, 0.0], if upright { 0.4 } else { -0.9 }),
            3 => ("ankle_pitch", [0.0, 1.0, 0.0], if upright { -0.2 } else { 0.3 }),
            4 => ("ankle_roll", [1.0, 0.0, 0.0], 0.0),
            _ => ("toe", [0.0, 1.0, 0.0], 0.0),
        }
    };
    SlotTemplate {
        suffix,
        axis,
        q_nominal,
    }
}

/// Foot anchor points in the trunk frame, ordered to match the legs.
fn foot_layout(class: MorphologyClass, body: &BodyConfig) -> Vec<(String, [f64; 3], Side)> {
    let z = -0.9 * body.nominal_height;
    let hx = 0.45 * body.length;
    let hy = 0.5 * body.width;
    match class {
        MorphologyClass::Quadruped | MorphologyClass::Other => vec![
            ("FL_foot".into(), [hx, hy, z], Side::Left),
            ("FR_foot".into(), [hx, -hy, z], Side::Right),
            ("RL_foot".into(), [-hx, hy, z], Side::Left),
            ("RR_foot".into(), [-hx, -hy, z], Side::Right),
        ],
        MorphologyClass::Hexapod => vec![
            ("FL_foot".into(), [hx, hy, z], Side::Left),
            ("FR_foot".into(), [hx, -hy, z], Side::Right),
            ("ML_foot".into(), [0.0, hy, z], Side::Center),
            ("MR_foot".into(), [0.0, -hy, z], Side::Center),
            ("RL_foot".into(), [-hx, hy, z], Side::Left),
            ("RR_foot".into(), [-hx, -hy, z], Side::Right),
        ],
        MorphologyClass::Biped | MorphologyClass::Humanoid => vec![
            ("L_foot".into(), [0.0, 0.25 * body.width, z], Side::Left),
            ("R_foot".into(), [0.0, -0.25 * body.width, z], Side::Right),
        ],
    }
}

/// Physical joint attributes that vary per robot (and per joint for the
/// generator).
#[derive(Clone, Copy)]
struct JointAttrs {
    torque_limit: f64,
    velocity_limit: f64,
    damping: f64,
    rotor_inertia: f64,
    stiffness: f64,
    friction: f64,
    range_halfwidth: f64,
}

fn build_joints(
    class: MorphologyClass,
    joint_count: usize,
    feet: &[(String, [f64; 3], Side)],
    body: &BodyConfig,
    mut attrs: impl FnMut(usize) -> JointAttrs,
) -> Vec<JointSpec> {
    let foot_count = feet.len();
    let legn = joints_per_leg(joint_count, foot_count);
    let mut joints = Vec::with_capacity(joint_count);
    for (leg, (foot_name, foot_pos, _)) in feet.iter().enumerate() {
        for slot in 0..legn {
            let t = leg_slot(slot, legn, class);
            let a = attrs(leg * legn + slot);
            let frac = slot as f64 / legn as f64;
            let pos = [
                foot_pos[0],
                foot_pos[1],
                foot_pos[2] * frac,
            ];
            let leg_prefix = foot_name.trim_end_matches("_foot");
            joints.push(JointSpec {
                name: format!("{leg_prefix}_{}", t.suffix),
                position: pos,
                axis: t.axis,
                child_count: if slot + 1 < legn { 1 } else { 0 },
                q_nominal: t.q_nominal,
                torque_limit: a.torque_limit,
                velocity_limit: a.velocity_limit,
                damping: a.damping,
                rotor_inertia: a.rotor_inertia,
                stiffness: a.stiffness,
                friction: a.friction,
                control_min: t.q_nominal - a.range_halfwidth,
                control_max: t.q_nominal + a.range_halfwidth,
            });
        }
    }
    // leftover joints become torso joints (spines, arms)
    let torso_axes = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
    let mut torso_idx = 0;
    while joints.len() < joint_count {
        let a = attrs(joints.len());
        joints.push(JointSpec {
            name: format!("torso_{torso_idx}"),
            position: [
                0.1 * body.length * (torso_idx as f64 % 3.0 - 1.0),
                0.0,
                0.2 * body.height,
            ],
            axis: torso_axes[torso_idx % 3],
            child_count: if torso_idx == 0 { 2 } else { 1 },
            q_nominal: 0.0,
            torque_limit: a.torque_limit,
            velocity_limit: a.velocity_limit,
            damping: a.damping,
            rotor_inertia: a.rotor_inertia,
            stiffness: a.stiffness,
            friction: a.friction,
            control_min: -a.range_halfwidth,
            control_max: a.range_halfwidth,
        });
        torso_idx += 1;
    }
    joints
}

fn nominal_height(class: MorphologyClass, height: f64) -> f64 {
    match class {
        MorphologyClass::Biped | MorphologyClass::Humanoid => 0.95 * height,
        _ => 0.8 * height,
    }
}

/// Deterministically generate a surrogate robot. The same seed always
/// yields the identical spec; attributes are drawn inside the ranges
/// spanned by the stock fleet.
pub fn generate_surrogate_robot(
    seed: u64,
    class: MorphologyClass,
    joint_range: (usize, usize),
) -> RobotSpec {
    let (lo, hi) = joint_range;
    assert!(lo >= 1 && hi <= 24 && lo <= hi, "joint range {joint_range:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let foot_count = feet_for_class(class);

    let legn_lo = (lo.div_ceil(foot_count)).max(1);
    let legn_hi = (hi / foot_count).clamp(legn_lo, 6);
    let legn = rng.gen_range(legn_lo..=legn_hi);
    let joint_count = (foot_count * legn).clamp(lo.max(foot_count), hi.max(foot_count));

    let s: f64 = rng.gen_range(0.35..1.2);
    let upright = matches!(class, MorphologyClass::Biped | MorphologyClass::Humanoid);
    let body = {
        let (l, w, h) = if upright {
            (0.35 * s, 0.5 * s, 1.4 * s)
        } else {
            (
                0.8 * s * rng.gen_range(0.9..1.1),
                0.5 * s * rng.gen_range(0.9..1.1),
                0.55 * s * rng.gen_range(0.9..1.1),
            )
        };
        BodyConfig {
            mass: (55.0 * s.powi(3) * rng.gen_range(0.7..1.3)).clamp(0.2, 93.3),
            length: l,
            width: w,
            height: h,
            nominal_height: nominal_height(class, h),
        }
    };
    let kp = rng.gen_range(20.0..80.0);
    let pd = PdConfig {
        kp,
        kd: kp * rng.gen_range(0.02..0.03),
        action_scale: rng.gen_range(0.25..0.75),
    };

    let feet_layout = foot_layout(class, &body);
    let action_scale = pd.action_scale;
    let mut draws: Vec<JointAttrs> = Vec::with_capacity(joint_count);
    for _ in 0..joint_count {
        draws.push(JointAttrs {
            torque_limit: kp * action_scale * rng.gen_range(2.0..4.0) + 5.0,
            velocity_limit: rng.gen_range(10.0..25.0),
            damping: rng.gen_range(0.02..0.6),
            rotor_inertia: 0.0012 * kp * rng.gen_range(0.8..1.5) + rng.gen_range(0.002..0.01),
            stiffness: rng.gen_range(0.0..3.0),
            friction: rng.gen_range(0.01..0.25),
            range_halfwidth: rng.gen_range(1.0..1.8),
        });
    }
    let joints = build_joints(class, joint_count, &feet_layout, &body, |i| draws[i]);

    let feet = feet_layout
        .into_iter()
        .map(|(name, position, side)| FootSpec {
            name,
            position,
            side,
        })
        .collect();

    RobotSpec {
        name: format!("surrogate-{}-{seed}", class.as_str()),
        class,
        pd,
        body,
        joints,
        feet,
        reward_coefficients: single_set(),
    }
}

struct TableRow {
    name: &'static str,
    class: MorphologyClass,
    joints: usize,
    kp: f64,
    kd: f64,
    action_scale: f64,
    mass: f64,
    length: f64,
    width: f64,
    height: f64,
}

const TABLE: [TableRow; 16] = [
    TableRow { name: "ANYmal B", class: MorphologyClass::Quadruped, joints: 12, kp: 80.0, kd: 2.0, action_scale: 0.5, mass: 33.3, length: 1.21, width: 0.81, height: 1.37 },
    TableRow { name: "ANYmal C", class: MorphologyClass::Quadruped, joints: 12, kp: 80.0, kd: 2.0, action_scale: 0.5, mass: 45.0, length: 1.09, width: 0.88, height: 0.91 },
    TableRow { name: "Barkour v0", class: MorphologyClass::Quadruped, joints: 12, kp: 20.0, kd: 0.5, action_scale: 0.25, mass: 11.5, length: 0.70, width: 0.38, height: 0.45 },
    TableRow { name: "Barkour vB", class: MorphologyClass::Quadruped, joints: 12, kp: 30.0, kd: 0.5, action_scale: 0.25, mass: 11.5, length: 0.73, width: 0.48, height: 0.49 },
    TableRow { name: "Silver Badger", class: MorphologyClass::Quadruped, joints: 13, kp: 20.0, kd: 0.5, action_scale: 0.25, mass: 13.12, length: 0.78, width: 0.41, height: 0.52 },
    TableRow { name: "Bittle", class: MorphologyClass::Quadruped, joints: 8, kp: 25.0, kd: 0.5, action_scale: 0.6, mass: 0.2, length: 0.17, width: 0.12, height: 0.12 },
    TableRow { name: "A1", class: MorphologyClass::Quadruped, joints: 12, kp: 20.0, kd: 0.5, action_scale: 0.25, mass: 12.5, length: 0.67, width: 0.43, height: 0.48 },
    TableRow { name: "Go1", class: MorphologyClass::Quadruped, joints: 12, kp: 20.0, kd: 0.5, action_scale: 0.25, mass: 12.7, length: 0.70, width: 0.42, height: 0.48 },
    TableRow { name: "Go2", class: MorphologyClass::Quadruped, joints: 12, kp: 20.0, kd: 0.5, action_scale: 0.3, mass: 15.2, length: 0.75, width: 0.44, height: 0.48 },
    TableRow { name: "Cassie", class: MorphologyClass::Biped, joints: 10, kp: 70.0, kd: 2.0, action_scale: 0.6, mass: 33.3, length: 0.60, width: 0.60, height: 1.26 },
    TableRow { name: "Talos", class: MorphologyClass::Humanoid, joints: 24, kp: 80.0, kd: 2.0, action_scale: 0.75, mass: 93.3, length: 0.46, width: 1.10, height: 1.65 },
    TableRow { name: "OP3", class: MorphologyClass::Humanoid, joints: 20, kp: 21.0, kd: 0.5, action_scale: 0.6, mass: 3.1, length: 0.24, width: 0.28, height: 0.53 },
    TableRow { name: "Nao V5", class: MorphologyClass::Humanoid, joints: 22, kp: 30.0, kd: 0.5, action_scale: 0.6, mass: 5.3, length: 0.17, width: 0.43, height: 0.59 },
    TableRow { name: "G1", class: MorphologyClass::Humanoid, joints: 23, kp: 45.0, kd: 1.0, action_scale: 0.5, mass: 32.2, length: 0.29, width: 0.55, height: 1.26 },
    TableRow { name: "H1", class: MorphologyClass::Humanoid, joints: 19, kp: 60.0, kd: 2.0, action_scale: 0.75, mass: 51.4, length: 0.55, width: 0.83, height: 1.77 },
    TableRow { name: "Hexapod", class: MorphologyClass::Hexapod, joints: 18, kp: 30.0, kd: 0.5, action_scale: 0.6, mass: 1.9, length: 0.43, width: 0.56, height: 0.24 },
];

pub fn table_robot_names() -> Vec<&'static str> {
    TABLE.iter().map(|r| r.name).collect()
}

/// Build one of the 16 stock robots. Attribute rows are exact; limb
/// layouts and per-joint physical constants are synthesized with the
/// shared convention above.
pub fn table_robot(name: &str) -> Option<RobotSpec> {
    let row = TABLE.iter().find(|r| r.name == name)?;
    let body = BodyConfig {
        mass: row.mass,
        length: row.length,
        width: row.width,
        height: row.height,
        nominal_height: nominal_height(row.class, row.height),
    };
    let feet_layout = foot_layout(row.class, &body);
    let attrs = JointAttrs {
        torque_limit: 3.0 * row.kp * row.action_scale + 10.0,
        velocity_limit: 16.0,
        damping: 0.1,
        rotor_inertia: (0.0012 * row.kp).max(0.02),
        stiffness: 0.0,
        friction: 0.05,
        range_halfwidth: 1.6,
    };
    let joints = build_joints(row.class, row.joints, &feet_layout, &body, |_| attrs);
    let feet = feet_layout
        .into_iter()
        .map(|(name, position, side)| FootSpec {
            name,
            position,
            side,
        })
        .collect();
    let coefficients: RewardCoefficients =
        coefficient_table(row.name).expect("every table robot has a coefficient row");
    Some(RobotSpec {
        name: row.name.to_string(),
        class: row.class,
        pd: PdConfig {
            kp: row.kp,
            kd: row.kd,
            action_scale: row.action_scale,
        },
        body,
        joints,
        feet,
        reward_coefficients: coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a1_matches_the_attribute_row() {
        let a1 = table_robot("A1").unwrap();
        assert_eq!(a1.joint_count(), 12);
        assert_eq!(a1.pd.kp, 20.0);
        assert_eq!(a1.pd.kd, 0.5);
        assert_eq!(a1.pd.action_scale, 0.25);
        assert_eq!(a1.body.mass, 12.5);
        assert_eq!(a1.body.length, 0.67);
        assert_eq!(a1.body.width, 0.43);
        assert_eq!(a1.body.height, 0.48);
        a1.validate().unwrap();
    }

    #[test]
    fn hexapod_matches_the_attribute_row() {
        let hexapod = table_robot("Hexapod").unwrap();
        assert_eq!(hexapod.joint_count(), 18);
        assert_eq!(hexapod.foot_count(), 6);
        assert_eq!(hexapod.pd.kp, 30.0);
        assert_eq!(hexapod.pd.action_scale, 0.6);
        assert_eq!(hexapod.body.mass, 1.9);
        hexapod.validate().unwrap();
    }

    #[test]
    fn all_sixteen_validate() {
        for name in table_robot_names() {
            let robot = table_robot(name).unwrap();
            robot.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert_eq!(table_robot_names().len(), 16);
    }

    #[test]
    fn silver_badger_has_a_spine_joint() {
        let sb = table_robot("Silver Badger").unwrap();
        assert_eq!(sb.joint_count(), 13);
        assert!(sb.joints.iter().any(|j| j.name.starts_with("torso")));
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let a = generate_surrogate_robot(9, MorphologyClass::Quadruped, (8, 16));
        let b = generate_surrogate_robot(9, MorphologyClass::Quadruped, (8, 16));
        assert_eq!(a, b);
        let c = generate_surrogate_robot(10, MorphologyClass::Quadruped, (8, 16));
        assert_ne!(a, c);
    }

    #[test]
    fn generated_quadrupeds_have_four_feet_and_symmetric_legs() {
        for seed in 0..20 {
            let robot = generate_surrogate_robot(seed, MorphologyClass::Quadruped, (8, 16));
            assert_eq!(robot.foot_count(), 4);
            assert_eq!(robot.joint_count() % 4, 0, "seed {seed}");
        }
    }

    #[test]
    fn hundred_generated_specs_pass_the_validator() {
        let classes = [
            MorphologyClass::Quadruped,
            MorphologyClass::Biped,
            MorphologyClass::Humanoid,
            MorphologyClass::Hexapod,
        ];
        for seed in 0..100u64 {
            let class = classes[seed as usize % classes.len()];
            let robot = generate_surrogate_robot(seed, class, (4, 24));
            robot
                .validate()
                .unwrap_or_else(|e| panic!("seed {seed} {class:?}: {e}"));
        }
    }
}
