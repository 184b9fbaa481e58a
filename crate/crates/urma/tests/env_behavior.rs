//! Behavioral oracles for the surrogate dynamics: a hand-scripted
//! trot must move the trunk forward, and incoherent motion must not.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urma::env::{Env, EnvConfig};
use urma::morphology::{generate_surrogate_robot, joints_per_leg, MorphologyClass};

/// Sinusoidal trot script: diagonal pairs alternate stance and swing;
/// the stance pair sweeps its hips backward while the swing pair lifts
/// its distal joints and returns forward.
fn trot_action(robot: &urma::morphology::RobotSpec, step: usize, period: f64) -> Vec<f64> {
    let nj = robot.joints.len();
    let nf = robot.feet.len();
    let legn = joints_per_leg(nj, nf);
    let sweep_count = legn.div_ceil(2);
    let omega = std::f64::consts::TAU / period;
    let t = step as f64;
    let mut action = vec![0.0; nj];
    for leg in 0..nf {
        // diagonal pairing for 4 feet laid out FL, FR, RL, RR
        let phase_offset = if leg == 0 || leg == 3 {
            0.0
        } else {
            std::f64::consts::PI
        };
        let phase = omega * t + phase_offset;
        for slot in 0..legn {
            let j = leg * legn + slot;
            if j >= nj {
                break;
            }
            let joint = &robot.joints[j];
            if slot < sweep_count {
                if joint.axis[1].abs() > 0.5 {
                    // pitch-axis sweep: cosine target, so the backward
                    // stroke lines up with the stance window
                    action[j] = 1.2 * phase.cos();
                }
            } else {
                // distal lift only during the swing half
                action[j] = 2.2 * (-phase.sin()).max(0.0);
            }
        }
    }
    action
}

#[test]
fn scripted_diagonal_trot_walks_forward() {
    let robot = generate_surrogate_robot(21, MorphologyClass::Quadruped, (12, 12));
    let mut env = Env::new(
        robot.clone(),
        EnvConfig::deterministic(),
        ChaCha8Rng::seed_from_u64(0),
    );
    env.reset();
    let mut v_sum = 0.0;
    let mut steps = 0.0;
    let mut toggles = 0usize;
    let mut last_contact = env.state().contact.clone();
    for step in 0..400 {
        let action = trot_action(&robot, step, 30.0);
        let (_, outcome) = env.step(&action).unwrap();
        assert!(!outcome.terminal, "trot fell at step {step}");
        if step >= 60 {
            v_sum += env.state().v[0];
            steps += 1.0;
        }
        for (a, b) in last_contact.iter().zip(env.state().contact.iter()) {
            if a != b {
                toggles += 1;
            }
        }
        last_contact = env.state().contact.clone();
        if outcome.done {
            break;
        }
    }
    let v_mean = v_sum / steps;
    assert!(toggles > 20, "contacts never alternated (toggles = {toggles})");
    assert!(
        v_mean > 0.05,
        "coordinated trot should move forward, got mean vx = {v_mean}"
    );
}

#[test]
fn incoherent_motion_goes_nowhere() {
    let robot = generate_surrogate_robot(21, MorphologyClass::Quadruped, (12, 12));
    let mut env = Env::new(
        robot,
        EnvConfig::deterministic(),
        ChaCha8Rng::seed_from_u64(0),
    );
    env.reset();
    let nj = env.state().q.len();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut v_sum = 0.0;
    let mut steps = 0.0;
    for _ in 0..2000 {
        let action: Vec<f64> = (0..nj).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let (_, outcome) = env.step(&action).unwrap();
        v_sum += env.state().v[0];
        steps += 1.0;
        if outcome.done {
            env.reset();
        }
    }
    // jitter is fine; sustained directed transport is not
    let drift = (v_sum / steps).abs();
    assert!(
        drift < 0.1,
        "incoherent motion should not produce net transport, got mean vx = {drift}"
    );
}
