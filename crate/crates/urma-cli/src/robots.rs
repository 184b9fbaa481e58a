//! Resolving robot fleets from command-line selections.

use urma::morphology::{
    generate_surrogate_robot, load_robot_spec, table_robot, MorphologyClass, RobotSpec,
};
use urma::reward::single_set;

use crate::{CliError, RobotSelect};

pub fn parse_class(s: &str) -> Result<MorphologyClass, CliError> {
    Ok(match s {
        "quadruped" => MorphologyClass::Quadruped,
        "biped" => MorphologyClass::Biped,
        "humanoid" => MorphologyClass::Humanoid,
        "hexapod" => MorphologyClass::Hexapod,
        "other" => MorphologyClass::Other,
        other => {
            return Err(CliError::Validation(format!(
                "unknown morphology class {other:?}"
            )))
        }
    })
}

pub fn parse_joint_range(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Validation(format!("joint range must be lo:hi, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.parse().map_err(|_| bad())?;
    let hi: usize = hi.parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo || hi > 24 {
        return Err(CliError::Validation(format!(
            "joint range {lo}:{hi} outside the supported [1, 24]"
        )));
    }
    Ok((lo, hi))
}

/// Materialize the selected fleet in a deterministic order: spec files,
/// then stock robots, then generated surrogates.
pub fn resolve_fleet(
    select: &RobotSelect,
    single_reward_set: bool,
) -> Result<Vec<RobotSpec>, CliError> {
    let mut fleet = Vec::new();
    for path in &select.robot_files {
        let spec =
            load_robot_spec(path).map_err(|e| CliError::Validation(e.to_string()))?;
        fleet.push(spec);
    }
    for name in &select.table_robots {
        let spec = table_robot(name).ok_or_else(|| {
            CliError::Validation(format!("unknown stock robot {name:?}"))
        })?;
        fleet.push(spec);
    }
    let joint_range = parse_joint_range(&select.gen_joints)?;
    for spec in &select.gen_robots {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(CliError::Validation(format!(
                "--gen-robots expects class:count[:base_seed], got {spec:?}"
            )));
        }
        let class = parse_class(parts[0])?;
        let count: u64 = parts[1]
            .parse()
            .map_err(|_| CliError::Validation(format!("bad count in {spec:?}")))?;
        let base_seed: u64 = if parts.len() == 3 {
            parts[2]
                .parse()
                .map_err(|_| CliError::Validation(format!("bad seed in {spec:?}")))?
        } else {
            0
        };
        for k in 0..count {
            fleet.push(generate_surrogate_robot(base_seed + k, class, joint_range));
        }
    }
    if fleet.is_empty() {
        return Err(CliError::Validation(
            "no robots selected: use --robot, --table-robot, or --gen-robots".into(),
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for robot in &fleet {
        if !seen.insert(robot.name.clone()) {
            return Err(CliError::Validation(format!(
                "duplicate robot name {:?} in the fleet",
                robot.name
            )));
        }
    }
    if single_reward_set {
        for robot in &mut fleet {
            robot.reward_coefficients = single_set();
        }
    }
    Ok(fleet)
}

pub use parse_class as class_from_str;
