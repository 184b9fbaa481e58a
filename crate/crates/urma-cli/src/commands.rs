//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use urma::env::EnvConfig;
use urma::morphology::{generate_surrogate_robot, save_robot_spec, table_robot, table_robot_names, RobotSpec};
use urma::policy::{
    load_checkpoint, save_checkpoint, ArchConfig, Architecture, Checkpoint, PolicyParams,
    SharedDescMode,
};
use urma::theory::{bound_report, BoundConfig, BoundReport};
use urma::trainer::{evaluate, fine_tune, CurveWriter, TrainConfig, Trainer};

use crate::robots::{class_from_str, parse_joint_range, resolve_fleet};
use crate::{
    ArchArgs, BoundsArgs, CliError, DiagnoseArgs, EvalArgs, FinetuneArgs,
    GenRobotArgs, TrainArgs,
};

#[derive(Deserialize, Default)]
struct FileConfig {
    train: Option<TrainConfig>,
    env: Option<EnvConfig>,
    arch: Option<ArchConfig>,
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("bad config {}: {e}", path.display())))
}

fn build_arch_config(args: &ArchArgs, file: Option<ArchConfig>) -> Result<ArchConfig, CliError> {
    let mut cfg = match args.arch_preset.as_str() {
        "default" => file.unwrap_or_default(),
        "paper-scale" => ArchConfig::paper_scale(),
        "tiny" => ArchConfig::tiny(),
        other => {
            return Err(CliError::Validation(format!(
                "unknown arch preset {other:?} (default, paper-scale, tiny)"
            )))
        }
    };
    if args.no_layernorm {
        cfg.layer_norm = false;
    }
    if let Some(mode) = &args.shared_desc_encoder {
        cfg.shared_desc = match mode.as_str() {
            "full" => SharedDescMode::Full,
            "partial" => SharedDescMode::Partial,
            other => {
                return Err(CliError::Validation(format!(
                    "shared-desc-encoder must be full or partial, got {other:?}"
                )))
            }
        };
    }
    if args.no_mass_dims {
        cfg.include_mass_dims = false;
    }
    Ok(cfg)
}

fn parse_architecture(s: &str) -> Result<Architecture, CliError> {
    s.parse().map_err(CliError::Validation)
}

fn prepare_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Validation(format!("output directory {}: {e}", dir.display()))
    })
}

/// Every run writes a JSON echo sufficient to reproduce it.
fn write_config_echo(
    out_dir: &Path,
    echo: &serde_json::Value,
) -> Result<(), CliError> {
    let path = out_dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(echo).expect("serializable"))
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(hex_digest(&Sha256::digest(&bytes)))
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_ref())?;
    let arch_cfg = build_arch_config(&args.arch, file.arch)?;
    let architecture = parse_architecture(&args.arch.arch)?;
    let mut train_cfg = if args.paper_scale {
        TrainConfig::paper_scale()
    } else {
        file.train.unwrap_or_default()
    };
    train_cfg.seed = args.common.seed;
    if let Some(steps) = args.total_steps {
        train_cfg.total_steps = steps;
    }
    let env_cfg = file.env.unwrap_or_default();

    let fleet = resolve_fleet(&args.select, args.arch.single_reward_set)?;
    let (train_fleet, holdout_fleet): (Vec<RobotSpec>, Vec<RobotSpec>) = match &args.holdout {
        Some(name) => {
            if !fleet.iter().any(|r| &r.name == name) {
                return Err(CliError::Validation(format!(
                    "holdout robot {name:?} is not in the fleet"
                )));
            }
            fleet.into_iter().partition(|r| &r.name != name)
        }
        None => (fleet, Vec::new()),
    };
    if train_fleet.is_empty() {
        return Err(CliError::Validation(
            "holdout removed the only robot in the fleet".into(),
        ));
    }

    prepare_out_dir(&args.common.out_dir)?;
    let echo = serde_json::json!({
        "command": "train",
        "seed": args.common.seed,
        "architecture": architecture,
        "arch": arch_cfg,
        "train": train_cfg,
        "env": env_cfg,
        "robots": train_fleet.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
        "holdout": holdout_fleet.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
    });
    write_config_echo(&args.common.out_dir, &echo)?;

    let refs: Vec<&RobotSpec> = train_fleet.iter().collect();
    let params = PolicyParams::new(architecture, arch_cfg, &refs, args.common.seed);
    let count = params.count_parameters();
    println!("parameters: {} total", count.total);
    for (subnet, n) in &count.per_subnet {
        println!("  {subnet}: {n}");
    }

    let mut trainer = Trainer::new(
        params,
        train_fleet.clone(),
        train_cfg.clone(),
        env_cfg.clone(),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;

    let curve_path = args.common.out_dir.join("curves.csv");
    let mut curve = CurveWriter::create(&curve_path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", curve_path.display())))?;
    let zero_shot_path = args.common.out_dir.join("zero_shot.csv");
    let mut zero_shot = if holdout_fleet.is_empty() {
        None
    } else {
        let mut w = std::io::BufWriter::new(
            fs::File::create(&zero_shot_path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", zero_shot_path.display())))?,
        );
        use std::io::Write;
        writeln!(w, "global_step,robot,mean_return,mean_episode_length,tracking_share")
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Some(w)
    };

    let save_ckpt = |params: &PolicyParams, global_step: u64, path: &Path| -> Result<(), CliError> {
        save_checkpoint(
            path,
            &Checkpoint {
                params: params.clone(),
                config_echo: echo.clone(),
                rng_state: train_cfg.seed.to_le_bytes().to_vec(),
                fleet: train_fleet.clone(),
                global_step,
            },
        )
        .map_err(|e| CliError::Runtime(e.to_string()))
    };

    let mut next_ckpt = args.checkpoint_every;
    let mut next_eval = args.eval_every;
    while trainer.global_step < train_cfg.total_steps {
        let report = trainer
            .iteration()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        curve
            .append(&report)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        if args.checkpoint_every > 0 && report.global_step >= next_ckpt {
            let path = args
                .common
                .out_dir
                .join(format!("checkpoint_{}.bin", report.global_step));
            save_ckpt(&trainer.params, report.global_step, &path)?;
            next_ckpt += args.checkpoint_every;
        }
        if args.eval_every > 0 && report.global_step >= next_eval {
            if let Some(w) = zero_shot.as_mut() {
                use std::io::Write;
                let eval_env = env_cfg.clone();
                let report_eval = evaluate(
                    &trainer.params,
                    &holdout_fleet,
                    &eval_env,
                    args.eval_episodes,
                    train_cfg.seed ^ 0x5eed,
                );
                for r in &report_eval.per_robot {
                    writeln!(
                        w,
                        "{},{},{:.6},{:.2},{:.6}",
                        report.global_step,
                        r.robot,
                        r.mean_return,
                        r.mean_episode_length,
                        r.mean_tracking_share
                    )
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                }
            }
            next_eval += args.eval_every;
        }
    }
    curve.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let ckpt_path = args.common.out_dir.join("checkpoint_final.bin");
    save_ckpt(&trainer.params, trainer.global_step, &ckpt_path)?;
    println!("checkpoint: {}", ckpt_path.display());
    println!("checkpoint sha256: {}", sha256_file(&ckpt_path)?);

    let mut eval_fleet = train_fleet.clone();
    eval_fleet.extend(holdout_fleet.iter().cloned());
    let final_eval = evaluate(
        &trainer.params,
        &eval_fleet,
        &env_cfg,
        args.eval_episodes,
        train_cfg.seed ^ 0x5eed,
    );
    let eval_path = args.common.out_dir.join("eval.json");
    fs::write(
        &eval_path,
        serde_json::to_string_pretty(&final_eval).expect("serializable"),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    for r in &final_eval.per_robot {
        println!(
            "{}: return {:.2} len {:.0} tracking {:.3}",
            r.robot, r.mean_return, r.mean_episode_length, r.mean_tracking_share
        );
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_ref())?;
    let ckpt = load_checkpoint(&args.checkpoint)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let fleet = if args.select.robot_files.is_empty()
        && args.select.table_robots.is_empty()
        && args.select.gen_robots.is_empty()
    {
        ckpt.fleet.clone()
    } else {
        resolve_fleet(&args.select, false)?
    };
    let mut env_cfg = file.env.unwrap_or_default();
    match args.drop_group.as_deref() {
        None => {}
        Some("feet") => env_cfg.drop_feet_group = true,
        Some(other) => {
            return Err(CliError::Validation(format!(
                "unsupported --drop-group {other:?} (supported: feet)"
            )))
        }
    }

    prepare_out_dir(&args.common.out_dir)?;
    write_config_echo(
        &args.common.out_dir,
        &serde_json::json!({
            "command": "eval",
            "seed": args.common.seed,
            "checkpoint": args.checkpoint.display().to_string(),
            "drop_group": args.drop_group,
            "episodes": args.episodes,
            "env": env_cfg,
            "robots": fleet.iter().map(|r| r.name.clone()).collect::<Vec<_>>(),
        }),
    )?;

    let report = evaluate(&ckpt.params, &fleet, &env_cfg, args.episodes, args.common.seed);
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{text}");
    fs::write(args.common.out_dir.join("eval.json"), text)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    if args.dump_trajectories {
        for (ri, robot) in fleet.iter().enumerate() {
            if report.per_robot[ri].error.is_some() {
                continue;
            }
            dump_trajectories(
                &ckpt.params,
                robot,
                &env_cfg,
                args.episodes,
                args.common.seed,
                ri,
                &args.common.out_dir,
            )?;
        }
    }

    if report.per_robot.iter().any(|r| r.error.is_some()) {
        return Err(CliError::Runtime(
            "one or more robots could not be evaluated (see report)".into(),
        ));
    }
    Ok(())
}

/// Replay deterministic episodes and write one per-step CSV each.
fn dump_trajectories(
    params: &PolicyParams,
    robot: &RobotSpec,
    env_cfg: &EnvConfig,
    episodes: usize,
    seed: u64,
    robot_index: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    use urma::env::{Env, TrajectoryWriter};
    use urma::policy::BatchObs;
    let include = params.config().include_mass_dims;
    let mut env = Env::new(
        robot.clone(),
        env_cfg.clone(),
        Env::stream_rng(seed, 5_000_000 + robot_index as u64),
    );
    let slug = robot.name.to_lowercase().replace([' ', '/'], "_");
    for episode in 0..episodes {
        let path = out_dir.join(format!("trajectory_{slug}_{episode}.csv"));
        let mut writer =
            TrajectoryWriter::create(&path, robot.joint_count(), robot.foot_count())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        let mut obs = env.reset();
        loop {
            let dist = params
                .action_distributions(robot, &BatchObs::single(&obs, include))
                .map_err(|e| CliError::Runtime(e.to_string()))?
                .remove(0);
            let (next, outcome) = env
                .step(&dist.mean)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writer
                .record(env.state(), &dist.mean, &outcome.reward)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            obs = next;
            if outcome.done {
                break;
            }
        }
        writer.finish().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub fn finetune(args: FinetuneArgs) -> Result<(), CliError> {
    let file = load_file_config(args.common.config.as_ref())?;
    let ckpt = load_checkpoint(&args.checkpoint)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let fleet = resolve_fleet(&args.select, false)?;
    if fleet.len() != 1 {
        return Err(CliError::Validation(format!(
            "fine-tuning expects exactly one target robot, got {}",
            fleet.len()
        )));
    }
    let target = fleet.into_iter().next().expect("one robot");
    let mut train_cfg = file.train.unwrap_or_default();
    train_cfg.seed = args.common.seed;
    let env_cfg = file.env.unwrap_or_default();

    prepare_out_dir(&args.common.out_dir)?;
    write_config_echo(
        &args.common.out_dir,
        &serde_json::json!({
            "command": "finetune",
            "seed": args.common.seed,
            "checkpoint": args.checkpoint.display().to_string(),
            "target": target.name,
            "budget": args.budget,
            "start_step": ckpt.global_step,
            "train": train_cfg,
            "env": env_cfg,
        }),
    )?;

    let curve_path = args.common.out_dir.join("curves.csv");
    let mut curve = CurveWriter::create(&curve_path)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let tuned = fine_tune(
        ckpt.params,
        target.clone(),
        train_cfg.clone(),
        env_cfg.clone(),
        ckpt.global_step,
        args.budget,
        |report, _| {
            let _ = curve.append(report);
        },
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    curve.flush().map_err(|e| CliError::Runtime(e.to_string()))?;

    let out_path = args.common.out_dir.join("checkpoint_finetuned.bin");
    save_checkpoint(
        &out_path,
        &Checkpoint {
            params: tuned.clone(),
            config_echo: ckpt.config_echo,
            rng_state: ckpt.rng_state,
            fleet: ckpt.fleet,
            global_step: ckpt.global_step + args.budget,
        },
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("checkpoint: {}", out_path.display());

    let report = evaluate(&tuned, &[target], &env_cfg, args.eval_episodes, args.common.seed);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    );
    Ok(())
}

fn bound_config(
    r_max: Option<f64>,
    gamma: f64,
    epsilon: f64,
    ratio_cap: f64,
    delta: f64,
    n: usize,
    m: usize,
) -> BoundConfig {
    let single = urma::reward::single_set();
    BoundConfig {
        r_max: r_max.unwrap_or(single.t1 + single.t2),
        gamma,
        epsilon,
        ratio_cap,
        delta,
        n,
        m,
    }
}

fn print_bound_report(report: &BoundReport) {
    println!("bound report");
    println!(
        "  r_max {:.4}  gamma {}  epsilon {}  E {}  delta {}  n {}  M {}",
        report.config.r_max,
        report.config.gamma,
        report.config.epsilon,
        report.config.ratio_cap,
        report.config.delta,
        report.config.n,
        report.config.m
    );
    println!("  advantage bounds: [{:.4}, {:.4}]", report.a_min, report.a_max);
    println!("  loss bounds:      [{:.4}, {:.4}]", report.l_min, report.l_max);
    println!("  hoeffding term:   {:.6}", report.hoeffding);
    let (lo, hi, n) = report.normalized_loss_range;
    println!("  normalized loss over {n} filtered samples: [{lo:.6}, {hi:.6}]");
    let (est, stderr, closed) = report.pair_class_complexity;
    println!("  pair-class complexity: {est:.4} +- {stderr:.4} (closed form {closed:.4})");
}

pub fn bounds(args: BoundsArgs) -> Result<(), CliError> {
    let config = bound_config(
        args.r_max,
        args.gamma,
        args.epsilon,
        args.ratio_cap,
        args.delta,
        args.n,
        args.m,
    );
    let mut rng = urma::env::Env::stream_rng(args.seed, 9_000_000);
    let report = bound_report(&config, args.mc_samples, &mut rng)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    print_bound_report(&report);
    if let Some(path) = args.json {
        fs::write(
            &path,
            serde_json::to_string_pretty(&report).expect("serializable"),
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub fn diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let mut failures = 0;
    let mut check = |name: &str, pass: bool, detail: String| {
        println!("[{}] {name}: {detail}", if pass { "pass" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };

    // per-op gradient audit
    match tensorgrad::suite::gradient_suite(args.trials, 1e-5, args.seed) {
        Ok(results) => {
            for r in results {
                check(
                    &format!("grad/{}", r.op),
                    r.max_rel_err < 1e-4,
                    format!("max rel err {:.3e} over {} trials", r.max_rel_err, r.trials),
                );
            }
        }
        Err(e) => check("grad/suite", false, e.to_string()),
    }

    // end-to-end network gradients: analytic directional derivative of
    // the policy log-prob and critic value against a central difference
    // along random parameter directions
    {
        use rand::SeedableRng;
        use urma::morphology::MorphologyClass;
        use urma::policy::BatchObs;

        let robot = generate_surrogate_robot(40, MorphologyClass::Biped, (6, 6));
        let params = PolicyParams::new(Architecture::Urma, ArchConfig::tiny(), &[], args.seed);
        let mut env = urma::env::Env::new(
            robot.clone(),
            EnvConfig::deterministic(),
            urma::env::Env::stream_rng(args.seed, 1),
        );
        let obs = env.reset();
        let batch = BatchObs::single(&obs, true);
        let action: Vec<f64> = (0..robot.joint_count()).map(|j| 0.1 * j as f64).collect();

        let loss_of = |p: &PolicyParams, want_grads: bool| -> (f64, Option<Vec<tensorgrad::Tensor>>) {
            let mut tape = tensorgrad::Tape::new();
            let bound = p.bind(&mut tape);
            let (mean, std) = bound.actor(&mut tape, &robot, &batch).expect("actor");
            let a = tape.input(tensorgrad::Tensor::from_rows(&[action.clone()]).unwrap());
            let lp = tape.gaussian_logprob(mean, std, a).expect("logprob");
            let v = bound.value(&mut tape, &robot, &batch).expect("critic");
            let sum = tape.add(lp, v).expect("add");
            let loss = tape.sum_all(sum);
            let value = tape.value(loss).item();
            if !want_grads {
                return (value, None);
            }
            tape.backward(loss).expect("backward");
            let grads = bound
                .param_vars()
                .iter()
                .zip(p.blocks())
                .map(|(var, (_, t))| {
                    tape.grad(*var)
                        .cloned()
                        .unwrap_or_else(|| tensorgrad::Tensor::zeros(t.rows(), t.cols()))
                })
                .collect();
            (value, Some(grads))
        };

        let (_, grads) = loss_of(&params, true);
        let grads = grads.expect("gradients");
        let shapes: Vec<(usize, usize)> = params.blocks().iter().map(|(_, t)| t.shape()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..args.trials {
            let dirs = urma::policy::random_direction(&mut rng, &shapes);
            let analytic: f64 = grads
                .iter()
                .zip(dirs.iter())
                .map(|(g, d)| g.flat_dot(d))
                .sum();
            let shift = |sign: f64| -> PolicyParams {
                let mut moved = params.clone();
                let mut idx = 0;
                moved.visit_mut(&mut |_, t| {
                    for (v, dv) in t.data_mut().iter_mut().zip(dirs[idx].data()) {
                        *v += sign * h * dv;
                    }
                    idx += 1;
                });
                moved
            };
            let numeric = (loss_of(&shift(1.0), false).0 - loss_of(&shift(-1.0), false).0)
                / (2.0 * h);
            let rel = (analytic - numeric).abs()
                / analytic.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
        }
        check(
            "grad/full-network",
            worst < 1e-4,
            format!("max directional rel err {worst:.3e} over {} trials", args.trials),
        );
    }

    // permutation laws on a random fleet
    {
        use urma::morphology::MorphologyClass;
        use urma::policy::BatchObs;
        let params = PolicyParams::new(Architecture::Urma, ArchConfig::tiny(), &[], args.seed);
        let mut ok = true;
        for seed in 0..5u64 {
            let robot =
                generate_surrogate_robot(seed, MorphologyClass::Quadruped, (8, 16));
            let mut env = urma::env::Env::new(
                robot.clone(),
                EnvConfig::deterministic(),
                urma::env::Env::stream_rng(seed, 2),
            );
            let obs = env.reset();
            let batch = BatchObs::single(&obs, true);
            let base = params
                .action_distributions(&robot, &batch)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            // reversal permutation
            let j = obs.joints;
            let mut rev = obs.clone();
            for (new, old) in (0..j).rev().enumerate() {
                rev.joint_obs[new * 3..(new + 1) * 3]
                    .copy_from_slice(&obs.joint_obs[old * 3..(old + 1) * 3]);
                let w = urma::morphology::JOINT_DESC_LEN;
                rev.joint_desc[new * w..(new + 1) * w]
                    .copy_from_slice(&obs.joint_desc[old * w..(old + 1) * w]);
            }
            let permuted = params
                .action_distributions(&robot, &BatchObs::single(&rev, true))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            for (new, old) in (0..j).rev().enumerate() {
                if base[0].mean[old] != permuted[0].mean[new] {
                    ok = false;
                }
            }
        }
        check("permutation/decoder-equivariance", ok, "5 robots, reversal".into());
    }

    // checkpoint audit
    if let Some(path) = &args.checkpoint {
        match load_checkpoint(path) {
            Ok(ckpt) => check(
                "checkpoint/finite-parameters",
                ckpt.params.all_finite(),
                format!("{}", path.display()),
            ),
            Err(e) => check("checkpoint/loadable", false, e.to_string()),
        }
    }

    // bound report
    let config = bound_config(None, 0.99, 0.1, 1.0, args.delta, args.n, args.m);
    let mut rng = urma::env::Env::stream_rng(args.seed, 9_000_001);
    match bound_report(&config, 10_000, &mut rng) {
        Ok(report) => {
            let (lo, hi, _) = report.normalized_loss_range;
            check(
                "bounds/normalized-loss-in-unit-interval",
                (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi),
                format!("range [{lo:.4}, {hi:.4}]"),
            );
            print_bound_report(&report);
        }
        Err(e) => check("bounds/report", false, e.to_string()),
    }

    if failures > 0 {
        Err(CliError::Diagnostic(format!("{failures} checks failed")))
    } else {
        println!("all checks passed");
        Ok(())
    }
}

pub fn gen_robot(args: GenRobotArgs) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let mut written = Vec::new();
    let slug = |name: &str| name.to_lowercase().replace([' ', '/'], "_");
    if args.table_all {
        for name in table_robot_names() {
            let spec = table_robot(name).expect("stock robot");
            let path = args.out_dir.join(format!("{}.toml", slug(name)));
            save_robot_spec(&spec, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
            written.push(path);
        }
    }
    if let Some(name) = &args.table {
        let spec = table_robot(name)
            .ok_or_else(|| CliError::Validation(format!("unknown stock robot {name:?}")))?;
        let path = args.out_dir.join(format!("{}.toml", slug(name)));
        save_robot_spec(&spec, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
        written.push(path);
    }
    if let Some(seed) = args.seed {
        let class = class_from_str(&args.class)?;
        let range = parse_joint_range(&args.joints)?;
        let spec = generate_surrogate_robot(seed, class, range);
        let path = args.out_dir.join(format!("{}.toml", slug(&spec.name)));
        save_robot_spec(&spec, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
        written.push(path);
    }
    if written.is_empty() {
        return Err(CliError::Validation(
            "nothing to generate: pass --table-all, --table, or --seed".into(),
        ));
    }
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
