//! End-to-end checks of the binary: artifact layout, exit codes, the
//! holdout protocol, determinism of reruns, and the documented baseline
//! failure modes.

use std::path::Path;
use std::process::Command;

fn urma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_urma"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn train_small(dir: &Path, seed: u64, extra: &[&str]) -> String {
    let mut cmd = urma();
    cmd.args([
        "train",
        "--gen-robots",
        "quadruped:2:600",
        "--total-steps",
        "3000",
        "--arch-preset",
        "tiny",
        "--seed",
        &seed.to_string(),
        "--out-dir",
    ])
    .arg(dir)
    .args(extra);
    run_ok(&mut cmd)
}

#[test]
fn train_writes_monotone_curves_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path(), 0, &[]);
    let config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap())
            .unwrap();
    assert_eq!(config["seed"], 0);
    assert_eq!(config["command"], "train");

    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    let mut last = 0u64;
    for line in curves.lines().skip(1) {
        let step: u64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(step >= last, "global_step went backwards");
        last = step;
    }
    assert!(last > 0);
    assert!(dir.path().join("checkpoint_final.bin").exists());
    assert!(dir.path().join("eval.json").exists());
}

#[test]
fn same_seed_reproduces_the_checkpoint_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = train_small(a.path(), 7, &[]);
    let out_b = train_small(b.path(), 7, &[]);
    let hash = |s: &str| {
        s.lines()
            .find(|l| l.starts_with("checkpoint sha256:"))
            .map(str::to_owned)
            .expect("hash line")
    };
    assert_eq!(hash(&out_a), hash(&out_b));
    let bytes_a = std::fs::read(a.path().join("checkpoint_final.bin")).unwrap();
    let bytes_b = std::fs::read(b.path().join("checkpoint_final.bin")).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn holdout_is_excluded_from_training_but_zero_shot_evaluated() {
    let dir = tempfile::tempdir().unwrap();
    train_small(
        dir.path(),
        1,
        &[
            "--holdout",
            "surrogate-quadruped-601",
            "--eval-every",
            "1000",
            "--eval-episodes",
            "1",
        ],
    );
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert!(!curves.contains("surrogate-quadruped-601"));
    assert!(curves.contains("surrogate-quadruped-600"));
    let zero_shot = std::fs::read_to_string(dir.path().join("zero_shot.csv")).unwrap();
    assert!(zero_shot.contains("surrogate-quadruped-601"));
    // final eval covers both
    let eval = std::fs::read_to_string(dir.path().join("eval.json")).unwrap();
    assert!(eval.contains("surrogate-quadruped-601"));
}

#[test]
fn eval_with_feet_dropout_and_unseen_robot_runs_for_urma() {
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 2, &[]);
    let eval_dir = tempfile::tempdir().unwrap();
    run_ok(urma()
        .args(["eval", "--checkpoint"])
        .arg(train_dir.path().join("checkpoint_final.bin"))
        .args([
            "--drop-group",
            "feet",
            "--episodes",
            "1",
            // a robot the checkpoint never saw: zero-shot must run
            "--gen-robots",
            "quadruped:1:777",
            "--out-dir",
        ])
        .arg(eval_dir.path()));
    let report = std::fs::read_to_string(eval_dir.path().join("eval.json")).unwrap();
    assert!(report.contains("surrogate-quadruped-777"));
}

#[test]
fn padding_checkpoint_fails_structurally_on_unregistered_robot() {
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 3, &["--arch", "padding"]);
    let eval_dir = tempfile::tempdir().unwrap();
    let out = urma()
        .args(["eval", "--checkpoint"])
        .arg(train_dir.path().join("checkpoint_final.bin"))
        .args([
            "--table-robot",
            "A1",
            "--episodes",
            "1",
            "--out-dir",
        ])
        .arg(eval_dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "expected runtime failure exit");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("task ID"), "structured error missing: {stdout}");
}

#[test]
fn finetune_budget_zero_preserves_the_parameters() {
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 4, &[]);
    let ft_dir = tempfile::tempdir().unwrap();
    run_ok(urma()
        .args(["finetune", "--checkpoint"])
        .arg(train_dir.path().join("checkpoint_final.bin"))
        .args([
            "--gen-robots",
            "quadruped:1:600",
            "--budget",
            "0",
            "--eval-episodes",
            "1",
            "--out-dir",
        ])
        .arg(ft_dir.path()));
    let before =
        urma::policy::load_checkpoint(train_dir.path().join("checkpoint_final.bin")).unwrap();
    let after =
        urma::policy::load_checkpoint(ft_dir.path().join("checkpoint_finetuned.bin")).unwrap();
    for ((n1, t1), (n2, t2)) in before.params.blocks().iter().zip(after.params.blocks()) {
        assert_eq!(*n1, n2);
        assert_eq!(t1.data(), t2.data());
    }
}

#[test]
fn finetune_runs_on_a_robot_with_an_extra_joint() {
    // a 13-joint target against a policy trained on 12-joint robots
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 5, &[]);
    let ft_dir = tempfile::tempdir().unwrap();
    run_ok(urma()
        .args(["finetune", "--checkpoint"])
        .arg(train_dir.path().join("checkpoint_final.bin"))
        .args([
            "--table-robot",
            "Silver Badger",
            "--budget",
            "1500",
            "--eval-episodes",
            "1",
            "--out-dir",
        ])
        .arg(ft_dir.path()));
}

#[test]
fn diagnose_flags_a_tampered_checkpoint() {
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 6, &[]);
    let ckpt = train_dir.path().join("checkpoint_final.bin");
    // inject a NaN into the last parameter block
    let mut bytes = std::fs::read(&ckpt).unwrap();
    let n = bytes.len();
    bytes[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
    let tampered = train_dir.path().join("tampered.bin");
    std::fs::write(&tampered, bytes).unwrap();

    let out = urma()
        .args(["diagnose", "--trials", "2", "--checkpoint"])
        .arg(&tampered)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "diagnostic failure exit expected");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("[FAIL] checkpoint/finite-parameters"),
        "named check missing: {stdout}"
    );
}

#[test]
fn gen_robot_spec_files_load_back() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(urma()
        .args([
            "gen-robot",
            "--seed",
            "9",
            "--class",
            "hexapod",
            "--joints",
            "12:18",
            "--out-dir",
        ])
        .arg(dir.path()));
    let path = dir.path().join("surrogate-hexapod-9.toml");
    let spec = urma::morphology::load_robot_spec(&path).unwrap();
    assert_eq!(spec.foot_count(), 6);
}

#[test]
fn eval_can_dump_per_episode_trajectories() {
    let train_dir = tempfile::tempdir().unwrap();
    train_small(train_dir.path(), 8, &[]);
    let eval_dir = tempfile::tempdir().unwrap();
    run_ok(urma()
        .args(["eval", "--checkpoint"])
        .arg(train_dir.path().join("checkpoint_final.bin"))
        .args(["--episodes", "2", "--dump-trajectories", "--out-dir"])
        .arg(eval_dir.path()));
    let dumps: Vec<_> = std::fs::read_dir(eval_dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("trajectory_"))
        .collect();
    // two robots x two episodes
    assert_eq!(dumps.len(), 4);
    let text = std::fs::read_to_string(dumps[0].path()).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("step,vx,vy,vz"));
    assert!(text.lines().count() > 10);
}

#[test]
fn validation_errors_exit_with_code_one() {
    let out = urma()
        .args(["train", "--total-steps", "100", "--out-dir", "/tmp/unused-urma-test"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
