//! Command-line entry point: multi-robot training, evaluation,
//! fine-tuning, the diagnostics suite, bound reports, and robot spec
//! generation.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime failure,
//! 3 diagnostic failure.

mod commands;
mod robots;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "urma", version, about = "Multi-embodiment locomotion at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy on a fleet of robots.
    Train(TrainArgs),
    /// Evaluate a checkpoint, optionally with observation dropout.
    Eval(EvalArgs),
    /// Continue training a checkpoint on a single target robot.
    Finetune(FinetuneArgs),
    /// Run the invariant suite (gradients, permutation laws, bounds).
    Diagnose(DiagnoseArgs),
    /// Print the bound report for a given configuration.
    Bounds(BoundsArgs),
    /// Generate robot spec files (stock fleet or seeded surrogates).
    GenRobot(GenRobotArgs),
}

/// Robot selection shared by several subcommands. Stock names, spec
/// files, and generated surrogates mix freely.
#[derive(Args, Clone, Default)]
pub struct RobotSelect {
    /// Robot spec file (TOML), repeatable.
    #[arg(long = "robot", value_name = "PATH")]
    robot_files: Vec<PathBuf>,
    /// Stock robot name (e.g. "A1", "Cassie"), repeatable.
    #[arg(long = "table-robot", value_name = "NAME")]
    table_robots: Vec<String>,
    /// Generated surrogates as class:count[:base_seed],
    /// e.g. quadruped:3:200.
    #[arg(long = "gen-robots", value_name = "SPEC")]
    gen_robots: Vec<String>,
    /// Joint count range for generated robots, as lo:hi.
    #[arg(long = "gen-joints", default_value = "8:16")]
    gen_joints: String,
}

#[derive(Args)]
pub struct CommonRunArgs {
    /// Output directory; all artifacts land here.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Base RNG seed for everything in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML config with [train], [env], [arch] sections; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ArchArgs {
    /// Architecture: urma, multihead, or padding.
    #[arg(long, default_value = "urma")]
    arch: String,
    /// Size preset: default, paper-scale, or tiny.
    #[arg(long = "arch-preset", default_value = "default")]
    arch_preset: String,
    /// Remove every LayerNorm.
    #[arg(long)]
    no_layernorm: bool,
    /// Reuse the joint description encoder in the decoder: full
    /// (post-softmax) or partial (pre-softmax).
    #[arg(long = "shared-desc-encoder", value_name = "MODE")]
    shared_desc_encoder: Option<String>,
    /// Give every robot the single conservative reward set.
    #[arg(long)]
    single_reward_set: bool,
    /// Drop robot mass and dimensions from observations and descriptions.
    #[arg(long)]
    no_mass_dims: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    select: RobotSelect,
    #[command(flatten)]
    common: CommonRunArgs,
    #[command(flatten)]
    arch: ArchArgs,
    /// Total environment steps to train for.
    #[arg(long)]
    total_steps: Option<u64>,
    /// Use the published large-scale hyperparameters.
    #[arg(long)]
    paper_scale: bool,
    /// Robot name excluded from training but evaluated zero-shot.
    #[arg(long)]
    holdout: Option<String>,
    /// Save a checkpoint every N steps (0 = final only).
    #[arg(long, default_value_t = 0)]
    checkpoint_every: u64,
    /// Evaluate every N steps (0 = final only).
    #[arg(long, default_value_t = 0)]
    eval_every: u64,
    /// Episodes per robot in evaluations.
    #[arg(long, default_value_t = 3)]
    eval_episodes: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    select: RobotSelect,
    #[command(flatten)]
    common: CommonRunArgs,
    /// Zero a whole observation group during evaluation (supported: feet).
    #[arg(long = "drop-group", value_name = "GROUP")]
    drop_group: Option<String>,
    #[arg(long, default_value_t = 5)]
    episodes: usize,
    /// Dump one per-step CSV per evaluated episode into --out-dir.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// The single target robot (spec file, stock name, or generated).
    #[command(flatten)]
    select: RobotSelect,
    #[command(flatten)]
    common: CommonRunArgs,
    /// Fine-tuning budget in environment steps.
    #[arg(long, default_value_t = 200_000)]
    budget: u64,
    #[arg(long, default_value_t = 3)]
    eval_episodes: usize,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Gradient-check trials per op.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Checkpoint to audit for finite parameters.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Bound-report sample counts.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
pub struct BoundsArgs {
    /// Max per-step reward; defaults to t1 + t2 of the single reward set.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Ratio cap E for negative-advantage samples.
    #[arg(long, default_value_t = 1.0)]
    ratio_cap: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Monte-Carlo samples for the normalized-loss audit.
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenRobotArgs {
    /// Write all 16 stock robots into --out-dir.
    #[arg(long)]
    table_all: bool,
    /// Write one stock robot by name.
    #[arg(long)]
    table: Option<String>,
    /// Seed for a generated surrogate.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "quadruped")]
    class: String,
    /// Joint count range lo:hi for generated robots.
    #[arg(long, default_value = "8:16")]
    joints: String,
    #[arg(long, default_value = "specs")]
    out_dir: PathBuf,
}

/// Errors carry the exit code they map to.
pub enum CliError {
    Validation(String),
    Runtime(String),
    Diagnostic(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Diagnostic(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) | CliError::Diagnostic(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Finetune(args) => commands::finetune(args),
        Command::Diagnose(args) => commands::diagnose(args),
        Command::Bounds(args) => commands::bounds(args),
        Command::GenRobot(args) => commands::gen_robot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
