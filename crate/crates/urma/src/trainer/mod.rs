//! Multi-task PPO: parallel rollout collection across robots, GAE,
//! robot-balanced mini-batches, clipped surrogate updates with a
//! linearly annealed learning rate, deterministic evaluation, and the
//! fine-tuning protocol.

mod adam;
mod gae;
mod ppo;
mod rollout;

pub use adam::{clip_grad_norm, Adam};
pub use gae::{compute_gae, compute_gae_truncated};
pub use ppo::{ppo_update, UpdateStats};
pub use rollout::{collect_rollouts, EpisodeStats, RobotRollout, RolloutBuffer, Worker};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, EnvConfig};
use crate::morphology::RobotSpec;
use crate::policy::{BatchObs, PolicyError, PolicyParams};
use crate::reward::RewardError;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Tensor(#[from] tensorgrad::TensorError),
    #[error("aligned arrays differ in length: rewards {rewards}, values {values}, dones {dones}")]
    LengthMismatch {
        rewards: usize,
        values: usize,
        dones: usize,
    },
    #[error("non-finite loss on robot {robot}: {detail}")]
    NonFiniteLoss { robot: String, detail: String },
    #[error("training needs at least one robot")]
    NoRobots,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// PPO hyperparameters. Defaults are the desk-scale values; the
/// published large-scale settings sit behind [`TrainConfig::paper_scale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Steps collected per environment per iteration.
    pub steps_per_rollout: usize,
    pub envs_per_robot: usize,
    pub epochs: usize,
    pub clip_range: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub lr_initial: f64,
    /// Total environment steps; the learning rate anneals linearly to
    /// exactly zero here.
    pub total_steps: u64,
    /// Samples drawn from every robot for each mini-batch.
    pub minibatch_per_robot: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps_per_rollout: 256,
            envs_per_robot: 3,
            epochs: 10,
            clip_range: 0.1,
            gamma: 0.99,
            gae_lambda: 0.9,
            entropy_coef: 0.0,
            value_coef: 0.5,
            max_grad_norm: 5.0,
            lr_initial: 4e-4,
            total_steps: 2_000_000,
            minibatch_per_robot: 48,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The published large-scale settings: 10880 steps per env, 16
    /// robots x 2040 samples per mini-batch, annealed over 100M steps.
    pub fn paper_scale() -> Self {
        Self {
            steps_per_rollout: 10_880,
            minibatch_per_robot: 2_040,
            total_steps: 100_000_000,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobotIterStats {
    pub robot: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_episode_length: f64,
    pub mean_tracking_share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub global_step: u64,
    pub per_robot: Vec<RobotIterStats>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub tau_joints: f64,
    pub tau_feet: f64,
}

/// Orchestrates collection and updates; owns the environments, the
/// optimizer state, and the step counters.
pub struct Trainer {
    pub train_config: TrainConfig,
    pub env_config: EnvConfig,
    pub params: PolicyParams,
    robots: Vec<RobotSpec>,
    workers: Vec<Worker>,
    adam: Adam,
    update_rng: rand_chacha::ChaCha8Rng,
    pub global_step: u64,
    per_robot_step: u64,
    lr_scale: f64,
    /// Steps over which the learning rate anneals to zero.
    schedule_total: u64,
}

impl Trainer {
    pub fn new(
        params: PolicyParams,
        robots: Vec<RobotSpec>,
        train_config: TrainConfig,
        env_config: EnvConfig,
    ) -> Result<Self, TrainerError> {
        Self::resume(params, robots, train_config, env_config, 0, 1.0, None)
    }

    /// Construct mid-schedule (fine-tuning, checkpoint resume).
    /// `schedule_total` defaults to the config's total step budget.
    pub fn resume(
        params: PolicyParams,
        robots: Vec<RobotSpec>,
        train_config: TrainConfig,
        env_config: EnvConfig,
        global_step: u64,
        lr_scale: f64,
        schedule_total: Option<u64>,
    ) -> Result<Self, TrainerError> {
        if robots.is_empty() {
            return Err(TrainerError::NoRobots);
        }
        let mut workers = Vec::new();
        for (ri, robot) in robots.iter().enumerate() {
            for k in 0..train_config.envs_per_robot {
                let stream = (ri * train_config.envs_per_robot + k) as u64;
                workers.push(Worker::new(
                    ri,
                    robot.clone(),
                    env_config.clone(),
                    train_config.seed,
                    stream,
                ));
            }
        }
        let adam = Adam::new(&params);
        let update_rng = Env::stream_rng(train_config.seed, 2_000_000);
        let schedule_total = schedule_total.unwrap_or(train_config.total_steps).max(1);
        let per_robot_step = global_step / robots.len() as u64;
        Ok(Self {
            train_config,
            env_config,
            params,
            robots,
            workers,
            adam,
            update_rng,
            global_step,
            per_robot_step,
            lr_scale,
            schedule_total,
        })
    }

    pub fn robots(&self) -> &[RobotSpec] {
        &self.robots
    }

    fn tau_values(&self) -> (f64, f64) {
        let mut joints = 0.0;
        let mut feet = 0.0;
        self.params.visit(&mut |name, t| {
            if name == "actor.joint_enc.tau" {
                joints = t.item();
            } else if name == "actor.foot_enc.tau" {
                feet = t.item();
            }
        });
        (joints, feet)
    }

    /// One collect + update cycle.
    pub fn iteration(&mut self) -> Result<IterationReport, TrainerError> {
        for w in &mut self.workers {
            w.env.set_curriculum_step(self.per_robot_step);
        }
        let buffer = collect_rollouts(
            &self.params,
            &self.robots,
            &mut self.workers,
            &self.train_config,
        )?;
        let collected = buffer.total_transitions() as u64;
        self.global_step += collected;
        self.per_robot_step += buffer.steps_per_robot as u64;

        let progress = (self.global_step as f64 / self.schedule_total as f64).min(1.0);
        let stats = ppo_update(
            &mut self.params,
            &buffer,
            &self.robots,
            &mut self.adam,
            &mut self.update_rng,
            &self.train_config,
            progress,
            self.lr_scale,
        )?;

        let mut per_robot = Vec::with_capacity(self.robots.len());
        for (ri, robot) in self.robots.iter().enumerate() {
            let mut episodes = 0;
            let mut ret = 0.0;
            let mut len = 0.0;
            let mut share = 0.0;
            for w in &mut self.workers {
                if w.robot_index != ri {
                    continue;
                }
                for e in w.finished_episodes.drain(..) {
                    episodes += 1;
                    ret += e.total_return;
                    len += e.length as f64;
                    share += e.tracking_share;
                }
            }
            let d = episodes.max(1) as f64;
            per_robot.push(RobotIterStats {
                robot: robot.name.clone(),
                episodes,
                mean_return: ret / d,
                mean_episode_length: len / d,
                mean_tracking_share: share / d,
            });
        }
        let (tau_joints, tau_feet) = self.tau_values();
        Ok(IterationReport {
            global_step: self.global_step,
            per_robot,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            grad_norm: stats.grad_norm,
            lr: stats.lr,
            tau_joints,
            tau_feet,
        })
    }

    /// Train until `target_steps` total environment steps, invoking the
    /// callback after every iteration.
    pub fn run(
        &mut self,
        target_steps: u64,
        mut on_iteration: impl FnMut(&IterationReport, &PolicyParams),
    ) -> Result<(), TrainerError> {
        while self.global_step < target_steps {
            let report = self.iteration()?;
            on_iteration(&report, &self.params);
        }
        Ok(())
    }

    pub fn current_lr(&self) -> f64 {
        let progress = (self.global_step as f64 / self.schedule_total as f64).min(1.0);
        self.lr_scale * self.train_config.lr_initial * (1.0 - progress).max(0.0)
    }
}

/// Continue training on a single robot with the learning rate reduced
/// to one third, annealing over the extended schedule.
pub fn fine_tune(
    params: PolicyParams,
    target: RobotSpec,
    train_config: TrainConfig,
    env_config: EnvConfig,
    start_global_step: u64,
    budget: u64,
    mut on_iteration: impl FnMut(&IterationReport, &PolicyParams),
) -> Result<PolicyParams, TrainerError> {
    let mut trainer = Trainer::resume(
        params,
        vec![target],
        train_config,
        env_config,
        start_global_step,
        1.0 / 3.0,
        Some(start_global_step + budget),
    )?;
    if budget > 0 {
        trainer.run(start_global_step + budget, &mut on_iteration)?;
    }
    Ok(trainer.params)
}

#[derive(Debug, Clone, Serialize)]
pub struct RobotEval {
    pub robot: String,
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_episode_length: f64,
    pub mean_tracking_share: f64,
    /// Set when the policy cannot run this robot at all (baseline
    /// architectures on unregistered robots).
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub per_robot: Vec<RobotEval>,
    pub fleet_mean_return: f64,
}

/// Deterministic evaluation: the mean action is applied, randomization
/// and noise follow `env_config`. Per-robot failures are reported, not
/// propagated, so baselines can be scored on partial fleets.
pub fn evaluate(
    params: &PolicyParams,
    robots: &[RobotSpec],
    env_config: &EnvConfig,
    episodes: usize,
    seed: u64,
) -> EvalReport {
    let include = params.config().include_mass_dims;
    let mut per_robot = Vec::with_capacity(robots.len());
    let mut fleet_sum = 0.0;
    let mut fleet_count = 0.0;
    for (ri, robot) in robots.iter().enumerate() {
        let mut env = Env::new(
            robot.clone(),
            env_config.clone(),
            Env::stream_rng(seed, 5_000_000 + ri as u64),
        );
        let mut total_return = 0.0;
        let mut total_len = 0usize;
        let mut total_share = 0.0;
        let mut failure = None;
        'episodes: for _ in 0..episodes {
            let mut obs = env.reset();
            let coefs = robot.reward_coefficients.t1 + robot.reward_coefficients.t2;
            let mut ep_tracking = 0.0;
            let mut ep_len = 0usize;
            loop {
                let dist = match params
                    .action_distributions(robot, &BatchObs::single(&obs, include))
                {
                    Ok(mut d) => d.remove(0),
                    Err(e) => {
                        failure = Some(e.to_string());
                        break 'episodes;
                    }
                };
                let (next, outcome) = match env.step(&dist.mean) {
                    Ok(x) => x,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break 'episodes;
                    }
                };
                total_return += outcome.reward.total;
                ep_tracking += outcome.reward.tracking_weighted();
                ep_len += 1;
                obs = next;
                if outcome.done {
                    break;
                }
            }
            total_len += ep_len;
            total_share += ep_tracking / (ep_len.max(1) as f64 * coefs);
        }
        let (mean_return, mean_len, mean_share) = if failure.is_none() && episodes > 0 {
            (
                total_return / episodes as f64,
                total_len as f64 / episodes as f64,
                total_share / episodes as f64,
            )
        } else {
            (0.0, 0.0, 0.0)
        };
        if failure.is_none() {
            fleet_sum += mean_return;
            fleet_count += 1.0;
        }
        per_robot.push(RobotEval {
            robot: robot.name.clone(),
            episodes,
            mean_return,
            mean_episode_length: mean_len,
            mean_tracking_share: mean_share,
            error: failure,
        });
    }
    EvalReport {
        per_robot,
        fleet_mean_return: if fleet_count > 0.0 {
            fleet_sum / fleet_count
        } else {
            0.0
        },
    }
}

/// Appends one row per robot per iteration to a learning-curve CSV.
pub struct CurveWriter {
    out: std::io::BufWriter<std::fs::File>,
}

impl CurveWriter {
    pub fn create(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "global_step,robot,mean_return,mean_episode_length,policy_loss,value_loss,entropy,lr,tau_joints,tau_feet"
        )?;
        Ok(Self { out })
    }

    pub fn append(&mut self, report: &IterationReport) -> std::io::Result<()> {
        for r in &report.per_robot {
            writeln!(
                self.out,
                "{},{},{:.9},{:.3},{:.9},{:.9},{:.9},{:.9e},{:.9},{:.9}",
                report.global_step,
                r.robot,
                r.mean_return,
                r.mean_episode_length,
                report.policy_loss,
                report.value_loss,
                report.entropy,
                report.lr,
                report.tau_joints,
                report.tau_feet,
            )?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}
