//! Parallel rollout collection: every robot contributes the same
//! number of steps through its own environment instances, each on an
//! independent RNG stream. Observation bundles snapshot the
//! randomization draw active at that step.

use rayon::prelude::*;

use rand_chacha::ChaCha8Rng;

use crate::env::{Env, EnvConfig, ObservationBundle};
use crate::morphology::RobotSpec;
use crate::policy::{BatchObs, PolicyParams};
use crate::trainer::gae::compute_gae_truncated;
use crate::trainer::{TrainConfig, TrainerError};

/// One environment instance plus its action-sampling stream and the
/// episode statistics it is accumulating.
pub struct Worker {
    pub robot_index: usize,
    pub env: Env,
    pub action_rng: ChaCha8Rng,
    pub current_obs: ObservationBundle,
    ep_return: f64,
    ep_len: usize,
    ep_tracking: f64,
    pub finished_episodes: Vec<EpisodeStats>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub total_return: f64,
    pub length: usize,
    /// Mean per-step weighted tracking reward divided by `t1 + t2`.
    pub tracking_share: f64,
}

impl Worker {
    pub fn new(robot_index: usize, robot: RobotSpec, env_cfg: EnvConfig, root_seed: u64, stream: u64) -> Self {
        let mut env = Env::new(robot, env_cfg, Env::stream_rng(root_seed, stream));
        let current_obs = env.reset();
        Self {
            robot_index,
            env,
            action_rng: Env::stream_rng(root_seed, 1_000_000 + stream),
            current_obs,
            ep_return: 0.0,
            ep_len: 0,
            ep_tracking: 0.0,
            finished_episodes: Vec::new(),
        }
    }
}

/// Per-robot rollout storage, time-major over the robot's K envs:
/// index `t * K + k`.
pub struct RobotRollout {
    pub robot_index: usize,
    pub envs: usize,
    pub bundles: Vec<ObservationBundle>,
    pub actions: Vec<Vec<f64>>,
    pub logprobs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of the post-step observation when the step ended an
    /// episode by time limit (falls bootstrap zero).
    pub timeout_values: Vec<Option<f64>>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RobotRollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub struct RolloutBuffer {
    pub robots: Vec<RobotRollout>,
    /// Steps contributed per robot (identical across robots).
    pub steps_per_robot: usize,
}

impl RolloutBuffer {
    pub fn total_transitions(&self) -> usize {
        self.robots.iter().map(|r| r.len()).sum()
    }
}

fn critic_value(
    params: &PolicyParams,
    robot: &RobotSpec,
    obs: &ObservationBundle,
) -> Result<f64, TrainerError> {
    let include = params.config().include_mass_dims;
    Ok(params.values(robot, &BatchObs::single(obs, include))?[0])
}

/// Collect `steps_per_rollout` steps from every worker. Workers are
/// grouped by robot so each step evaluates one batched forward pass per
/// robot; robots run in parallel and results merge in robot order.
pub fn collect_rollouts(
    params: &PolicyParams,
    robots: &[RobotSpec],
    workers: &mut [Worker],
    config: &TrainConfig,
) -> Result<RolloutBuffer, TrainerError> {
    let steps = config.steps_per_rollout;
    let include = params.config().include_mass_dims;

    // group mutable worker slices by robot index (workers are laid out
    // robot-major at construction)
    let mut groups: Vec<(usize, Vec<&mut Worker>)> = Vec::new();
    for worker in workers.iter_mut() {
        match groups.last_mut() {
            Some((idx, group)) if *idx == worker.robot_index => group.push(worker),
            _ => groups.push((worker.robot_index, vec![worker])),
        }
    }

    let rollouts: Result<Vec<RobotRollout>, TrainerError> = groups
        .into_par_iter()
        .map(|(robot_index, mut group)| {
            let robot = &robots[robot_index];
            let k = group.len();
            let mut out = RobotRollout {
                robot_index,
                envs: k,
                bundles: Vec::with_capacity(steps * k),
                actions: Vec::with_capacity(steps * k),
                logprobs: Vec::with_capacity(steps * k),
                rewards: Vec::with_capacity(steps * k),
                values: Vec::with_capacity(steps * k),
                dones: Vec::with_capacity(steps * k),
                timeout_values: Vec::with_capacity(steps * k),
                advantages: Vec::new(),
                returns: Vec::new(),
            };
            for _ in 0..steps {
                let bundles: Vec<&ObservationBundle> =
                    group.iter().map(|w| &w.current_obs).collect();
                let batch = BatchObs::stack(&bundles, include);
                let (dists, values) = params.act_and_value(robot, &batch)?;
                for (w, dist) in group.iter_mut().zip(dists.iter()) {
                    let (action, logprob) = dist.sample(&mut w.action_rng);
                    let (next_obs, outcome) = w.env.step(&action)?;
                    out.bundles.push(w.current_obs.clone());
                    out.actions.push(action);
                    out.logprobs.push(logprob);
                    out.rewards.push(outcome.reward.total);
                    out.dones.push(outcome.done);
                    w.ep_return += outcome.reward.total;
                    w.ep_tracking += outcome.reward.tracking_weighted();
                    w.ep_len += 1;
                    if outcome.done {
                        let coefs = &robot.reward_coefficients;
                        w.finished_episodes.push(EpisodeStats {
                            total_return: w.ep_return,
                            length: w.ep_len,
                            tracking_share: w.ep_tracking
                                / (w.ep_len as f64 * (coefs.t1 + coefs.t2)),
                        });
                        w.ep_return = 0.0;
                        w.ep_len = 0;
                        w.ep_tracking = 0.0;
                        let timeout_value = if outcome.terminal {
                            None
                        } else {
                            Some(critic_value(params, robot, &next_obs)?)
                        };
                        out.timeout_values.push(timeout_value);
                        w.current_obs = w.env.reset();
                    } else {
                        out.timeout_values.push(None);
                        w.current_obs = next_obs;
                    }
                }
                for v in values {
                    out.values.push(v);
                }
            }

            // per-env GAE over strided sequences, bootstrapped by the
            // critic on each env's current observation
            let mut advantages = vec![0.0; out.len()];
            let mut returns = vec![0.0; out.len()];
            for (env_idx, w) in group.iter().enumerate() {
                let idxs: Vec<usize> = (0..steps).map(|t| t * k + env_idx).collect();
                let rewards: Vec<f64> = idxs.iter().map(|&i| out.rewards[i]).collect();
                let values: Vec<f64> = idxs.iter().map(|&i| out.values[i]).collect();
                let dones: Vec<bool> = idxs.iter().map(|&i| out.dones[i]).collect();
                let timeouts: Vec<Option<f64>> =
                    idxs.iter().map(|&i| out.timeout_values[i]).collect();
                let bootstrap = if *dones.last().unwrap_or(&false) {
                    0.0
                } else {
                    critic_value(params, robot, &w.current_obs)?
                };
                let (adv, ret) = compute_gae_truncated(
                    &rewards,
                    &values,
                    &dones,
                    &timeouts,
                    bootstrap,
                    config.gamma,
                    config.gae_lambda,
                )?;
                for (j, &i) in idxs.iter().enumerate() {
                    advantages[i] = adv[j];
                    returns[i] = ret[j];
                }
            }
            out.advantages = advantages;
            out.returns = returns;
            Ok(out)
        })
        .collect();

    let mut robots_out = rollouts?;
    robots_out.sort_by_key(|r| r.robot_index);
    Ok(RolloutBuffer {
        robots: robots_out,
        steps_per_robot: steps * config.envs_per_robot,
    })
}
