//! Clipped-surrogate PPO update over mini-batches that draw a fixed
//! sample count from every robot, with per-mini-batch advantage
//! normalization, global gradient-norm clipping, and a linearly
//! annealed learning rate.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tensorgrad::{Tape, Tensor};

use crate::morphology::RobotSpec;
use crate::policy::{BatchObs, PolicyParams};
use crate::trainer::adam::{clip_grad_norm, Adam};
use crate::trainer::rollout::RolloutBuffer;
use crate::trainer::{TrainConfig, TrainerError};

#[derive(Debug, Clone, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub lr: f64,
    pub minibatches: usize,
}

struct ChunkResult {
    grads: Vec<Tensor>,
    policy_loss_sum: f64,
    value_loss_sum: f64,
    entropy_sum: f64,
    clipped: usize,
    samples: usize,
}

/// One robot's slice of a mini-batch: indices into its rollout arrays.
struct ChunkSpec<'a> {
    robot: &'a RobotSpec,
    rollout_index: usize,
    indices: Vec<usize>,
}

fn evaluate_chunk(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    spec: &ChunkSpec,
    adv_mean: f64,
    adv_std: f64,
    total_samples: usize,
    config: &TrainConfig,
) -> Result<ChunkResult, TrainerError> {
    let rollout = &buffer.robots[spec.rollout_index];
    let include = params.config().include_mass_dims;
    let b = spec.indices.len();
    let joints = rollout.bundles[0].joints;

    let bundles: Vec<_> = spec.indices.iter().map(|&i| &rollout.bundles[i]).collect();
    let batch = BatchObs::stack(&bundles, include);
    let actions = Tensor::new(
        b,
        joints,
        spec.indices
            .iter()
            .flat_map(|&i| rollout.actions[i].iter().copied())
            .collect(),
    )
    .expect("shape");
    let old_logprob = Tensor::new(
        b,
        1,
        spec.indices.iter().map(|&i| rollout.logprobs[i]).collect(),
    )
    .expect("shape");
    let advantages = Tensor::new(
        b,
        1,
        spec.indices
            .iter()
            .map(|&i| (rollout.advantages[i] - adv_mean) / adv_std)
            .collect(),
    )
    .expect("shape");
    let returns = Tensor::new(
        b,
        1,
        spec.indices.iter().map(|&i| rollout.returns[i]).collect(),
    )
    .expect("shape");

    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let (mean, std) = bound.actor(&mut tape, spec.robot, &batch)?;
    let action_var = tape.input(actions);
    let logprob = tape.gaussian_logprob(mean, std, action_var)?;
    let old_lp = tape.input(old_logprob);
    let log_ratio = tape.sub(logprob, old_lp)?;
    let ratio = tape.exp(log_ratio);
    let adv = tape.input(advantages);
    let surr_unclipped = tape.mul(ratio, adv)?;
    let ratio_clipped = tape.clamp(ratio, 1.0 - config.clip_range, 1.0 + config.clip_range);
    let surr_clipped = tape.mul(ratio_clipped, adv)?;
    let surrogate = tape.min(surr_unclipped, surr_clipped)?;
    let surrogate_sum = tape.sum_all(surrogate);
    let policy_loss_sum = tape.neg(surrogate_sum);

    let value = bound.value(&mut tape, spec.robot, &batch)?;
    let ret = tape.input(returns);
    let value_err = tape.sub(value, ret)?;
    let value_sq = tape.mul(value_err, value_err)?;
    let value_sum = tape.sum_all(value_sq);
    let value_loss_sum = tape.scale(value_sum, 0.5);

    // diagonal Gaussian entropy: sum of log stds plus a constant
    let log_std = tape.ln(std);
    let entropy_rows = tape.row_sum(log_std);
    let entropy_sum = tape.sum_all(entropy_rows);

    let weighted_value = tape.scale(value_loss_sum, config.value_coef);
    let weighted_entropy = tape.scale(entropy_sum, -config.entropy_coef);
    let partial = tape.add(policy_loss_sum, weighted_value)?;
    let loss_sum = tape.add(partial, weighted_entropy)?;
    let loss = tape.scale(loss_sum, 1.0 / total_samples as f64);

    let loss_value = tape.value(loss).item();
    if !loss_value.is_finite() {
        return Err(TrainerError::NonFiniteLoss {
            robot: spec.robot.name.clone(),
            detail: format!(
                "policy {:.6e} value {:.6e}",
                tape.value(policy_loss_sum).item(),
                tape.value(value_loss_sum).item()
            ),
        });
    }

    let clipped = tape
        .value(ratio)
        .data()
        .iter()
        .filter(|r| (**r - 1.0).abs() > config.clip_range)
        .count();
    let policy_loss = tape.value(policy_loss_sum).item();
    let value_loss = tape.value(value_loss_sum).item();
    let entropy_const = 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let entropy = tape.value(entropy_sum).item() + (b * joints) as f64 * entropy_const;

    tape.backward(loss)?;
    let grads: Vec<Tensor> = bound
        .param_vars()
        .iter()
        .zip(params.blocks())
        .map(|(var, (_, t))| {
            tape.grad(*var)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))
        })
        .collect();

    Ok(ChunkResult {
        grads,
        policy_loss_sum: policy_loss,
        value_loss_sum: value_loss,
        entropy_sum: entropy,
        clipped,
        samples: b,
    })
}

/// Run the configured number of epochs over the buffer and apply the
/// optimizer steps in place. `progress` in [0, 1] drives the linear
/// learning-rate anneal (`lr = lr_scale * lr_initial * (1 - progress)`).
pub fn ppo_update(
    params: &mut PolicyParams,
    buffer: &RolloutBuffer,
    robots: &[RobotSpec],
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
    config: &TrainConfig,
    progress: f64,
    lr_scale: f64,
) -> Result<UpdateStats, TrainerError> {
    let per_robot = buffer.steps_per_robot;
    let mb_size = config.minibatch_per_robot.min(per_robot).max(1);
    let num_minibatches = (per_robot / mb_size).max(1);
    let lr = lr_scale * config.lr_initial * (1.0 - progress).max(0.0);

    let mut stats = UpdateStats {
        lr,
        ..Default::default()
    };
    let mut stat_samples = 0usize;

    for _ in 0..config.epochs {
        // independent shuffle within every robot's samples
        let orders: Vec<Vec<usize>> = buffer
            .robots
            .iter()
            .map(|r| {
                let mut idx: Vec<usize> = (0..r.len()).collect();
                idx.shuffle(rng);
                idx
            })
            .collect();

        for mb in 0..num_minibatches {
            // every mini-batch contains the fixed per-robot sample count
            // from every robot
            let chunks: Vec<ChunkSpec> = buffer
                .robots
                .iter()
                .enumerate()
                .map(|(ri, rollout)| ChunkSpec {
                    robot: &robots[rollout.robot_index],
                    rollout_index: ri,
                    indices: orders[ri][mb * mb_size..(mb + 1) * mb_size].to_vec(),
                })
                .collect();

            // advantage normalization over the whole mini-batch
            let mut acc = 0.0;
            let mut acc_sq = 0.0;
            let mut n = 0.0;
            for chunk in &chunks {
                let rollout = &buffer.robots[chunk.rollout_index];
                for &i in &chunk.indices {
                    acc += rollout.advantages[i];
                    acc_sq += rollout.advantages[i] * rollout.advantages[i];
                    n += 1.0;
                }
            }
            let adv_mean = acc / n;
            let adv_std = ((acc_sq / n - adv_mean * adv_mean).max(0.0)).sqrt() + 1e-8;
            let total_samples = n as usize;

            let results: Result<Vec<ChunkResult>, TrainerError> = chunks
                .par_iter()
                .map(|chunk| {
                    evaluate_chunk(
                        params,
                        buffer,
                        chunk,
                        adv_mean,
                        adv_std,
                        total_samples,
                        config,
                    )
                })
                .collect();
            let results = results?;

            // merge gradients in robot order (fixed reduction order)
            let mut grads: Vec<Tensor> = params
                .blocks()
                .iter()
                .map(|(_, t)| Tensor::zeros(t.rows(), t.cols()))
                .collect();
            for r in &results {
                for (g, rg) in grads.iter_mut().zip(r.grads.iter()) {
                    for (a, b) in g.data_mut().iter_mut().zip(rg.data().iter()) {
                        *a += b;
                    }
                }
                stats.policy_loss += r.policy_loss_sum;
                stats.value_loss += r.value_loss_sum;
                stats.entropy += r.entropy_sum;
                stats.clip_fraction += r.clipped as f64;
                stat_samples += r.samples;
            }

            let norm = clip_grad_norm(&mut grads, config.max_grad_norm);
            stats.grad_norm = stats.grad_norm.max(norm);
            adam.step(params, &grads, lr);
            stats.minibatches += 1;
        }
    }

    if stat_samples > 0 {
        stats.policy_loss /= stat_samples as f64;
        stats.value_loss /= stat_samples as f64;
        stats.entropy /= stat_samples as f64;
        stats.clip_fraction /= stat_samples as f64;
    }
    Ok(stats)
}
