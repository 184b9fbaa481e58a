//! Batteries-included gradient audit over the whole op set.
//!
//! Each op gets `trials` random inputs; the reverse-mode gradient is
//! compared coordinate-wise against central differences. Ops with kinks
//! (clamp, min) are sampled away from their non-differentiable points so
//! the finite-difference stencil never straddles one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::grad_check_multi;
use crate::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

/// Outcome of auditing one op.
#[derive(Debug, Clone)]
pub struct OpCheck {
    pub op: &'static str,
    pub trials: usize,
    pub max_rel_err: f64,
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// Random positive weights used to project a tensor output to a scalar
/// so every output coordinate influences the check.
fn projector(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(0.3..1.3)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

fn project(tape: &mut Tape, y: Var, weights: &Tensor) -> Result<Var, TensorError> {
    let w = tape.input(weights.clone());
    let prod = tape.mul(y, w)?;
    Ok(tape.sum_all(prod))
}

type OpBuilder<'a> = dyn Fn(&mut Tape, &[Var]) -> Result<Var, TensorError> + 'a;

fn audit(
    name: &'static str,
    trials: usize,
    h: f64,
    rng: &mut ChaCha8Rng,
    make_inputs: impl Fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    build: &OpBuilder,
) -> Result<OpCheck, TensorError> {
    let mut max_err: f64 = 0.0;
    for _ in 0..trials {
        let inputs = make_inputs(rng);
        let errs = grad_check_multi(build, &inputs, h)?;
        for e in errs {
            max_err = max_err.max(e);
        }
    }
    Ok(OpCheck {
        op: name,
        trials,
        max_rel_err: max_err,
    })
}

/// Run the full per-op gradient audit. `h` is the central-difference
/// step (1e-5 is the calibrated default for f64).
pub fn gradient_suite(trials: usize, h: f64, seed: u64) -> Result<Vec<OpCheck>, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();

    {
        let proj = projector(&mut rng, 3, 2);
        results.push(audit(
            "matmul",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 3, 4), random_tensor(r, 4, 2)],
            &|tape, v| {
                let y = tape.matmul(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 2, 5);
        results.push(audit(
            "add",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5), random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.add(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "sub",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5), random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.sub(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "mul",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5), random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.mul(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "mul_scalar_broadcast",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5), random_tensor(r, 1, 1)],
            &|tape, v| {
                let y = tape.mul(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "neg",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.neg(v[0]);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "tanh",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.tanh(v[0]);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "exp",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.exp(v[0]);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "ln",
            trials,
            h,
            &mut rng,
            |r| {
                let data = (0..10).map(|_| r.gen_range(0.2..2.0)).collect();
                vec![Tensor::new(2, 5, data).expect("shape")]
            },
            &|tape, v| {
                let y = tape.ln(v[0]);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "scale",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 5)],
            &|tape, v| {
                let y = tape.scale(v[0], -1.7);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "clamp",
            trials,
            h,
            &mut rng,
            |r| {
                // keep every coordinate at least 100h away from the kinks
                let data = (0..10)
                    .map(|_| {
                        let mut v: f64 = r.gen_range(-1.5..1.5);
                        for kink in [-0.7, 0.7] {
                            if (v - kink).abs() < 100.0 * 1e-5 {
                                v += 0.01;
                            }
                        }
                        v
                    })
                    .collect();
                vec![Tensor::new(2, 5, data).expect("shape")]
            },
            &|tape, v| {
                let y = tape.clamp(v[0], -0.7, 0.7);
                project(tape, y, &proj)
            },
        )?);
        results.push(audit(
            "min",
            trials,
            h,
            &mut rng,
            |r| {
                let a = random_tensor(r, 2, 5);
                let mut b = random_tensor(r, 2, 5);
                for i in 0..b.len() {
                    if (a.data()[i] - b.data()[i]).abs() < 100.0 * 1e-5 {
                        b.data_mut()[i] += 0.01;
                    }
                }
                vec![a, b]
            },
            &|tape, v| {
                let y = tape.min(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 1, 5);
        results.push(audit(
            "layer_norm",
            trials,
            h,
            &mut rng,
            |r| {
                vec![
                    random_tensor(r, 1, 5),
                    random_tensor(r, 1, 5),
                    random_tensor(r, 1, 5),
                ]
            },
            &|tape, v| {
                let y = tape.layer_norm(v[0], v[1], v[2])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 1, 4);
        results.push(audit(
            "softmax_with_temperature",
            trials,
            h,
            &mut rng,
            |r| {
                let tau = Tensor::scalar(r.gen_range(0.4..1.6));
                vec![random_tensor(r, 1, 4), tau]
            },
            &|tape, v| {
                let y = tape.softmax_temp(v[0], v[1], 0.015)?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 1, 3);
        results.push(audit(
            "reduce_sum_over_set",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 6, 3)],
            &|tape, v| {
                let y = tape.reduce_sum_over_set(v[0])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 2, 3);
        results.push(audit(
            "segment_sum",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 6, 3)],
            &|tape, v| {
                let y = tape.segment_sum(v[0], 3)?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 6, 3);
        results.push(audit(
            "repeat_rows",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 3)],
            &|tape, v| {
                let y = tape.repeat_rows(v[0], 3)?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 2, 5);
        results.push(audit(
            "concat_cols",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 2, 2), random_tensor(r, 2, 3)],
            &|tape, v| {
                let y = tape.concat_cols(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 3, 2);
        results.push(audit(
            "slice_cols",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 3, 5)],
            &|tape, v| {
                let y = tape.slice_cols(v[0], 1, 3)?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 3, 4);
        results.push(audit(
            "add_row",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 3, 4), random_tensor(r, 1, 4)],
            &|tape, v| {
                let y = tape.add_row(v[0], v[1])?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 4, 1);
        results.push(audit(
            "row_sum",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 4, 3)],
            &|tape, v| {
                let y = tape.row_sum(v[0]);
                project(tape, y, &proj)
            },
        )?);
    }
    results.push(audit(
        "sum_all",
        trials,
        h,
        &mut rng,
        |r| vec![random_tensor(r, 3, 3)],
        &|tape, v| Ok(tape.sum_all(v[0])),
    )?);
    results.push(audit(
        "mean_all",
        trials,
        h,
        &mut rng,
        |r| vec![random_tensor(r, 3, 3)],
        &|tape, v| Ok(tape.mean_all(v[0])),
    )?);
    {
        // the sample is data, so it is captured as a constant rather
        // than handed to the checker
        let proj = projector(&mut rng, 1, 1);
        let sample = random_tensor(&mut rng, 1, 5);
        results.push(audit(
            "gaussian_logprob",
            trials,
            h,
            &mut rng,
            |r| {
                let mean = random_tensor(r, 1, 5);
                let std_data = (0..5).map(|_| r.gen_range(0.3..1.8)).collect();
                let std = Tensor::new(1, 5, std_data).expect("shape");
                vec![mean, std]
            },
            &|tape, v| {
                let s = tape.input(sample.clone());
                let y = tape.gaussian_logprob(v[0], v[1], s)?;
                project(tape, y, &proj)
            },
        )?);
    }
    {
        let proj = projector(&mut rng, 3, 4);
        results.push(audit(
            "reshape",
            trials,
            h,
            &mut rng,
            |r| vec![random_tensor(r, 4, 3)],
            &|tape, v| {
                let y = tape.reshape(v[0], 3, 4)?;
                project(tape, y, &proj)
            },
        )?);
    }

    Ok(results)
}
