//! Finite-difference oracles for every op, plus the invariants that the
//! policy networks lean on (order-invariant set sums, softmax row sums,
//! gradient accumulation through shared subexpressions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensorgrad::suite::gradient_suite;
use tensorgrad::{grad_check, grad_check_multi, Tape, Tensor};

const H: f64 = 1e-5;

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

#[test]
fn matmul_gradient_vs_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_tensor(&mut rng, 3, 4);
    let b = random_tensor(&mut rng, 4, 2);
    let errs = grad_check_multi(
        |tape, v| {
            let y = tape.matmul(v[0], v[1])?;
            Ok(tape.sum_all(y))
        },
        &[a, b],
        H,
    )
    .unwrap();
    for e in errs {
        assert!(e < 1e-6, "matmul gradient error {e}");
    }
}

#[test]
fn elementwise_gradients_under_1e6() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_tensor(&mut rng, 1, 8);

    for (name, f) in [
        (
            "add",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.add(v, v)?;
                Ok(tape.sum_all(y))
            }) as Box<dyn Fn(&mut Tape, tensorgrad::Var) -> Result<_, _>>,
        ),
        (
            "mul",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.mul(v, v)?;
                Ok(tape.sum_all(y))
            }),
        ),
        (
            "tanh",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.tanh(v);
                Ok(tape.sum_all(y))
            }),
        ),
        (
            "exp",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.exp(v);
                Ok(tape.sum_all(y))
            }),
        ),
        (
            "neg",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.neg(v);
                Ok(tape.sum_all(y))
            }),
        ),
        (
            "scale",
            Box::new(|tape: &mut Tape, v: tensorgrad::Var| {
                let y = tape.scale(v, 2.5);
                Ok(tape.sum_all(y))
            }),
        ),
    ] {
        let err = grad_check(&f, &x, H).unwrap();
        assert!(err < 1e-6, "{name} gradient error {err}");
    }
}

#[test]
fn layer_norm_gradient_on_random_5_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random_tensor(&mut rng, 1, 5);
    let gain = random_tensor(&mut rng, 1, 5);
    let bias = random_tensor(&mut rng, 1, 5);
    let errs = grad_check_multi(
        |tape, v| {
            let y = tape.layer_norm(v[0], v[1], v[2])?;
            Ok(tape.sum_all(y))
        },
        &[x, gain, bias],
        H,
    )
    .unwrap();
    for e in errs {
        assert!(e < 1e-5, "layer_norm gradient error {e}");
    }
}

#[test]
fn softmax_temperature_gradient_on_x_and_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_tensor(&mut rng, 1, 4);
    let tau = Tensor::scalar(1.0);
    let errs = grad_check_multi(
        |tape, v| {
            let s = tape.softmax_temp(v[0], v[1], 0.015)?;
            // weight the outputs so the check is not a constant (rows sum to 1)
            let w = tape.input(Tensor::row(&[0.3, 1.1, -0.4, 0.9]));
            let p = tape.mul(s, w)?;
            Ok(tape.sum_all(p))
        },
        &[x, tau],
        H,
    )
    .unwrap();
    for e in errs {
        assert!(e < 1e-5, "softmax_temp gradient error {e}");
    }
}

#[test]
fn gaussian_logprob_gradient_d5() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mean = random_tensor(&mut rng, 1, 5);
    let std = Tensor::new(1, 5, (0..5).map(|_| rng.gen_range(0.3..1.5)).collect()).unwrap();
    let sample = random_tensor(&mut rng, 1, 5);
    let errs = grad_check_multi(
        |tape, v| {
            let s = tape.input(sample.clone());
            tape.gaussian_logprob(v[0], v[1], s)
        },
        &[mean, std],
        H,
    )
    .unwrap();
    assert!(errs[0] < 1e-5, "mean gradient error {}", errs[0]);
    assert!(errs[1] < 1e-5, "std gradient error {}", errs[1]);
}

#[test]
fn set_sum_identical_under_all_720_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();

    let reference = {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::from_rows(&rows).unwrap());
        let s = tape.reduce_sum_over_set(x).unwrap();
        tape.value(s).clone()
    };

    let mut idx = [0usize, 1, 2, 3, 4, 5];
    let mut count = 0;
    permute(&mut idx, 6, &mut |perm| {
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let mut tape = Tape::new();
        let x = tape.input(Tensor::from_rows(&permuted).unwrap());
        let s = tape.reduce_sum_over_set(x).unwrap();
        assert_eq!(
            tape.value(s).data(),
            reference.data(),
            "permutation {perm:?} changed the set sum bit pattern"
        );
        count += 1;
    });
    assert_eq!(count, 720);
}

fn permute(idx: &mut [usize; 6], k: usize, visit: &mut impl FnMut(&[usize; 6])) {
    if k == 1 {
        visit(idx);
        return;
    }
    for i in 0..k {
        permute(idx, k - 1, visit);
        if k % 2 == 0 {
            idx.swap(i, k - 1);
        } else {
            idx.swap(0, k - 1);
        }
    }
}

#[test]
fn full_op_suite_100_trials_under_1e4() {
    let results = gradient_suite(100, H, 42).unwrap();
    for r in &results {
        assert!(
            r.max_rel_err < 1e-4,
            "{}: max relative error {} over {} trials",
            r.op,
            r.max_rel_err,
            r.trials
        );
    }
    assert!(results.len() >= 20, "suite covers the whole op set");
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(
            vals in proptest::collection::vec(-30.0f64..30.0, 2..12),
            tau in 0.05f64..3.0,
        ) {
            let mut tape = Tape::new();
            let x = tape.input(Tensor::row(&vals));
            let t = tape.input(Tensor::scalar(tau));
            let s = tape.softmax_temp(x, t, 0.015).unwrap();
            let total: f64 = tape.value(s).data().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn set_sum_invariant_to_random_swaps(
            rows in proptest::collection::vec(
                proptest::collection::vec(-5.0f64..5.0, 3),
                2..9,
            ),
            a in 0usize..8,
            b in 0usize..8,
        ) {
            let n = rows.len();
            let (a, b) = (a % n, b % n);
            let mut swapped = rows.clone();
            swapped.swap(a, b);

            let eval = |rs: &[Vec<f64>]| {
                let mut tape = Tape::new();
                let x = tape.input(Tensor::from_rows(rs).unwrap());
                let s = tape.reduce_sum_over_set(x).unwrap();
                tape.value(s).data().to_vec()
            };
            prop_assert_eq!(eval(&rows), eval(&swapped));
        }
    }
}
