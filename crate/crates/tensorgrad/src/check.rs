//! Finite-difference gradient checking.
//!
//! The reference is always the central difference
//! `(f(x + h) - f(x - h)) / 2h`, evaluated coordinate by coordinate or
//! along a supplied direction. Relative error uses
//! `|a - n| / max(|a|, |n|, 1)` so near-zero gradients are compared
//! absolutely instead of blowing up.

use crate::tape::{Tape, Var};
use crate::tensor::{Tensor, TensorError};

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Check the reverse-mode gradient of a scalar-valued function of one
/// tensor against central differences, coordinate by coordinate.
/// Returns the maximum relative error over all coordinates.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, TensorError>,
{
    let errs = grad_check_multi(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), h)?;
    Ok(errs[0])
}

/// Coordinate-wise gradient check for a scalar function of several
/// tensors. Returns the max relative error per input tensor.
pub fn grad_check_multi<F>(f: F, inputs: &[Tensor], h: f64) -> Result<Vec<f64>, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |points: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = points.iter().map(|t| tape.input(t.clone())).collect();
        let y = f(&mut tape, &vars)?;
        Ok(tape.value(y).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let y = f(&mut tape, &vars)?;
    tape.backward(y)?;

    let mut errors = Vec::with_capacity(inputs.len());
    for (which, input) in inputs.iter().enumerate() {
        let analytic = tape
            .grad(vars[which])
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(input.rows(), input.cols()));
        let mut max_err: f64 = 0.0;
        for i in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[which].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[which].data_mut()[i] -= h;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            max_err = max_err.max(relative_error(analytic.data()[i], numeric));
        }
        errors.push(max_err);
    }
    Ok(errors)
}

/// Directional gradient check: compares the tape's full gradient
/// projected onto `dirs` against a single central difference along that
/// direction. Two forward evaluations regardless of parameter count.
pub fn directional_grad_check<F>(
    f: F,
    inputs: &[Tensor],
    dirs: &[Tensor],
    h: f64,
) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    assert_eq!(inputs.len(), dirs.len());
    let eval = |points: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = points.iter().map(|t| tape.input(t.clone())).collect();
        let y = f(&mut tape, &vars)?;
        Ok(tape.value(y).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.input(t.clone())).collect();
    let y = f(&mut tape, &vars)?;
    tape.backward(y)?;
    let mut analytic = 0.0;
    for (var, dir) in vars.iter().zip(dirs.iter()) {
        if let Some(g) = tape.grad(*var) {
            analytic += g.flat_dot(dir);
        }
    }

    let shift = |sign: f64| -> Vec<Tensor> {
        inputs
            .iter()
            .zip(dirs.iter())
            .map(|(x, d)| {
                let mut moved = x.clone();
                for (v, dv) in moved.data_mut().iter_mut().zip(d.data().iter()) {
                    *v += sign * h * dv;
                }
                moved
            })
            .collect()
    };
    let numeric = (eval(&shift(1.0))? - eval(&shift(-1.0))?) / (2.0 * h);
    Ok(relative_error(analytic, numeric))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        // f(x) = x^2 at x = 3: analytic 6, numeric 6.
        let err = grad_check(
            |tape, x| {
                let y = tape.mul(x, x)?;
                Ok(y)
            },
            &Tensor::scalar(3.0),
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "err = {err}");
    }
}
