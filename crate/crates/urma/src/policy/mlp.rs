//! Small MLPs as plain parameter structs, bound onto a tape per
//! evaluation. Input layers (the ones that see raw observations or
//! descriptions) carry a LayerNorm after their linear map.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tensorgrad::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Act {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnParams {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LnParams {
    pub fn new(width: usize) -> Self {
        Self {
            gain: Tensor::filled(1, width, 1.0),
            bias: Tensor::zeros(1, width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub w: Tensor,
    pub b: Tensor,
    /// LayerNorm applied after the linear map, before the activation.
    pub ln: Option<LnParams>,
    pub act: Act,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LinearLayer>,
}

/// Orthogonal initialization via modified Gram-Schmidt on a Gaussian
/// draw, scaled by `gain`.
pub fn orthogonal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, gain: f64) -> Tensor {
    let (n, m, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // n >= m: orthonormalize m columns of length n
    let mut cols_data: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for k in 0..m {
        for prev in 0..k {
            let dot: f64 = cols_data[k]
                .iter()
                .zip(cols_data[prev].iter())
                .map(|(a, b)| a * b)
                .sum();
            let (head, tail) = cols_data.split_at_mut(k);
            for (x, p) in tail[0].iter_mut().zip(head[prev].iter()) {
                *x -= dot * p;
            }
        }
        let norm: f64 = cols_data[k].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = if norm < 1e-12 { 1.0 } else { norm };
        for v in &mut cols_data[k] {
            *v /= norm;
        }
    }
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = if transpose {
                cols_data[r][c]
            } else {
                cols_data[c][r]
            };
            out.data_mut()[r * cols + c] = gain * v;
        }
    }
    out
}

impl Mlp {
    /// Build an MLP with the given hidden widths. `input_ln` adds a
    /// LayerNorm after the first linear layer. Hidden layers use tanh
    /// and orthogonal gain sqrt(2); the output layer uses `out_act` and
    /// `out_gain`.
    pub fn new(
        rng: &mut ChaCha8Rng,
        input: usize,
        hidden: &[usize],
        output: usize,
        input_ln: bool,
        out_act: Act,
        out_gain: f64,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input;
        for (i, &width) in hidden.iter().enumerate() {
            layers.push(LinearLayer {
                w: orthogonal(rng, prev, width, std::f64::consts::SQRT_2),
                b: Tensor::zeros(1, width),
                ln: (i == 0 && input_ln).then(|| LnParams::new(width)),
                act: Act::Tanh,
            });
            prev = width;
        }
        layers.push(LinearLayer {
            w: orthogonal(rng, prev, output, out_gain),
            b: Tensor::zeros(1, output),
            ln: (hidden.is_empty() && input_ln).then(|| LnParams::new(output)),
            act: out_act,
        });
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.w.len()
                    + l.b.len()
                    + l.ln.as_ref().map_or(0, |ln| ln.gain.len() + ln.bias.len())
            })
            .sum()
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Tensor)) {
        for (i, layer) in self.layers.iter().enumerate() {
            f(format!("{prefix}.l{i}.w"), &layer.w);
            f(format!("{prefix}.l{i}.b"), &layer.b);
            if let Some(ln) = &layer.ln {
                f(format!("{prefix}.l{i}.ln_gain"), &ln.gain);
                f(format!("{prefix}.l{i}.ln_bias"), &ln.bias);
            }
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut Tensor)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            f(format!("{prefix}.l{i}.w"), &mut layer.w);
            f(format!("{prefix}.l{i}.b"), &mut layer.b);
            if let Some(ln) = &mut layer.ln {
                f(format!("{prefix}.l{i}.ln_gain"), &mut ln.gain);
                f(format!("{prefix}.l{i}.ln_bias"), &mut ln.bias);
            }
        }
    }

    /// Place every parameter on the tape (in `visit` order, appending
    /// the created vars to `sink`) and return the bound network.
    pub fn bind(&self, tape: &mut Tape, sink: &mut Vec<Var>) -> BoundMlp {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let w = tape.input(layer.w.clone());
                let b = tape.input(layer.b.clone());
                sink.push(w);
                sink.push(b);
                let ln = layer.ln.as_ref().map(|ln| {
                    let gain = tape.input(ln.gain.clone());
                    let bias = tape.input(ln.bias.clone());
                    sink.push(gain);
                    sink.push(bias);
                    (gain, bias)
                });
                BoundLayer {
                    w,
                    b,
                    ln,
                    act: layer.act,
                }
            })
            .collect();
        BoundMlp { layers }
    }
}

pub struct BoundLayer {
    w: Var,
    b: Var,
    ln: Option<(Var, Var)>,
    act: Act,
}

pub struct BoundMlp {
    layers: Vec<BoundLayer>,
}

impl BoundMlp {
    pub fn apply(&self, tape: &mut Tape, mut x: Var) -> Result<Var, TensorError> {
        for layer in &self.layers {
            x = tape.matmul(x, layer.w)?;
            x = tape.add_row(x, layer.b)?;
            if let Some((gain, bias)) = layer.ln {
                x = tape.layer_norm(x, gain, bias)?;
            }
            if layer.act == Act::Tanh {
                x = tape.tanh(x);
            }
        }
        Ok(x)
    }
}

/// Random unit direction over a list of tensors, for directional
/// gradient checks; scaled to unit global norm.
pub fn random_direction(rng: &mut ChaCha8Rng, shapes: &[(usize, usize)]) -> Vec<Tensor> {
    let mut dirs: Vec<Tensor> = shapes
        .iter()
        .map(|&(r, c)| {
            let data = (0..r * c)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            Tensor::new(r, c, data).expect("shape")
        })
        .collect();
    let norm: f64 = dirs
        .iter()
        .map(|t| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
        .max(1e-12);
    for d in &mut dirs {
        for v in d.data_mut() {
            *v /= norm;
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn orthogonal_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = orthogonal(&mut rng, 8, 4, 1.0);
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..8).map(|r| m.get(r, a) * m.get(r, b)).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "col {a} . col {b} = {dot}");
            }
        }
    }

    #[test]
    fn one_linear_layer_with_bias_counts_20_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::new(&mut rng, 3, &[], 5, false, Act::Identity, 1.0);
        assert_eq!(mlp.param_count(), 20);
    }

    #[test]
    fn bind_order_matches_visit_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new(&mut rng, 4, &[6], 2, true, Act::Identity, 1.0);
        let mut names = Vec::new();
        mlp.visit("net", &mut |name, _| names.push(name));
        let mut tape = Tape::new();
        let mut vars = Vec::new();
        mlp.bind(&mut tape, &mut vars);
        assert_eq!(names.len(), vars.len());
    }
}
