//! Adaptive-moment optimizer with global gradient-norm clipping.

use tensorgrad::Tensor;

use crate::policy::PolicyParams;

pub struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &PolicyParams) -> Self {
        let shapes: Vec<(usize, usize)> = params.blocks().iter().map(|(_, t)| t.shape()).collect();
        Self {
            m: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update step. `grads` must be aligned with
    /// `PolicyParams::blocks` order.
    pub fn step(&mut self, params: &mut PolicyParams, grads: &[Tensor], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut idx = 0;
        params.visit_mut(&mut |_, tensor| {
            let g = &grads[idx];
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for k in 0..tensor.len() {
                let gk = g.data()[k];
                m.data_mut()[k] = self.beta1 * m.data()[k] + (1.0 - self.beta1) * gk;
                v.data_mut()[k] = self.beta2 * v.data()[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m.data()[k] / bc1;
                let v_hat = v.data()[k] / bc2;
                tensor.data_mut()[k] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            idx += 1;
        });
        debug_assert_eq!(idx, grads.len());
    }
}

/// Scale gradients in place so the global norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm: f64 = grads
        .iter()
        .map(|g| g.data().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}
