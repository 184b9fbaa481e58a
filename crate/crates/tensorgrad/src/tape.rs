use crate::tensor::{pairwise_tree_sum, Tensor, TensorError};
use crate::LAYER_NORM_EPS;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Exp(Var),
    Ln(Var),
    Tanh(Var),
    Scale(Var, f64),
    AddConst(Var),
    AddRow(Var, Var),
    LayerNorm { x: Var, gain: Var, bias: Var },
    SoftmaxTemp { x: Var, tau: Var, eps: f64 },
    SegmentSum { x: Var, group: usize },
    RepeatRows { x: Var, times: usize },
    ConcatCols(Var, Var),
    SliceCols { x: Var, start: usize, end: usize },
    Reshape(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Min(Var, Var),
    RowSum(Var),
    SumAll(Var),
    MeanAll(Var),
    GaussianLogProb { mean: Var, std: Var, sample: Var },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Wengert list: operations recorded in execution order, replayed in
/// exact reverse by [`Tape::backward`]. Adjoints accumulate, so a value
/// feeding several consumers receives every contribution.
///
/// One tape per worker; forward values are retained until backward has
/// run (nothing on a tape is mutated in place).
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

fn dgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a leaf value (input, parameter, or constant).
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last backward target w.r.t. `v`, if any path
    /// reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    // ---- forward ops ----------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (m, ka) = self.shape(a);
        let (kb, n) = self.shape(b);
        if ka != kb {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: (m, ka),
                rhs: (kb, n),
            });
        }
        let mut out = Tensor::zeros(m, n);
        dgemm(
            m,
            ka,
            n,
            1.0,
            self.nodes[a.0].value.data(),
            ka as isize,
            1,
            self.nodes[b.0].value.data(),
            n as isize,
            1,
            0.0,
            out.data_mut(),
        );
        Ok(self.push(Op::MatMul(a, b), out))
    }

    fn binary_elementwise(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
    ) -> Result<(usize, usize), TensorError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa == sb || sa == (1, 1) || sb == (1, 1) {
            Ok(if sa == (1, 1) { sb } else { sa })
        } else {
            Err(TensorError::ShapeMismatch {
                op: op_name,
                lhs: sa,
                rhs: sb,
            })
        }
    }

    fn broadcast_zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let ta = &self.nodes[a.0].value;
        let tb = &self.nodes[b.0].value;
        if ta.is_scalar() && !tb.is_scalar() {
            let s = ta.item();
            tb.map(|v| f(s, v))
        } else if tb.is_scalar() && !ta.is_scalar() {
            let s = tb.item();
            ta.map(|v| f(v, s))
        } else {
            let data = ta
                .data()
                .iter()
                .zip(tb.data().iter())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(ta.rows(), ta.cols(), data).expect("shapes checked")
        }
    }

    /// Elementwise sum; equal shapes or scalar-vs-tensor broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_elementwise("add", a, b)?;
        let out = self.broadcast_zip(a, b, |x, y| x + y);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_elementwise("sub", a, b)?;
        let out = self.broadcast_zip(a, b, |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise (Hadamard) product with the same broadcasting rule.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary_elementwise("mul", a, b)?;
        let out = self.broadcast_zip(a, b, |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let out = self.nodes[x.0].value.map(|v| -v);
        self.push(Op::Neg(x), out)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.nodes[x.0].value.map(f64::exp);
        self.push(Op::Exp(x), out)
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let out = self.nodes[x.0].value.map(f64::ln);
        self.push(Op::Ln(x), out)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.nodes[x.0].value.map(f64::tanh);
        self.push(Op::Tanh(x), out)
    }

    /// Multiply by a compile-time constant.
    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.nodes[x.0].value.map(|v| v * c);
        self.push(Op::Scale(x, c), out)
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let out = self.nodes[x.0].value.map(|v| v + c);
        self.push(Op::AddConst(x), out)
    }

    /// Broadcast a 1xC row over every row of an RxC matrix (bias add).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let (r, c) = self.shape(x);
        let (rr, rc) = self.shape(row);
        if rr != 1 || rc != c {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                lhs: (r, c),
                rhs: (rr, rc),
            });
        }
        let xv = &self.nodes[x.0].value;
        let rv = &self.nodes[row.0].value;
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(xv.get(i, j) + rv.get(0, j));
            }
        }
        let out = Tensor::new(r, c, data).expect("shape");
        Ok(self.push(Op::AddRow(x, row), out))
    }

    /// Per-row standardization followed by affine gain/bias, with the
    /// variance stabilizer [`LAYER_NORM_EPS`] inside the square root.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, TensorError> {
        let (r, c) = self.shape(x);
        if c < 2 {
            return Err(TensorError::LayerNormWidth { width: c });
        }
        for (param_name, v) in [("gain", gain), ("bias", bias)] {
            let s = self.shape(v);
            if s != (1, c) {
                return Err(TensorError::Invalid {
                    op: "layer_norm",
                    msg: format!("{param_name} must be 1x{c}, got {s:?}"),
                });
            }
        }
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gain.0].value;
        let bv = &self.nodes[bias.0].value;
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = xv.row_slice(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for j in 0..c {
                data.push((row[j] - mean) * inv * gv.get(0, j) + bv.get(0, j));
            }
        }
        let out = Tensor::new(r, c, data).expect("shape");
        Ok(self.push(Op::LayerNorm { x, gain, bias }, out))
    }

    /// Row-wise softmax of `x / (tau + eps)`, stabilized by subtracting
    /// the row max. `tau` is a live 1x1 tensor on the tape, so gradients
    /// reach both the logits and the temperature.
    pub fn softmax_temp(&mut self, x: Var, tau: Var, eps: f64) -> Result<Var, TensorError> {
        let (r, c) = self.shape(x);
        if self.shape(tau) != (1, 1) {
            return Err(TensorError::Invalid {
                op: "softmax_temp",
                msg: format!("tau must be a scalar, got {:?}", self.shape(tau)),
            });
        }
        let t = self.nodes[tau.0].value.item() + eps;
        let xv = &self.nodes[x.0].value;
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = xv.row_slice(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            let mut exps = Vec::with_capacity(c);
            for &v in row {
                let e = ((v - max) / t).exp();
                exps.push(e);
                denom += e;
            }
            for e in exps {
                data.push(e / denom);
            }
        }
        let out = Tensor::new(r, c, data).expect("shape");
        Ok(self.push(Op::SoftmaxTemp { x, tau, eps }, out))
    }

    /// Sum consecutive groups of `group` rows down to one row each:
    /// `[S*group x C] -> [S x C]`.
    ///
    /// Within a group, each output entry is the pairwise-tree sum of the
    /// group's entries taken in canonical (value-sorted) order, so any
    /// permutation of the rows produces bit-identical output.
    pub fn segment_sum(&mut self, x: Var, group: usize) -> Result<Var, TensorError> {
        let (r, c) = self.shape(x);
        if group == 0 || r == 0 {
            return Err(TensorError::EmptySet { op: "segment_sum" });
        }
        if r % group != 0 {
            return Err(TensorError::Invalid {
                op: "segment_sum",
                msg: format!("{r} rows do not split into groups of {group}"),
            });
        }
        let segs = r / group;
        let xv = &self.nodes[x.0].value;
        let mut data = Vec::with_capacity(segs * c);
        let mut bucket = vec![0.0; group];
        for s in 0..segs {
            for j in 0..c {
                for g in 0..group {
                    bucket[g] = xv.get(s * group + g, j);
                }
                bucket.sort_by(|a, b| a.total_cmp(b));
                data.push(pairwise_tree_sum(&mut bucket));
            }
        }
        let out = Tensor::new(segs, c, data).expect("shape");
        Ok(self.push(Op::SegmentSum { x, group }, out))
    }

    /// Sum all rows of a JxC set down to a single 1xC row, order-invariant.
    pub fn reduce_sum_over_set(&mut self, x: Var) -> Result<Var, TensorError> {
        let (r, _) = self.shape(x);
        self.segment_sum(x, r)
    }

    /// Tile each row `times` times: `[S x C] -> [S*times x C]`.
    pub fn repeat_rows(&mut self, x: Var, times: usize) -> Result<Var, TensorError> {
        if times == 0 {
            return Err(TensorError::EmptySet { op: "repeat_rows" });
        }
        let (r, c) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let mut data = Vec::with_capacity(r * times * c);
        for i in 0..r {
            for _ in 0..times {
                data.extend_from_slice(xv.row_slice(i));
            }
        }
        let out = Tensor::new(r * times, c, data).expect("shape");
        Ok(self.push(Op::RepeatRows { x, times }, out))
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ra != rb {
            return Err(TensorError::ShapeMismatch {
                op: "concat_cols",
                lhs: (ra, ca),
                rhs: (rb, cb),
            });
        }
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            data.extend_from_slice(av.row_slice(i));
            data.extend_from_slice(bv.row_slice(i));
        }
        let out = Tensor::new(ra, ca + cb, data).expect("shape");
        Ok(self.push(Op::ConcatCols(a, b), out))
    }

    pub fn concat_cols3(&mut self, a: Var, b: Var, c: Var) -> Result<Var, TensorError> {
        let ab = self.concat_cols(a, b)?;
        self.concat_cols(ab, c)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let (r, c) = self.shape(x);
        if start >= end || end > c {
            return Err(TensorError::Invalid {
                op: "slice_cols",
                msg: format!("slice {start}..{end} out of range for width {c}"),
            });
        }
        let xv = &self.nodes[x.0].value;
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&xv.row_slice(i)[start..end]);
        }
        let out = Tensor::new(r, end - start, data).expect("shape");
        Ok(self.push(Op::SliceCols { x, start, end }, out))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        let out = self.nodes[x.0].value.reshaped(rows, cols)?;
        Ok(self.push(Op::Reshape(x), out))
    }

    /// Elementwise clamp; gradient is 1 strictly inside `(lo, hi)`, 0 outside.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let out = self.nodes[x.0].value.map(|v| v.clamp(lo, hi));
        self.push(Op::Clamp { x, lo, hi }, out)
    }

    /// Elementwise minimum; the gradient follows the selected branch
    /// (ties go to the left argument).
    pub fn min(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(TensorError::ShapeMismatch {
                op: "min",
                lhs: sa,
                rhs: sb,
            });
        }
        let out = self.broadcast_zip(a, b, |x, y| if x <= y { x } else { y });
        Ok(self.push(Op::Min(a, b), out))
    }

    /// Sum along each row: `[R x C] -> [R x 1]`.
    pub fn row_sum(&mut self, x: Var) -> Var {
        let (r, _c) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let data = (0..r).map(|i| xv.row_slice(i).iter().sum()).collect();
        let out = Tensor::new(r, 1, data).expect("shape");
        self.push(Op::RowSum(x), out)
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let total: f64 = self.nodes[x.0].value.data().iter().sum();
        self.push(Op::SumAll(x), Tensor::scalar(total))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].value.len().max(1);
        let total: f64 = self.nodes[x.0].value.data().iter().sum();
        self.push(Op::MeanAll(x), Tensor::scalar(total / n as f64))
    }

    /// Per-row diagonal-Gaussian log density, summed over the row:
    /// `[R x C] -> [R x 1]`. Gradients flow to `mean` and `std`; the
    /// sample is treated as data.
    pub fn gaussian_logprob(
        &mut self,
        mean: Var,
        std: Var,
        sample: Var,
    ) -> Result<Var, TensorError> {
        let sm = self.shape(mean);
        for (v, _name) in [(std, "std"), (sample, "sample")] {
            if self.shape(v) != sm {
                return Err(TensorError::ShapeMismatch {
                    op: "gaussian_logprob",
                    lhs: sm,
                    rhs: self.shape(v),
                });
            }
        }
        let sv = &self.nodes[std.0].value;
        if let Some((index, &value)) = sv.data().iter().enumerate().find(|(_, v)| **v <= 0.0) {
            return Err(TensorError::NonPositiveStd { value, index });
        }
        let mv = &self.nodes[mean.0].value;
        let xv = &self.nodes[sample.0].value;
        let (r, c) = sm;
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_78;
        let mut data = Vec::with_capacity(r);
        for i in 0..r {
            let mut lp = 0.0;
            for j in 0..c {
                let z = (xv.get(i, j) - mv.get(i, j)) / sv.get(i, j);
                lp += -0.5 * z * z - sv.get(i, j).ln() - HALF_LN_2PI;
            }
            data.push(lp);
        }
        let out = Tensor::new(r, 1, data).expect("shape");
        Ok(self.push(Op::GaussianLogProb { mean, std, sample }, out))
    }

    // ---- backward --------------------------------------------------------

    /// Reverse sweep from a scalar target. Each node's adjoint
    /// accumulates every downstream contribution before its own rule
    /// fires (guaranteed by reverse execution order).
    pub fn backward(&mut self, target: Var) -> Result<(), TensorError> {
        if !self.nodes[target.0].value.is_scalar() {
            return Err(TensorError::Invalid {
                op: "backward",
                msg: format!(
                    "target must be scalar, got {:?}",
                    self.nodes[target.0].value.shape()
                ),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[target.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=target.0).rev() {
            let Some(out_grad) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &out_grad, &mut grads)?;
            grads[idx] = Some(out_grad);
        }
        self.grads = grads;
        Ok(())
    }

    fn acc_into(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(shape.0, shape.1));
        }
        slot.as_mut().unwrap()
    }

    fn add_scaled(
        grads: &mut [Option<Tensor>],
        v: Var,
        shape: (usize, usize),
        contrib: impl Fn(usize) -> f64,
    ) {
        let g = Self::acc_into(grads, v, shape);
        for (i, slot) in g.data_mut().iter_mut().enumerate() {
            *slot += contrib(i);
        }
    }

    /// Accumulate an elementwise contribution that may need to collapse
    /// onto a scalar operand (the broadcast case).
    fn add_broadcast(
        grads: &mut [Option<Tensor>],
        v: Var,
        v_shape: (usize, usize),
        contrib: &[f64],
    ) {
        if v_shape == (1, 1) && contrib.len() > 1 {
            let total: f64 = contrib.iter().sum();
            let g = Self::acc_into(grads, v, (1, 1));
            g.data_mut()[0] += total;
        } else {
            Self::add_scaled(grads, v, v_shape, |i| contrib[i]);
        }
    }

    fn propagate(
        &self,
        idx: usize,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), TensorError> {
        let node = &self.nodes[idx];
        let out = &node.value;
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(a);
                let (_, n) = self.shape(b);
                {
                    let bv = self.nodes[b.0].value.data().to_vec();
                    let ga = Self::acc_into(grads, a, (m, k));
                    // dA += dC * B^T
                    dgemm(m, n, k, 1.0, g.data(), n as isize, 1, &bv, 1, n as isize, 1.0, ga.data_mut());
                }
                {
                    let av = self.nodes[a.0].value.data().to_vec();
                    let gb = Self::acc_into(grads, b, (k, n));
                    // dB += A^T * dC
                    dgemm(k, m, n, 1.0, &av, 1, k as isize, g.data(), n as isize, 1, 1.0, gb.data_mut());
                }
            }
            Op::Add(a, b) => {
                Self::add_broadcast(grads, a, self.shape(a), g.data());
                Self::add_broadcast(grads, b, self.shape(b), g.data());
            }
            Op::Sub(a, b) => {
                Self::add_broadcast(grads, a, self.shape(a), g.data());
                let negated: Vec<f64> = g.data().iter().map(|v| -v).collect();
                Self::add_broadcast(grads, b, self.shape(b), &negated);
            }
            Op::Mul(a, b) => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                let read = |t: &Tensor, i: usize| {
                    if t.is_scalar() {
                        t.item()
                    } else {
                        t.data()[i]
                    }
                };
                let ca: Vec<f64> = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &gv)| gv * read(bv, i))
                    .collect();
                let cb: Vec<f64> = g
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &gv)| gv * read(av, i))
                    .collect();
                Self::add_broadcast(grads, a, self.shape(a), &ca);
                Self::add_broadcast(grads, b, self.shape(b), &cb);
            }
            Op::Neg(x) => {
                Self::add_scaled(grads, x, self.shape(x), |i| -g.data()[i]);
            }
            Op::Exp(x) => {
                let y = out.data();
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i] * y[i]);
            }
            Op::Ln(x) => {
                let xv = self.nodes[x.0].value.data();
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i] / xv[i]);
            }
            Op::Tanh(x) => {
                let y = out.data();
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i] * (1.0 - y[i] * y[i]));
            }
            Op::Scale(x, c) => {
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i] * c);
            }
            Op::AddConst(x) => {
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i]);
            }
            Op::AddRow(x, row) => {
                let (r, c) = self.shape(x);
                Self::add_scaled(grads, x, (r, c), |i| g.data()[i]);
                let gr = Self::acc_into(grads, row, (1, c));
                for i in 0..r {
                    for j in 0..c {
                        gr.data_mut()[j] += g.get(i, j);
                    }
                }
            }
            Op::LayerNorm { x, gain, bias } => {
                self.layer_norm_backward(x, gain, bias, g, grads);
            }
            Op::SoftmaxTemp { x, tau, eps } => {
                let (r, c) = self.shape(x);
                let t = self.nodes[tau.0].value.item() + eps;
                let xv = &self.nodes[x.0].value;
                let s = out;
                let mut gx = vec![0.0; r * c];
                let mut gt = 0.0;
                for i in 0..r {
                    let mut dot = 0.0;
                    for j in 0..c {
                        dot += g.get(i, j) * s.get(i, j);
                    }
                    for j in 0..c {
                        // dL/du_j with u = x/t, then chain through u.
                        let du = s.get(i, j) * (g.get(i, j) - dot);
                        gx[i * c + j] = du / t;
                        gt += du * (-xv.get(i, j) / (t * t));
                    }
                }
                Self::add_scaled(grads, x, (r, c), |i| gx[i]);
                let gtau = Self::acc_into(grads, tau, (1, 1));
                gtau.data_mut()[0] += gt;
            }
            Op::SegmentSum { x, group } => {
                let (r, c) = self.shape(x);
                Self::add_scaled(grads, x, (r, c), |i| {
                    let row = i / c;
                    let col = i % c;
                    g.get(row / group, col)
                });
            }
            Op::RepeatRows { x, times } => {
                let (r, c) = self.shape(x);
                let gx = Self::acc_into(grads, x, (r, c));
                for i in 0..r {
                    for rep in 0..times {
                        for j in 0..c {
                            gx.data_mut()[i * c + j] += g.get(i * times + rep, j);
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let (ra, ca) = self.shape(a);
                let (_, cb) = self.shape(b);
                let ga = Self::acc_into(grads, a, (ra, ca));
                for i in 0..ra {
                    for j in 0..ca {
                        ga.data_mut()[i * ca + j] += g.get(i, j);
                    }
                }
                let gb = Self::acc_into(grads, b, (ra, cb));
                for i in 0..ra {
                    for j in 0..cb {
                        gb.data_mut()[i * cb + j] += g.get(i, ca + j);
                    }
                }
            }
            Op::SliceCols { x, start, end } => {
                let (r, c) = self.shape(x);
                let gx = Self::acc_into(grads, x, (r, c));
                for i in 0..r {
                    for j in start..end {
                        gx.data_mut()[i * c + j] += g.get(i, j - start);
                    }
                }
            }
            Op::Reshape(x) => {
                let shape = self.shape(x);
                Self::add_scaled(grads, x, shape, |i| g.data()[i]);
            }
            Op::Clamp { x, lo, hi } => {
                let xv = self.nodes[x.0].value.data();
                Self::add_scaled(grads, x, self.shape(x), |i| {
                    if xv[i] > lo && xv[i] < hi {
                        g.data()[i]
                    } else {
                        0.0
                    }
                });
            }
            Op::Min(a, b) => {
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                Self::add_scaled(grads, a, self.shape(a), |i| {
                    if av[i] <= bv[i] {
                        g.data()[i]
                    } else {
                        0.0
                    }
                });
                Self::add_scaled(grads, b, self.shape(b), |i| {
                    if av[i] <= bv[i] {
                        0.0
                    } else {
                        g.data()[i]
                    }
                });
            }
            Op::RowSum(x) => {
                let (_, c) = self.shape(x);
                Self::add_scaled(grads, x, self.shape(x), |i| g.data()[i / c]);
            }
            Op::SumAll(x) => {
                let gv = g.item();
                Self::add_scaled(grads, x, self.shape(x), |_| gv);
            }
            Op::MeanAll(x) => {
                let n = self.nodes[x.0].value.len().max(1) as f64;
                let gv = g.item() / n;
                Self::add_scaled(grads, x, self.shape(x), |_| gv);
            }
            Op::GaussianLogProb { mean, std, sample } => {
                let (r, c) = self.shape(mean);
                let mv = &self.nodes[mean.0].value;
                let sv = &self.nodes[std.0].value;
                let xv = &self.nodes[sample.0].value;
                let gm = Self::acc_into(grads, mean, (r, c));
                for i in 0..r {
                    for j in 0..c {
                        let s = sv.get(i, j);
                        let d = xv.get(i, j) - mv.get(i, j);
                        gm.data_mut()[i * c + j] += g.get(i, 0) * d / (s * s);
                    }
                }
                let gs = Self::acc_into(grads, std, (r, c));
                for i in 0..r {
                    for j in 0..c {
                        let s = sv.get(i, j);
                        let d = xv.get(i, j) - mv.get(i, j);
                        gs.data_mut()[i * c + j] += g.get(i, 0) * (d * d / (s * s * s) - 1.0 / s);
                    }
                }
            }
        }
        Ok(())
    }

    fn layer_norm_backward(
        &self,
        x: Var,
        gain: Var,
        bias: Var,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let (r, c) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gain.0].value;
        let n = c as f64;

        let mut gx = vec![0.0; r * c];
        let mut ggain = vec![0.0; c];
        let mut gbias = vec![0.0; c];
        for i in 0..r {
            let row = xv.row_slice(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            // dL/dxhat, plus the two row reductions the chain rule needs.
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            let mut dxhat = vec![0.0; c];
            for j in 0..c {
                let xhat = (row[j] - mean) * inv;
                let d = g.get(i, j) * gv.get(0, j);
                dxhat[j] = d;
                sum_dxhat += d;
                sum_dxhat_xhat += d * xhat;
                ggain[j] += g.get(i, j) * xhat;
                gbias[j] += g.get(i, j);
            }
            for j in 0..c {
                let xhat = (row[j] - mean) * inv;
                gx[i * c + j] = inv * (dxhat[j] - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
            }
        }
        Self::add_scaled(grads, x, (r, c), |i| gx[i]);
        Self::add_scaled(grads, gain, (1, c), |i| ggain[i]);
        Self::add_scaled(grads, bias, (1, c), |i| gbias[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_passes_through() {
        let mut tape = Tape::new();
        let eye = tape.input(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let x = tape.input(Tensor::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let y = tape.matmul(eye, x).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn matmul_hand_example() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = tape.input(Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::zeros(2, 3));
        let b = tape.input(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "got: {msg}");
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // d/dx (x + x) = 2
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(1.5));
        let y = tape.add(x, x).unwrap();
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().item(), 2.0);
    }

    #[test]
    fn tanh_at_zero() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(0.0));
        let y = tape.tanh(x);
        assert_eq!(tape.value(y).item(), 0.0);
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().item(), 1.0);
    }

    #[test]
    fn exp_at_zero() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(0.0));
        let y = tape.exp(x);
        assert_eq!(tape.value(y).item(), 1.0);
    }

    #[test]
    fn softmax_symmetry_and_row_sums() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[1.0, 1.0]));
        let tau = tape.input(Tensor::scalar(0.7));
        let s = tape.softmax_temp(x, tau, 0.015).unwrap();
        assert!((tape.value(s).get(0, 0) - 0.5).abs() < 1e-15);
        assert!((tape.value(s).data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_low_temperature_routes_one_hot() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[10.0, 0.0]));
        let tau = tape.input(Tensor::scalar(0.0));
        let s = tape.softmax_temp(x, tau, 1e-4).unwrap();
        assert!(tape.value(s).get(0, 0) > 1.0 - 1e-12);
        assert!(tape.value(s).get(0, 1) < 1e-12);
    }

    #[test]
    fn layer_norm_constant_row_is_zero() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[4.2, 4.2, 4.2]));
        let gain = tape.input(Tensor::row(&[1.0, 1.0, 1.0]));
        let bias = tape.input(Tensor::row(&[0.0, 0.0, 0.0]));
        let y = tape.layer_norm(x, gain, bias).unwrap();
        for v in tape.value(y).data() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_standardized_pair() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::row(&[1.0, -1.0]));
        let gain = tape.input(Tensor::row(&[1.0, 1.0]));
        let bias = tape.input(Tensor::row(&[0.0, 0.0]));
        let y = tape.layer_norm(x, gain, bias).unwrap();
        assert!((tape.value(y).get(0, 0) - 1.0).abs() < 1e-4);
        assert!((tape.value(y).get(0, 1) + 1.0).abs() < 1e-4);
    }

    #[test]
    fn layer_norm_rejects_width_one() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::scalar(1.0));
        let gain = tape.input(Tensor::scalar(1.0));
        let bias = tape.input(Tensor::scalar(0.0));
        assert!(matches!(
            tape.layer_norm(x, gain, bias),
            Err(TensorError::LayerNormWidth { width: 1 })
        ));
    }

    #[test]
    fn reduce_sum_over_set_basics() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let s = tape.reduce_sum_over_set(x).unwrap();
        assert_eq!(tape.value(s).data(), &[4.0, 6.0]);

        let single = tape.input(Tensor::row(&[7.0, 8.0]));
        let s1 = tape.reduce_sum_over_set(single).unwrap();
        assert_eq!(tape.value(s1).data(), &[7.0, 8.0]);
    }

    #[test]
    fn reduce_sum_over_set_rejects_empty() {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::zeros(0, 3));
        assert!(tape.reduce_sum_over_set(x).is_err());
    }

    #[test]
    fn gaussian_logprob_at_mode() {
        let mut tape = Tape::new();
        let mean = tape.input(Tensor::scalar(0.3));
        let std = tape.input(Tensor::scalar(1.0));
        let sample = tape.input(Tensor::scalar(0.3));
        let lp = tape.gaussian_logprob(mean, std, sample).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((tape.value(lp).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn gaussian_logprob_unit_offset() {
        let mut tape = Tape::new();
        let mean = tape.input(Tensor::scalar(0.0));
        let std = tape.input(Tensor::scalar(1.0));
        let sample = tape.input(Tensor::scalar(1.0));
        let lp = tape.gaussian_logprob(mean, std, sample).unwrap();
        let expected = -0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((tape.value(lp).item() - expected).abs() < 1e-15);
    }

    #[test]
    fn gaussian_logprob_rejects_nonpositive_std() {
        let mut tape = Tape::new();
        let mean = tape.input(Tensor::row(&[0.0, 0.0]));
        let std = tape.input(Tensor::row(&[1.0, -0.5]));
        let sample = tape.input(Tensor::row(&[0.0, 0.0]));
        assert!(matches!(
            tape.gaussian_logprob(mean, std, sample),
            Err(TensorError::NonPositiveStd { index: 1, .. })
        ));
    }
}
