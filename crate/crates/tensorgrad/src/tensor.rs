use thiserror::Error;

/// Errors produced by tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: left is {lhs:?}, right is {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: reduction over an empty set")]
    EmptySet { op: &'static str },
    #[error("gaussian_logprob: std must be > 0, got {value} at flat index {index}")]
    NonPositiveStd { value: f64, index: usize },
    #[error("layer_norm: last-axis width {width} is too small for meaningful normalization")]
    LayerNormWidth { width: usize },
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

/// A dense, row-major, double-precision matrix. Scalars are 1x1.
///
/// Values are immutable once the tensor is placed on a tape; all
/// builders here produce owned buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::Invalid {
                op: "new",
                msg: format!(
                    "buffer of {} values does not fill a {rows}x{cols} tensor",
                    data.len()
                ),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    /// 1xN row vector.
    pub fn row(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    /// Stack equally sized rows into an RxC tensor.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let r = rows.len();
        let c = rows.first().map(|v| v.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(TensorError::Invalid {
                    op: "from_rows",
                    msg: format!("row {i} has {} values, expected {c}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    /// The single value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert!(self.is_scalar(), "item() on a {}x{} tensor", self.rows, self.cols);
        self.data[0]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the buffer. Tapes clone tensors on input, so
    /// mutating a source tensor never touches recorded forward values.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Same buffer reinterpreted with a new shape.
    pub fn reshaped(&self, rows: usize, cols: usize) -> Result<Self, TensorError> {
        Self::new(rows, cols, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm of the flattened buffer.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise dot product of the flattened buffers.
    pub fn flat_dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Deterministic pairwise-tree sum. The same multiset of values produces
/// the same result only if the slice order is canonical; callers that
/// need order invariance sort first.
pub(crate) fn pairwise_tree_sum(values: &mut [f64]) -> f64 {
    let mut n = values.len();
    if n == 0 {
        return 0.0;
    }
    while n > 1 {
        let pairs = n / 2;
        for i in 0..pairs {
            values[i] = values[2 * i] + values[2 * i + 1];
        }
        if n % 2 == 1 {
            values[pairs] = values[n - 1];
        }
        n = n.div_ceil(2);
    }
    values[0]
}
