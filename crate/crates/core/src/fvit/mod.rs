//! Inference-only HiLo attention block and grasp regression head, in single
//! precision.
//!
//! Projection weights are stored `(in, out)`: a layer maps a row vector `x`
//! to `x · W + b`.

mod container;
mod head;
mod hilo;

pub use container::{
    load_weights, read_tensors, save_weights, weights_from_bytes, weights_to_bytes,
    write_tensors, CONTAINER_VERSION, MAGIC, TENSOR_NAMES,
};
pub use head::{
    leaky_relu, regression_forward, regression_forward_f64, HeadWeights, RegressionWeights,
    FEATURE_DIM, FC1_OUT, FC2_OUT, LEAKY_SLOPE,
};
pub use hilo::{
    hi_branch, hilo_forward, hilo_forward_traced, lo_branch, AttentionTrace, HiLoConfig,
    HiLoWeights,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FvitError {
    #[error("bad magic: not a weight container")]
    BadMagic,
    #[error("unsupported container version {0}")]
    VersionUnsupported(u32),
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error("unknown tensor {0:?}")]
    UnknownTensor(String),
    #[error("duplicate tensor {0:?}")]
    DuplicateTensor(String),
    #[error("tensor {name:?}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {0:?} has non-finite values")]
    NonFinite(String),
    #[error("container truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("{h}x{w} map is not divisible into {window}x{window} windows")]
    WindowIndivisible { h: usize, w: usize, window: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

/// Dense row-major single-precision tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorF {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl TensorF {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, FvitError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(FvitError::ShapeMismatch {
                name: "tensor".into(),
                expected: shape,
                found: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FvitError::NonFinite("tensor".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub(crate) fn expect_shape(&self, name: &str, expected: &[usize]) -> Result<(), FvitError> {
        if self.shape != expected {
            return Err(FvitError::ShapeMismatch {
                name: name.into(),
                expected: expected.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }
}

/// `x · W` for row-major `x` of shape `(n, k)` and `W` of shape `(k, m)`.
pub(crate) fn matmul(x: &[f32], n: usize, k: usize, w: &[f32], m: usize) -> Vec<f32> {
    debug_assert_eq!(x.len(), n * k);
    debug_assert_eq!(w.len(), k * m);
    let mut out = vec![0.0f32; n * m];
    for r in 0..n {
        let row = &mut out[r * m..(r + 1) * m];
        for (i, &xi) in x[r * k..(r + 1) * k].iter().enumerate() {
            for (o, &wij) in row.iter_mut().zip(&w[i * m..(i + 1) * m]) {
                *o += xi * wij;
            }
        }
    }
    out
}
