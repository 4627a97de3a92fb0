//! Dense `f32` tensors, a recording tape for reverse-mode gradients, and the
//! Adam optimizer.
//!
//! Every network in this crate is built from the ops on [`Tape`]. A tape is
//! created per forward pass, parameters are registered on it as leaves, and
//! [`Tape::backward`] walks the recorded nodes in reverse to produce a
//! [`Gradients`] table.
//!
//! Batched layouts are used throughout: 1-D signals are `[N, C, T]`, images
//! are `[N, C, H, W]`, and dense activations are `[N, F]`.

mod adam;
mod init;
pub mod kernels;
mod tape;
mod weights;

pub use adam::{AdamConfig, AdamState};
pub use init::glorot_uniform;
pub use tape::{BnMode, BnStats, Gradients, Tape, Var, BN_EPS};
pub use weights::{decode_weights, encode_weights, read_weight_file, write_weight_file, NamedTensor, WeightFileError};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("pooling window {window:?} larger than input {input:?}")]
    WindowTooLarge { window: Vec<usize>, input: Vec<usize> },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("loss must be a scalar tensor, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("prediction {0} outside the open interval (0, 1)")]
    PredictionOutOfRange(f32),
    #[error("batch norm over a channel with no elements")]
    EmptyChannel,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::Shape { op, detail: detail.into() }
}

/// Row-major dense tensor of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Self, TensorError> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(shape_err("new", format!("zero extent in {shape:?}")));
        }
        if len != data.len() {
            return Err(shape_err(
                "new",
                format!("shape {shape:?} needs {len} elements, got {}", data.len()),
            ));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn scalar(value: f32) -> Self {
        Self { shape: vec![1], data: vec![value] }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self, TensorError> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }
}
