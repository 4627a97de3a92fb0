//! The dilated convolution bank that turns raw 8 kHz audio into a
//! 128-channel, 256-sample-hop representation.
//!
//! Branch `i` is a single 16-tap convolution with dilation `α^i` over the raw
//! waveform, followed by batch norm and ReLU. Every branch is average-pooled
//! with window and stride 256 and the pooled maps are stacked along the
//! channel axis. Pooling each branch before stacking gives the same result
//! as stacking first, with far less memory.

mod config;

pub use config::{DlrConfig, DLR_CHANNELS, FILTER_LEN, POOL};

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::audio::{AudioClip, PIPELINE_RATE};
use crate::features::Matrix;
use crate::tensor::kernels::{avg_pool1d_forward, conv1d_forward, Conv1dDims};
use crate::tensor::{
    glorot_uniform, read_weight_file, write_weight_file, BnMode, BnStats, NamedTensor, Tape, Tensor, TensorError,
    Var, WeightFileError, BN_EPS,
};

#[derive(Debug, Error)]
pub enum DlrError {
    #[error("branches provide {got} channels, expected {expected}")]
    ChannelBudget { got: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("branch {branch} out of range for {n} branches")]
    BranchOutOfRange { branch: usize, n: usize },
    #[error("clip has {len} samples, fewer than the pooling window {pool}")]
    TooShort { len: usize, pool: usize },
    #[error("expected {expected} Hz audio, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("weight file: {0}")]
    WeightFile(#[from] WeightFileError),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    BadTensor { name: String, got: Vec<usize>, expected: Vec<usize> },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Pooled representation, one row per channel and one column per 256-sample frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DlrFeature {
    values: Matrix,
}

impl DlrFeature {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    /// Seconds between consecutive frames at the pipeline rate.
    pub fn frame_period_secs(&self) -> f64 {
        POOL as f64 / PIPELINE_RATE as f64
    }
}

/// Learned parameters of every branch plus the batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DlrWeights {
    config: DlrConfig,
    kernels: Vec<Tensor>,
    gammas: Vec<Tensor>,
    betas: Vec<Tensor>,
    stats: Vec<BnStats>,
}

/// Tape handles for the trainable tensors of a [`DlrWeights`].
#[derive(Debug, Clone)]
pub struct DlrVars {
    pub kernels: Vec<Var>,
    pub gammas: Vec<Var>,
    pub betas: Vec<Var>,
}

impl DlrVars {
    /// Kernels, then gammas, then betas; matches [`DlrWeights::params_mut`].
    pub fn all(&self) -> Vec<Var> {
        self.kernels.iter().chain(&self.gammas).chain(&self.betas).copied().collect()
    }
}

const PREFIX: &str = "dlr.";
const META: &str = "dlr.meta";

impl DlrWeights {
    /// Glorot-uniform kernels, unit gains, zero shifts, fresh statistics.
    pub fn init(config: &DlrConfig, rng: &mut impl Rng) -> Self {
        let (c, k) = (config.n_channel(), config.filter_len());
        let n = config.n_layers();
        Self {
            config: config.clone(),
            kernels: (0..n).map(|_| glorot_uniform(&[c, 1, k], k, c * k, rng)).collect(),
            gammas: (0..n).map(|_| Tensor::full(&[c], 1.0)).collect(),
            betas: (0..n).map(|_| Tensor::zeros(&[c])).collect(),
            stats: (0..n).map(|_| BnStats::new(c)).collect(),
        }
    }

    /// Builds weights from explicit per-branch tensors.
    pub fn from_parts(
        config: &DlrConfig,
        kernels: Vec<Tensor>,
        gammas: Vec<Tensor>,
        betas: Vec<Tensor>,
        stats: Vec<BnStats>,
    ) -> Result<Self, DlrError> {
        let (n, c, k) = (config.n_layers(), config.n_channel(), config.filter_len());
        if kernels.len() != n || gammas.len() != n || betas.len() != n || stats.len() != n {
            return Err(DlrError::InvalidConfig(format!("expected {n} branches of parameters")));
        }
        for (i, kt) in kernels.iter().enumerate() {
            check_shape(&format!("kernel {i}"), kt, &[c, 1, k])?;
            check_shape(&format!("gamma {i}"), &gammas[i], &[c])?;
            check_shape(&format!("beta {i}"), &betas[i], &[c])?;
            if stats[i].channels() != c {
                return Err(DlrError::InvalidConfig(format!("branch {i} statistics have wrong width")));
            }
        }
        let w = Self { config: config.clone(), kernels, gammas, betas, stats };
        if !w.all_finite() {
            return Err(DlrError::InvalidConfig("non-finite parameter".into()));
        }
        Ok(w)
    }

    pub fn config(&self) -> &DlrConfig {
        &self.config
    }

    pub fn kernels(&self) -> &[Tensor] {
        &self.kernels
    }

    pub fn stats(&self) -> &[BnStats] {
        &self.stats
    }

    pub fn set_bn_momentum(&mut self, momentum: f32) {
        for s in &mut self.stats {
            s.momentum = momentum;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.kernels.iter().chain(&self.gammas).chain(&self.betas).all(Tensor::all_finite)
            && self.stats.iter().all(|s| s.running_mean.iter().chain(&s.running_var).all(|v| v.is_finite()))
    }

    /// Kernels, then gammas, then betas.
    pub fn params(&self) -> Vec<&Tensor> {
        self.kernels.iter().chain(&self.gammas).chain(&self.betas).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.kernels.iter_mut().chain(self.gammas.iter_mut()).chain(self.betas.iter_mut()).collect()
    }

    /// Places the parameters on `tape` as leaves.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> DlrVars {
        let mut leaves = |ts: &[Tensor]| ts.iter().map(|t| tape.leaf(t.clone(), trainable)).collect::<Vec<_>>();
        DlrVars { kernels: leaves(&self.kernels), gammas: leaves(&self.gammas), betas: leaves(&self.betas) }
    }

    /// Recorded forward pass on a batch `x: [N, 1, T]`, giving `[N, C, frames]`.
    /// Train mode updates the running statistics.
    pub fn forward(&mut self, tape: &mut Tape, vars: &DlrVars, x: Var, mode: BnMode) -> Result<Var, DlrError> {
        let t = *tape.value(x).shape().last().unwrap_or(&0);
        let pool = self.config.pool();
        if t < pool {
            return Err(DlrError::TooShort { len: t, pool });
        }
        let dilations = self.config.dilations();
        let mut pooled = Vec::with_capacity(dilations.len());
        for (i, &d) in dilations.iter().enumerate() {
            let h = tape.conv1d_dilated(x, vars.kernels[i], d)?;
            let h = tape.batch_norm(h, vars.gammas[i], vars.betas[i], &mut self.stats[i], mode)?;
            let h = tape.relu(h);
            pooled.push(tape.avg_pool1d(h, pool, pool)?);
        }
        Ok(tape.concat_channels(&pooled)?)
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        let cfg = &self.config;
        let meta = [cfg.n_layers(), cfg.n_channel(), cfg.alpha(), cfg.filter_len(), cfg.pool()].map(|v| v as f32);
        let mut out = vec![NamedTensor::new(META, Tensor::new(&[5], meta.to_vec()).expect("5 values"))];
        for i in 0..cfg.n_layers() {
            let c = cfg.n_channel();
            let b = format!("{PREFIX}branch{i}.");
            out.push(NamedTensor::new(format!("{b}kernel"), self.kernels[i].clone()));
            out.push(NamedTensor::new(format!("{b}bn_gamma"), self.gammas[i].clone()));
            out.push(NamedTensor::new(format!("{b}bn_beta"), self.betas[i].clone()));
            let s = &self.stats[i];
            out.push(NamedTensor::new(format!("{b}bn_mean"), Tensor::new(&[c], s.running_mean.clone()).expect("c")));
            out.push(NamedTensor::new(format!("{b}bn_var"), Tensor::new(&[c], s.running_var.clone()).expect("c")));
        }
        out
    }

    /// Reads the `dlr.` tensors out of a larger collection; other names are ignored.
    pub fn from_named(tensors: &[NamedTensor]) -> Result<Self, DlrError> {
        let find = |name: &str| {
            tensors.iter().find(|t| t.name == name).map(|t| &t.tensor).ok_or_else(|| DlrError::MissingTensor(name.into()))
        };
        let meta = find(META)?;
        let m = meta.data();
        if m.len() != 5 || m.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0)) {
            return Err(DlrError::InvalidConfig(format!("bad {META} tensor {m:?}")));
        }
        let [n, c, a, k, p] = [m[0], m[1], m[2], m[3], m[4]].map(|v| v as usize);
        let mut config = if n * c == DLR_CHANNELS { DlrConfig::new(n, c, a)? } else { DlrConfig::reduced(n, c, a)? };
        config = config.with_filter_len(k)?.with_pool(p)?;
        let mut kernels = Vec::new();
        let mut gammas = Vec::new();
        let mut betas = Vec::new();
        let mut stats = Vec::new();
        for i in 0..n {
            let b = format!("{PREFIX}branch{i}.");
            kernels.push(find(&format!("{b}kernel"))?.clone());
            gammas.push(find(&format!("{b}bn_gamma"))?.clone());
            betas.push(find(&format!("{b}bn_beta"))?.clone());
            let mean = find(&format!("{b}bn_mean"))?;
            let var = find(&format!("{b}bn_var"))?;
            check_shape(&format!("{b}bn_mean"), mean, &[c])?;
            check_shape(&format!("{b}bn_var"), var, &[c])?;
            let mut s = BnStats::new(c);
            s.running_mean = mean.data().to_vec();
            s.running_var = var.data().to_vec();
            stats.push(s);
        }
        Self::from_parts(&config, kernels, gammas, betas, stats)
    }
}

fn check_shape(name: &str, t: &Tensor, expected: &[usize]) -> Result<(), DlrError> {
    if t.shape() != expected {
        return Err(DlrError::BadTensor { name: name.into(), got: t.shape().to_vec(), expected: expected.to_vec() });
    }
    Ok(())
}

pub fn save_weights(path: impl AsRef<Path>, weights: &DlrWeights) -> Result<(), DlrError> {
    Ok(write_weight_file(path, &weights.to_named())?)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<DlrWeights, DlrError> {
    DlrWeights::from_named(&read_weight_file(path)?)
}

/// Frozen-weight extraction with running batch-norm statistics.
pub fn extract_dlr(clip: &AudioClip, weights: &DlrWeights) -> Result<DlrFeature, DlrError> {
    if clip.sample_rate() != PIPELINE_RATE {
        return Err(DlrError::WrongRate { expected: PIPELINE_RATE, actual: clip.sample_rate() });
    }
    extract_samples(clip.samples(), weights)
}

/// As [`extract_dlr`] on bare samples assumed to be at the pipeline rate.
pub fn extract_samples(x: &[f32], weights: &DlrWeights) -> Result<DlrFeature, DlrError> {
    let cfg = weights.config();
    let (pool, c, len) = (cfg.pool(), cfg.n_channel(), x.len());
    if len < pool {
        return Err(DlrError::TooShort { len, pool });
    }
    let frames = cfg.output_frames(len);
    let mut values = Vec::with_capacity(cfg.channels() * frames);
    let mut conv = vec![0.0f32; c * len];
    let mut pooled = vec![0.0f32; c * frames];
    for (i, &d) in cfg.dilations().iter().enumerate() {
        let dims = Conv1dDims { batch: 1, c_in: 1, c_out: c, len, taps: cfg.filter_len(), dilation: d };
        conv1d_forward(x, weights.kernels[i].data(), &dims, &mut conv);
        let (g, b, s) = (weights.gammas[i].data(), weights.betas[i].data(), &weights.stats[i]);
        for ch in 0..c {
            let scale = g[ch] as f64 / (s.running_var[ch] as f64 + BN_EPS).sqrt();
            let shift = b[ch] as f64 - s.running_mean[ch] as f64 * scale;
            for v in &mut conv[ch * len..(ch + 1) * len] {
                *v = ((*v as f64 * scale + shift) as f32).max(0.0);
            }
        }
        avg_pool1d_forward(&conv, c, len, pool, pool, &mut pooled);
        values.extend_from_slice(&pooled);
    }
    Ok(DlrFeature { values: Matrix::new(cfg.channels(), frames, values).expect("non-empty") })
}
