//! Layer blocks shared by the source and target networks.

use rand::Rng;

use crate::tensor::{glorot_uniform, BnMode, BnStats, NamedTensor, Tape, Tensor, TensorError, Var};

/// Same-padded 2-D convolution followed by batch norm and ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub kernel: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub stats: BnStats,
}

impl ConvBlock {
    pub fn init(c_in: usize, c_out: usize, kh: usize, kw: usize, rng: &mut impl Rng) -> Self {
        let area = kh * kw;
        Self {
            kernel: glorot_uniform(&[c_out, c_in, kh, kw], c_in * area, c_out * area, rng),
            gamma: Tensor::full(&[c_out], 1.0),
            beta: Tensor::zeros(&[c_out]),
            stats: BnStats::new(c_out),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn params(&self) -> [&Tensor; 3] {
        [&self.kernel, &self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.kernel, &mut self.gamma, &mut self.beta]
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> [Var; 3] {
        self.params().map(|t| tape.leaf(t.clone(), trainable))
    }

    pub fn forward(&mut self, tape: &mut Tape, vars: &[Var; 3], x: Var, mode: BnMode) -> Result<Var, TensorError> {
        let h = tape.conv2d(x, vars[0])?;
        let h = tape.batch_norm(h, vars[1], vars[2], &mut self.stats, mode)?;
        Ok(tape.relu(h))
    }

    pub fn to_named(&self, prefix: &str) -> Vec<NamedTensor> {
        let c = self.out_channels();
        vec![
            NamedTensor::new(format!("{prefix}.kernel"), self.kernel.clone()),
            NamedTensor::new(format!("{prefix}.bn_gamma"), self.gamma.clone()),
            NamedTensor::new(format!("{prefix}.bn_beta"), self.beta.clone()),
            NamedTensor::new(format!("{prefix}.bn_mean"), Tensor::new(&[c], self.stats.running_mean.clone()).expect("c")),
            NamedTensor::new(format!("{prefix}.bn_var"), Tensor::new(&[c], self.stats.running_var.clone()).expect("c")),
        ]
    }

    pub fn from_named(prefix: &str, tensors: &[NamedTensor]) -> Result<Self, String> {
        let kernel = find(tensors, &format!("{prefix}.kernel"))?;
        if kernel.ndim() != 4 {
            return Err(format!("{prefix}.kernel must be 4-D"));
        }
        let c = kernel.shape()[0];
        let vec_c = |name: &str| -> Result<Tensor, String> {
            let t = find(tensors, &format!("{prefix}.{name}"))?;
            if t.shape() != [c] {
                return Err(format!("{prefix}.{name} has shape {:?}", t.shape()));
            }
            Ok(t)
        };
        let mut stats = BnStats::new(c);
        stats.running_mean = vec_c("bn_mean")?.into_data();
        stats.running_var = vec_c("bn_var")?.into_data();
        Ok(Self { kernel, gamma: vec_c("bn_gamma")?, beta: vec_c("bn_beta")?, stats })
    }
}

/// Fully connected layer `y = x·wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self { w: glorot_uniform(&[outputs, inputs], inputs, outputs, rng), b: Tensor::zeros(&[outputs]) }
    }

    pub fn outputs(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.w, &self.b]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.w, &mut self.b]
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> [Var; 2] {
        self.params().map(|t| tape.leaf(t.clone(), trainable))
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var; 2], x: Var) -> Result<Var, TensorError> {
        tape.dense(x, vars[0], vars[1])
    }

    pub fn to_named(&self, prefix: &str) -> Vec<NamedTensor> {
        vec![NamedTensor::new(format!("{prefix}.w"), self.w.clone()), NamedTensor::new(format!("{prefix}.b"), self.b.clone())]
    }

    pub fn from_named(prefix: &str, tensors: &[NamedTensor]) -> Result<Self, String> {
        let w = find(tensors, &format!("{prefix}.w"))?;
        let b = find(tensors, &format!("{prefix}.b"))?;
        if w.ndim() != 2 || b.shape() != [w.shape()[0]] {
            return Err(format!("{prefix}: inconsistent dense shapes {:?} / {:?}", w.shape(), b.shape()));
        }
        Ok(Self { w, b })
    }
}

fn find(tensors: &[NamedTensor], name: &str) -> Result<Tensor, String> {
    tensors.iter().find(|t| t.name == name).map(|t| t.tensor.clone()).ok_or_else(|| format!("missing tensor {name}"))
}

/// Row-wise argmax of a `[N, C]` tensor.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let c = t.shape()[1];
    t.data()
        .chunks(c)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
}
