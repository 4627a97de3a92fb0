use super::kernels::{self, Conv1dDims, Conv2dDims};
use super::{shape_err, Tensor, TensorError};

/// Variance floor added inside every batch-norm square root.
pub const BN_EPS: f64 = 1e-5;
const BCE_CLAMP: f32 = 1e-7;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// Running statistics of one batch-norm layer. Updated in place by
/// train-mode forward passes.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
}

impl BnStats {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.99,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d { x: Var, w: Var, dims: Conv1dDims },
    Conv2d { x: Var, w: Var, dims: Conv2dDims },
    BatchNorm { x: Var, gamma: Var, beta: Var, mean: Vec<f64>, inv_std: Vec<f64>, train: bool },
    Relu { x: Var },
    Sigmoid { x: Var },
    AvgPool1d { x: Var, size: usize, stride: usize },
    MaxPool2d { x: Var, argmax: Vec<usize> },
    MeanLastAxis { x: Var, len: usize },
    Dense { x: Var, w: Var, b: Var },
    Concat { parts: Vec<Var>, widths: Vec<usize> },
    Reshape { x: Var },
    Add { a: Var, b: Var },
    Sum { x: Var },
    Dot { x: Var, coeffs: Tensor },
    SoftmaxCe { logits: Var, probs: Vec<f32>, labels: Vec<usize> },
    Bce { pred: Var, targets: Tensor },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in recording order, which is a topological order, so
/// [`Tape::backward`] is a single reverse sweep.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one backward sweep, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of `var`; all zeros when `var` did not reach the loss.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        match self.grads[var.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

fn dims(t: &Tensor) -> &[usize] {
    t.shape()
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Registers a tensor. Parameters use `requires_grad = true`; inputs
    /// and constants use `false`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Dilated 1-D cross-correlation, left-anchored and zero-padded on the
    /// right: `x: [N, C_in, T]`, `w: [C_out, C_in, K]` -> `[N, C_out, T]`.
    pub fn conv1d_dilated(&mut self, x: Var, w: Var, dilation: usize) -> Result<Var, TensorError> {
        let (xs, ws) = (dims(self.value(x)), dims(self.value(w)));
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] {
            return Err(shape_err("conv1d_dilated", format!("x {xs:?}, w {ws:?}")));
        }
        if dilation == 0 {
            return Err(TensorError::Invalid("dilation must be >= 1".into()));
        }
        let d = Conv1dDims {
            batch: xs[0],
            c_in: xs[1],
            c_out: ws[0],
            len: xs[2],
            taps: ws[2],
            dilation,
        };
        let mut out = Tensor::zeros(&[d.batch, d.c_out, d.len]);
        kernels::conv1d_forward(self.value(x).data(), self.value(w).data(), &d, out.data_mut());
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(out, Op::Conv1d { x, w, dims: d }, rg))
    }

    /// Same-padded 2-D cross-correlation: `x: [N, C_in, H, W]`,
    /// `w: [C_out, C_in, Kh, Kw]` -> `[N, C_out, H, W]`.
    pub fn conv2d(&mut self, x: Var, w: Var) -> Result<Var, TensorError> {
        let (xs, ws) = (dims(self.value(x)), dims(self.value(w)));
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(shape_err("conv2d", format!("x {xs:?}, w {ws:?}")));
        }
        let d = Conv2dDims {
            batch: xs[0],
            c_in: xs[1],
            c_out: ws[0],
            height: xs[2],
            width: xs[3],
            kh: ws[2],
            kw: ws[3],
        };
        let mut out = Tensor::zeros(&[d.batch, d.c_out, d.height, d.width]);
        kernels::conv2d_forward(self.value(x).data(), self.value(w).data(), &d, out.data_mut());
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(out, Op::Conv2d { x, w, dims: d }, rg))
    }

    /// Per-channel batch normalization over every axis except axis 1.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &mut BnStats,
        mode: BnMode,
    ) -> Result<Var, TensorError> {
        let xs = dims(self.value(x)).to_vec();
        if xs.len() < 2 {
            return Err(shape_err("batch_norm", format!("x {xs:?} has no channel axis")));
        }
        let (n, c) = (xs[0], xs[1]);
        let s: usize = xs[2..].iter().product();
        if self.value(gamma).len() != c || self.value(beta).len() != c || stats.channels() != c {
            return Err(shape_err("batch_norm", format!("{c} channels vs parameter lengths")));
        }
        let m = n * s;
        if m == 0 {
            return Err(TensorError::EmptyChannel);
        }
        let xd = self.value(x).data();
        let mut mean = vec![0.0f64; c];
        let mut inv_std = vec![0.0f64; c];
        let train = mode == BnMode::Train;
        for ch in 0..c {
            if train {
                let mut sum = 0.0f64;
                for b in 0..n {
                    sum += xd[(b * c + ch) * s..(b * c + ch + 1) * s].iter().map(|&v| v as f64).sum::<f64>();
                }
                let mu = sum / m as f64;
                let mut sq = 0.0f64;
                for b in 0..n {
                    sq += xd[(b * c + ch) * s..(b * c + ch + 1) * s]
                        .iter()
                        .map(|&v| {
                            let dv = v as f64 - mu;
                            dv * dv
                        })
                        .sum::<f64>();
                }
                let var = sq / m as f64;
                mean[ch] = mu;
                inv_std[ch] = 1.0 / (var + BN_EPS).sqrt();
                let mom = stats.momentum;
                stats.running_mean[ch] = mom * stats.running_mean[ch] + (1.0 - mom) * mu as f32;
                stats.running_var[ch] = mom * stats.running_var[ch] + (1.0 - mom) * var as f32;
            } else {
                mean[ch] = stats.running_mean[ch] as f64;
                inv_std[ch] = 1.0 / (stats.running_var[ch] as f64 + BN_EPS).sqrt();
            }
        }
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut out = Tensor::zeros(&xs);
        let od = out.data_mut();
        for b in 0..n {
            for ch in 0..c {
                let scale = g[ch] as f64 * inv_std[ch];
                let shift = bt[ch] as f64 - mean[ch] * scale;
                let base = (b * c + ch) * s;
                for (o, &v) in od[base..base + s].iter_mut().zip(&xd[base..base + s]) {
                    *o = (v as f64 * scale + shift) as f32;
                }
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(out, Op::BatchNorm { x, gamma, beta, mean, inv_std, train }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = v.max(0.0);
        }
        let rg = self.rg(x);
        self.push(out, Op::Relu { x }, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for v in out.data_mut() {
            *v = (1.0 / (1.0 + (-(*v as f64)).exp())) as f32;
        }
        let rg = self.rg(x);
        self.push(out, Op::Sigmoid { x }, rg)
    }

    /// Average pooling along the last axis of `[N, C, T]`; the tail that
    /// does not fill a window is dropped.
    pub fn avg_pool1d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var, TensorError> {
        let xs = dims(self.value(x)).to_vec();
        if xs.len() != 3 {
            return Err(shape_err("avg_pool1d", format!("x {xs:?}")));
        }
        if size == 0 || stride == 0 {
            return Err(TensorError::Invalid("pool size and stride must be >= 1".into()));
        }
        if size > xs[2] {
            return Err(TensorError::WindowTooLarge { window: vec![size], input: xs });
        }
        let out_len = (xs[2] - size) / stride + 1;
        let rows = xs[0] * xs[1];
        let mut out = Tensor::zeros(&[xs[0], xs[1], out_len]);
        kernels::avg_pool1d_forward(self.value(x).data(), rows, xs[2], size, stride, out.data_mut());
        let rg = self.rg(x);
        Ok(self.push(out, Op::AvgPool1d { x, size, stride }, rg))
    }

    /// Non-overlapping max pooling over the last two axes of `[N, C, H, W]`.
    pub fn max_pool2d(&mut self, x: Var, ph: usize, pw: usize) -> Result<Var, TensorError> {
        let xs = dims(self.value(x)).to_vec();
        if xs.len() != 4 {
            return Err(shape_err("max_pool2d", format!("x {xs:?}")));
        }
        if ph == 0 || pw == 0 {
            return Err(TensorError::Invalid("pool extents must be >= 1".into()));
        }
        if ph > xs[2] || pw > xs[3] {
            return Err(TensorError::WindowTooLarge { window: vec![ph, pw], input: xs });
        }
        let (h, w) = (xs[2], xs[3]);
        let (oh, ow) = (h / ph, w / pw);
        let planes = xs[0] * xs[1];
        let mut out = Tensor::zeros(&[xs[0], xs[1], oh, ow]);
        let mut argmax = vec![0usize; planes * oh * ow];
        let xd = self.value(x).data();
        let od = out.data_mut();
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    let mut at = base + i * ph * w + j * pw;
                    for a in 0..ph {
                        for b in 0..pw {
                            let idx = base + (i * ph + a) * w + j * pw + b;
                            if xd[idx] > best {
                                best = xd[idx];
                                at = idx;
                            }
                        }
                    }
                    let o = (p * oh + i) * ow + j;
                    od[o] = best;
                    argmax[o] = at;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::MaxPool2d { x, argmax }, rg))
    }

    /// Mean over the time (last) axis: `[N, C, H, W]` -> `[N, C·H]`.
    pub fn global_avg_pool_time(&mut self, x: Var) -> Result<Var, TensorError> {
        let xs = dims(self.value(x)).to_vec();
        if xs.len() != 4 {
            return Err(shape_err("global_avg_pool_time", format!("x {xs:?}")));
        }
        self.mean_last_axis(x, &[xs[0], xs[1] * xs[2]], xs[3])
    }

    /// Mean over every cell of each channel: `[N, C, H, W]` -> `[N, C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var, TensorError> {
        let xs = dims(self.value(x)).to_vec();
        if xs.len() != 4 {
            return Err(shape_err("global_avg_pool", format!("x {xs:?}")));
        }
        self.mean_last_axis(x, &[xs[0], xs[1]], xs[2] * xs[3])
    }

    fn mean_last_axis(&mut self, x: Var, out_shape: &[usize], len: usize) -> Result<Var, TensorError> {
        let xd = self.value(x).data();
        let rows = xd.len() / len;
        let data = (0..rows)
            .map(|r| (xd[r * len..(r + 1) * len].iter().map(|&v| v as f64).sum::<f64>() / len as f64) as f32)
            .collect();
        let out = Tensor::new(out_shape, data)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::MeanLastAxis { x, len }, rg))
    }

    /// `x: [N, F]`, `w: [O, F]`, `b: [O]` -> `x·wᵀ + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let (xs, ws, bs) = (dims(self.value(x)), dims(self.value(w)), dims(self.value(b)));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return Err(shape_err("dense", format!("x {xs:?}, w {ws:?}, b {bs:?}")));
        }
        let (n, f, o) = (xs[0], xs[1], ws[0]);
        let mut out = Tensor::zeros(&[n, o]);
        kernels::gemm(n, f, o, self.value(x).data(), false, self.value(w).data(), true, 0.0, out.data_mut());
        let bd = self.value(b).data();
        for row in out.data_mut().chunks_mut(o) {
            for (v, &bb) in row.iter_mut().zip(bd) {
                *v += bb;
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Dense { x, w, b }, rg))
    }

    /// Stacks tensors along axis 1. All other extents must agree.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Invalid("concat of zero tensors".into()))?;
        let s0 = dims(self.value(*first)).to_vec();
        if s0.len() < 2 {
            return Err(shape_err("concat_channels", format!("{s0:?} has no channel axis")));
        }
        let inner: usize = s0[2..].iter().product();
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = dims(self.value(*p));
            if s.len() != s0.len() || s[0] != s0[0] || s[2..] != s0[2..] {
                return Err(shape_err("concat_channels", format!("{s0:?} vs {s:?}")));
            }
            widths.push(s[1] * inner);
        }
        let total: usize = widths.iter().sum();
        let n = s0[0];
        let mut data = Vec::with_capacity(n * total);
        for b in 0..n {
            for (p, &wd) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[b * wd..(b + 1) * wd]);
            }
        }
        let mut shape = s0.clone();
        shape[1] = total / inner;
        let out = Tensor::new(&shape, data)?;
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(out, Op::Concat { parts: parts.to_vec(), widths }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let out = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape { x }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err("add", format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|&v| v as f64).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s as f32), Op::Sum { x }, rg)
    }

    /// Scalar readout `Σ x·coeffs`.
    pub fn dot(&mut self, x: Var, coeffs: &Tensor) -> Result<Var, TensorError> {
        if self.value(x).shape() != coeffs.shape() {
            return Err(shape_err("dot", format!("{:?} vs {:?}", self.value(x).shape(), coeffs.shape())));
        }
        let s: f64 = self
            .value(x)
            .data()
            .iter()
            .zip(coeffs.data())
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s as f32), Op::Dot { x, coeffs: coeffs.clone() }, rg))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`. `logits: [N, C]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let ls = dims(self.value(logits)).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() {
            return Err(shape_err("softmax_cross_entropy", format!("logits {ls:?}, {} labels", labels.len())));
        }
        let (n, c) = (ls[0], ls[1]);
        if c < 2 {
            return Err(TensorError::Invalid("cross entropy needs at least 2 classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(TensorError::LabelOutOfRange { label: bad, classes: c });
        }
        let ld = self.value(logits).data();
        let mut probs = vec![0.0f32; n * c];
        let mut total = 0.0f64;
        for (b, &label) in labels.iter().enumerate() {
            let row = &ld[b * c..(b + 1) * c];
            let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
            let z: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
            let lse = max + z.ln();
            total += lse - row[label] as f64;
            for (p, &v) in probs[b * c..(b + 1) * c].iter_mut().zip(row) {
                *p = ((v as f64 - max).exp() / z) as f32;
            }
        }
        let rg = self.rg(logits);
        let out = Tensor::scalar((total / n as f64) as f32);
        Ok(self.push(out, Op::SoftmaxCe { logits, probs, labels: labels.to_vec() }, rg))
    }

    /// Mean binary cross-entropy; predictions are clamped to
    /// `[1e-7, 1 - 1e-7]` before the logarithm.
    pub fn bce(&mut self, pred: Var, targets: &Tensor) -> Result<Var, TensorError> {
        let p = self.value(pred);
        if p.shape() != targets.shape() {
            return Err(shape_err("bce", format!("{:?} vs {:?}", p.shape(), targets.shape())));
        }
        if let Some(&bad) = p.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(TensorError::PredictionOutOfRange(bad));
        }
        let loss = bce_value(p.data(), targets.data());
        let rg = self.rg(pred);
        Ok(self.push(Tensor::scalar(loss as f32), Op::Bce { pred, targets: targets.clone() }, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let ls = self.value(loss).shape();
        if self.value(loss).len() != 1 {
            return Err(TensorError::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(ls, 1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
        match &mut grads[v.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    /// Zero-initialized gradient buffer for `v`, or `None` when `v` needs none.
    fn buffer(&self, v: Var) -> Option<Tensor> {
        self.rg(v).then(|| Tensor::zeros(self.value(v).shape()))
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, dims } => {
                let mut dx = self.buffer(*x);
                let mut dw = self.buffer(*w);
                kernels::conv1d_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    g.data(),
                    dims,
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                );
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::Conv2d { x, w, dims } => {
                let mut dx = self.buffer(*x);
                let mut dw = self.buffer(*w);
                kernels::conv2d_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    g.data(),
                    dims,
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                );
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::BatchNorm { x, gamma, beta, mean, inv_std, train } => {
                let xs = self.value(*x).shape();
                let (n, c) = (xs[0], xs[1]);
                let s: usize = xs[2..].iter().product();
                let m = (n * s) as f64;
                let xd = self.value(*x).data();
                let gd = g.data();
                let gam = self.value(*gamma).data();
                let mut dx = self.buffer(*x);
                let mut dgamma = vec![0.0f32; c];
                let mut dbeta = vec![0.0f32; c];
                for ch in 0..c {
                    let (mu, is) = (mean[ch], inv_std[ch]);
                    let mut sum_dy = 0.0f64;
                    let mut sum_dy_xhat = 0.0f64;
                    for b in 0..n {
                        let base = (b * c + ch) * s;
                        for k in base..base + s {
                            let xhat = (xd[k] as f64 - mu) * is;
                            sum_dy += gd[k] as f64;
                            sum_dy_xhat += gd[k] as f64 * xhat;
                        }
                    }
                    dgamma[ch] = sum_dy_xhat as f32;
                    dbeta[ch] = sum_dy as f32;
                    if let Some(dx) = dx.as_mut() {
                        let dd = dx.data_mut();
                        let gi = gam[ch] as f64 * is;
                        for b in 0..n {
                            let base = (b * c + ch) * s;
                            for k in base..base + s {
                                dd[k] = if *train {
                                    let xhat = (xd[k] as f64 - mu) * is;
                                    (gi / m * (m * gd[k] as f64 - sum_dy - xhat * sum_dy_xhat)) as f32
                                } else {
                                    (gi * gd[k] as f64) as f32
                                };
                            }
                        }
                    }
                }
                if let Some(dx) = dx {
                    self.accumulate(grads, *x, dx);
                }
                if self.rg(*gamma) {
                    self.accumulate(grads, *gamma, Tensor::new(&[c], dgamma).expect("shape"));
                }
                if self.rg(*beta) {
                    self.accumulate(grads, *beta, Tensor::new(&[c], dbeta).expect("shape"));
                }
            }
            Op::Relu { x } => {
                let mut dx = g.clone();
                for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    if y <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Sigmoid { x } => {
                let mut dx = g.clone();
                for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= y * (1.0 - y);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::AvgPool1d { x, size, stride } => {
                let xs = self.value(*x).shape();
                let mut dx = Tensor::zeros(xs);
                kernels::avg_pool1d_backward(g.data(), xs[0] * xs[1], xs[2], *size, *stride, dx.data_mut());
                self.accumulate(grads, *x, dx);
            }
            Op::MaxPool2d { x, argmax } => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                let dd = dx.data_mut();
                for (&at, &gv) in argmax.iter().zip(g.data()) {
                    dd[at] += gv;
                }
                self.accumulate(grads, *x, dx);
            }
            Op::MeanLastAxis { x, len } => {
                let mut dx = Tensor::zeros(self.value(*x).shape());
                let inv = 1.0 / *len as f32;
                for (chunk, &gv) in dx.data_mut().chunks_mut(*len).zip(g.data()) {
                    chunk.fill(gv * inv);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Dense { x, w, b } => {
                let xs = self.value(*x).shape();
                let (n, f) = (xs[0], xs[1]);
                let o = self.value(*w).shape()[0];
                if self.rg(*x) {
                    let mut dx = Tensor::zeros(xs);
                    kernels::gemm(n, o, f, g.data(), false, self.value(*w).data(), false, 0.0, dx.data_mut());
                    self.accumulate(grads, *x, dx);
                }
                if self.rg(*w) {
                    let mut dw = Tensor::zeros(&[o, f]);
                    kernels::gemm(o, n, f, g.data(), true, self.value(*x).data(), false, 0.0, dw.data_mut());
                    self.accumulate(grads, *w, dw);
                }
                if self.rg(*b) {
                    let mut db = vec![0.0f64; o];
                    for row in g.data().chunks(o) {
                        for (acc, &v) in db.iter_mut().zip(row) {
                            *acc += v as f64;
                        }
                    }
                    let db = Tensor::new(&[o], db.into_iter().map(|v| v as f32).collect()).expect("shape");
                    self.accumulate(grads, *b, db);
                }
            }
            Op::Concat { parts, widths } => {
                let total: usize = widths.iter().sum();
                let n = g.len() / total;
                let mut offset = 0;
                for (p, &wd) in parts.iter().zip(widths) {
                    if self.rg(*p) {
                        let mut data = Vec::with_capacity(n * wd);
                        for b in 0..n {
                            data.extend_from_slice(&g.data()[b * total + offset..b * total + offset + wd]);
                        }
                        let dp = Tensor::new(self.value(*p).shape(), data).expect("shape");
                        self.accumulate(grads, *p, dp);
                    }
                    offset += wd;
                }
            }
            Op::Reshape { x } => {
                let dx = g.clone().reshape(self.value(*x).shape()).expect("shape");
                self.accumulate(grads, *x, dx);
            }
            Op::Add { a, b } => {
                if self.rg(*a) {
                    self.accumulate(grads, *a, g.clone());
                }
                if self.rg(*b) {
                    self.accumulate(grads, *b, g.clone());
                }
            }
            Op::Sum { x } => {
                let dx = Tensor::full(self.value(*x).shape(), g.item());
                self.accumulate(grads, *x, dx);
            }
            Op::Dot { x, coeffs } => {
                let gv = g.item();
                let mut dx = coeffs.clone();
                for v in dx.data_mut() {
                    *v *= gv;
                }
                self.accumulate(grads, *x, dx);
            }
            Op::SoftmaxCe { logits, probs, labels } => {
                let n = labels.len();
                let c = probs.len() / n;
                let scale = g.item() / n as f32;
                let mut d = probs.clone();
                for (b, &l) in labels.iter().enumerate() {
                    d[b * c + l] -= 1.0;
                }
                for v in &mut d {
                    *v *= scale;
                }
                let dl = Tensor::new(self.value(*logits).shape(), d).expect("shape");
                self.accumulate(grads, *logits, dl);
            }
            Op::Bce { pred, targets } => {
                let p = self.value(*pred);
                let scale = g.item() as f64 / p.len() as f64;
                let d = p
                    .data()
                    .iter()
                    .zip(targets.data())
                    .map(|(&pv, &y)| {
                        let pc = pv.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP) as f64;
                        let y = y as f64;
                        (scale * ((1.0 - y) / (1.0 - pc) - y / pc)) as f32
                    })
                    .collect();
                self.accumulate(grads, *pred, Tensor::new(p.shape(), d).expect("shape"));
            }
        }
    }
}

/// Mean binary cross-entropy with the tape's clamping rule.
pub(crate) fn bce_value(pred: &[f32], targets: &[f32]) -> f64 {
    let total: f64 = pred
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP) as f64;
            let y = y as f64;
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / pred.len() as f64
}
