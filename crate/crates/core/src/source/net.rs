use std::path::Path;

use rand::Rng;

use super::SourceError;
use crate::dlr::{DlrConfig, DlrVars, DlrWeights};
use crate::nn::{ConvBlock, Dense};
use crate::tensor::{
    read_weight_file, write_weight_file, AdamState, BnMode, NamedTensor, Tape, Tensor, Var,
};

pub const TEMPO_CLASSES: usize = 4;
const CONV_LAYERS: usize = 5;
const POOLED_LAYERS: usize = 4;
const META: &str = "source.meta";

/// DLR front end, a five-layer 2-D convnet that treats the DLR channel axis
/// as height, a global average over time, and two dense heads.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceNet {
    pub dlr: DlrWeights,
    pub convs: Vec<ConvBlock>,
    pub genre_head: Dense,
    pub tempo_head: Dense,
}

/// Tape handles for every trainable tensor of a [`SourceNet`].
#[derive(Debug, Clone)]
pub struct SourceVars {
    pub dlr: DlrVars,
    pub convs: Vec<[Var; 3]>,
    pub genre: [Var; 2],
    pub tempo: [Var; 2],
}

impl SourceVars {
    /// Same order as [`SourceNet::params`].
    pub fn all(&self) -> Vec<Var> {
        let mut v = self.dlr.all();
        v.extend(self.convs.iter().flatten());
        v.extend(self.genre);
        v.extend(self.tempo);
        v
    }
}

/// Height left after the pooling stages; each halves it until it reaches 1.
fn pooled_height(mut h: usize) -> usize {
    for _ in 0..POOLED_LAYERS {
        h /= h.min(2);
    }
    h
}

impl SourceNet {
    pub fn init(dlr: &DlrConfig, n_genres: usize, conv_channels: usize, rng: &mut impl Rng) -> Self {
        let dlr = DlrWeights::init(dlr, rng);
        Self::with_dlr(dlr, n_genres, conv_channels, rng)
    }

    /// Fresh convnet and heads on top of existing DLR weights.
    pub fn with_dlr(dlr: DlrWeights, n_genres: usize, conv_channels: usize, rng: &mut impl Rng) -> Self {
        let mut convs = Vec::with_capacity(CONV_LAYERS);
        let mut c_in = 1;
        for _ in 0..CONV_LAYERS {
            convs.push(ConvBlock::init(c_in, conv_channels, 3, 3, rng));
            c_in = conv_channels;
        }
        let features = conv_channels * pooled_height(dlr.config().channels());
        Self {
            dlr,
            convs,
            genre_head: Dense::init(features, n_genres, rng),
            tempo_head: Dense::init(features, TEMPO_CLASSES, rng),
        }
    }

    pub fn n_genres(&self) -> usize {
        self.genre_head.outputs()
    }

    pub fn conv_channels(&self) -> usize {
        self.convs[0].out_channels()
    }

    pub fn set_bn_momentum(&mut self, momentum: f32) {
        self.dlr.set_bn_momentum(momentum);
        for c in &mut self.convs {
            c.stats.momentum = momentum;
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = self.dlr.params();
        v.extend(self.convs.iter().flat_map(|c| c.params()));
        v.extend(self.genre_head.params());
        v.extend(self.tempo_head.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.dlr.params_mut();
        v.extend(self.convs.iter_mut().flat_map(|c| c.params_mut()));
        v.extend(self.genre_head.params_mut());
        v.extend(self.tempo_head.params_mut());
        v
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> SourceVars {
        SourceVars {
            dlr: self.dlr.register(tape, trainable),
            convs: self.convs.iter().map(|c| c.register(tape, trainable)).collect(),
            genre: self.genre_head.register(tape, trainable),
            tempo: self.tempo_head.register(tape, trainable),
        }
    }

    /// `x: [N, 1, T]` raw audio to `(genre logits [N, G], tempo logits [N, 4])`.
    pub fn forward(&mut self, tape: &mut Tape, vars: &SourceVars, x: Var, mode: BnMode) -> Result<(Var, Var), SourceError> {
        let d = self.dlr.forward(tape, &vars.dlr, x, mode)?;
        let s = tape.value(d).shape().to_vec();
        let mut h = tape.reshape(d, &[s[0], 1, s[1], s[2]])?;
        for (i, conv) in self.convs.iter_mut().enumerate() {
            h = conv.forward(tape, &vars.convs[i], h, mode)?;
            if i < POOLED_LAYERS {
                let hs = tape.value(h).shape();
                let (ph, pw) = (hs[2].min(2), hs[3].min(2));
                h = tape.max_pool2d(h, ph, pw)?;
            }
        }
        let pooled = tape.global_avg_pool_time(h)?;
        let genre = self.genre_head.forward(tape, &vars.genre, pooled)?;
        let tempo = self.tempo_head.forward(tape, &vars.tempo, pooled)?;
        Ok((genre, tempo))
    }

    /// Output logits for a batch without recording gradients.
    pub fn logits(&mut self, x: Tensor, mode: BnMode) -> Result<(Tensor, Tensor), SourceError> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape, false);
        let xv = tape.leaf(x, false);
        let (g, t) = self.forward(&mut tape, &vars, xv, mode)?;
        Ok((tape.value(g).clone(), tape.value(t).clone()))
    }

    /// `(total, genre, tempo)` cross-entropy losses of a batch.
    pub fn losses(&mut self, x: Tensor, genres: &[usize], tempos: &[usize], mode: BnMode) -> Result<[f32; 3], SourceError> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape, false);
        let (total, g, t) = self.record_loss(&mut tape, &vars, x, genres, tempos, mode)?;
        Ok([total, g, t].map(|v| tape.value(v).item()))
    }

    fn record_loss(
        &mut self,
        tape: &mut Tape,
        vars: &SourceVars,
        x: Tensor,
        genres: &[usize],
        tempos: &[usize],
        mode: BnMode,
    ) -> Result<(Var, Var, Var), SourceError> {
        let xv = tape.leaf(x, false);
        let (gl, tl) = self.forward(tape, vars, xv, mode)?;
        let ce_g = tape.softmax_cross_entropy(gl, genres)?;
        let ce_t = tape.softmax_cross_entropy(tl, tempos)?;
        let total = tape.add(ce_g, ce_t)?;
        Ok((total, ce_g, ce_t))
    }

    /// One train-mode forward/backward pass and Adam update; returns the
    /// batch loss before the update. Parameters are left untouched when
    /// the loss is not finite.
    pub fn train_step(&mut self, adam: &mut AdamState, x: Tensor, genres: &[usize], tempos: &[usize]) -> Result<f32, SourceError> {
        let mut tape = Tape::new();
        let vars = self.register(&mut tape, true);
        let (total, _, _) = self.record_loss(&mut tape, &vars, x, genres, tempos, BnMode::Train)?;
        let loss = tape.value(total).item();
        if !loss.is_finite() {
            return Ok(loss);
        }
        let mut grads = tape.backward(total)?;
        let g: Vec<Tensor> = vars.all().into_iter().map(|v| grads.take(v)).collect();
        adam.step(&mut self.params_mut(), &g)?;
        Ok(loss)
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        let mut out = self.dlr.to_named();
        let meta = [self.conv_channels() as f32, self.n_genres() as f32, TEMPO_CLASSES as f32];
        out.push(NamedTensor::new(META, Tensor::new(&[3], meta.to_vec()).expect("3 values")));
        for (i, c) in self.convs.iter().enumerate() {
            out.extend(c.to_named(&format!("source.conv{i}")));
        }
        out.extend(self.genre_head.to_named("source.genre"));
        out.extend(self.tempo_head.to_named("source.tempo"));
        out
    }

    pub fn from_named(tensors: &[NamedTensor]) -> Result<Self, SourceError> {
        let dlr = DlrWeights::from_named(tensors)?;
        let bad = SourceError::BadWeights;
        let convs = (0..CONV_LAYERS)
            .map(|i| ConvBlock::from_named(&format!("source.conv{i}"), tensors))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let genre_head = Dense::from_named("source.genre", tensors).map_err(bad)?;
        let tempo_head = Dense::from_named("source.tempo", tensors).map_err(bad)?;
        let c = convs[0].out_channels();
        let features = c * pooled_height(dlr.config().channels());
        let chained = convs.windows(2).all(|w| w[1].kernel.shape()[1] == w[0].out_channels());
        if convs[0].kernel.shape()[1] != 1 || !chained {
            return Err(SourceError::BadWeights("convolution channels do not chain".into()));
        }
        if genre_head.w.shape()[1] != features || tempo_head.w.shape() != [TEMPO_CLASSES, features] {
            return Err(SourceError::BadWeights(format!("heads must read {features} features")));
        }
        Ok(Self { dlr, convs, genre_head, tempo_head })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SourceError> {
        Ok(write_weight_file(path, &self.to_named())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        Self::from_named(&read_weight_file(path)?)
    }
}
