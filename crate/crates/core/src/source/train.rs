use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tempo_class, EpochRecord, SourceDataset, SourceError, SourceNet, Split, TrainReport, TEMPO_CLASSES};
use crate::audio::load_pipeline_clip;
use crate::dlr::DlrConfig;
use crate::nn::{accuracy, argmax_rows};
use crate::tensor::{AdamConfig, AdamState, BnMode, Tensor};

/// Training hyperparameters. Every field is echoed into the report.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceHyper {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub lr: f32,
    /// Samples per training crop; evaluation uses the first `crop` samples.
    pub crop: usize,
    pub conv_channels: usize,
    pub bn_momentum: f32,
    pub seed: u64,
}

impl Default for SourceHyper {
    fn default() -> Self {
        Self {
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
            lr: 1e-3,
            crop: 70_125,
            conv_channels: 32,
            bn_momentum: 0.99,
            seed: 0,
        }
    }
}

impl SourceHyper {
    fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: &str| Err(SourceError::InvalidHyper(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.conv_channels == 0 {
            return bad("conv_channels must be positive");
        }
        if !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must lie in [0, 1)");
        }
        Ok(())
    }

    fn echo(&self) -> Vec<(String, String)> {
        [
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("lr", self.lr.to_string()),
            ("crop", self.crop.to_string()),
            ("conv_channels", self.conv_channels.to_string()),
            ("bn_momentum", self.bn_momentum.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Decoded 8 kHz audio with both labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceExample {
    pub samples: Vec<f32>,
    pub genre: usize,
    pub tempo: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSplits {
    pub n_genres: usize,
    pub train: Vec<SourceExample>,
    pub valid: Vec<SourceExample>,
    pub test: Vec<SourceExample>,
}

/// Decodes every assigned item of `dataset` to the pipeline rate.
pub fn load_examples(dataset: &SourceDataset, assignment: &[Option<Split>]) -> Result<SourceSplits, SourceError> {
    let mut out = SourceSplits { n_genres: dataset.genres.len(), train: Vec::new(), valid: Vec::new(), test: Vec::new() };
    for (item, split) in dataset.items.iter().zip(assignment) {
        let Some(split) = split else { continue };
        let clip = load_pipeline_clip(&item.path).map_err(|source| SourceError::Audio { path: item.path.clone(), source })?;
        let ex = SourceExample { samples: clip.into_samples(), genre: item.genre, tempo: tempo_class(item.bpm)? };
        match split {
            Split::Train => out.train.push(ex),
            Split::Valid => out.valid.push(ex),
            Split::Test => out.test.push(ex),
        }
    }
    Ok(out)
}

/// Copies `len` samples from `offset`, zero-padding past the end.
fn crop(samples: &[f32], offset: usize, len: usize) -> Vec<f32> {
    let mut out = vec![0.0; len];
    let avail = samples.len().saturating_sub(offset).min(len);
    out[..avail].copy_from_slice(&samples[offset..offset + avail]);
    out
}

fn batch_tensor(rows: Vec<Vec<f32>>, len: usize) -> Tensor {
    let n = rows.len();
    Tensor::new(&[n, 1, len], rows.concat()).expect("non-empty batch")
}

struct Eval {
    loss: f64,
    genre_acc: f64,
    tempo_acc: f64,
}

fn evaluate(net: &mut SourceNet, items: &[SourceExample], crop_len: usize, batch: usize) -> Result<Eval, SourceError> {
    let mut loss = 0.0;
    let (mut gp, mut tp) = (Vec::new(), Vec::new());
    for chunk in items.chunks(batch) {
        let x = batch_tensor(chunk.iter().map(|e| crop(&e.samples, 0, crop_len)).collect(), crop_len);
        let (g, t) = net.logits(x, BnMode::Infer)?;
        let genres: Vec<usize> = chunk.iter().map(|e| e.genre).collect();
        let tempos: Vec<usize> = chunk.iter().map(|e| e.tempo).collect();
        loss += (mean_ce(&g, &genres) + mean_ce(&t, &tempos)) * chunk.len() as f64;
        gp.extend(argmax_rows(&g));
        tp.extend(argmax_rows(&t));
    }
    let genres: Vec<usize> = items.iter().map(|e| e.genre).collect();
    let tempos: Vec<usize> = items.iter().map(|e| e.tempo).collect();
    Ok(Eval { loss: loss / items.len() as f64, genre_acc: accuracy(&gp, &genres), tempo_acc: accuracy(&tp, &tempos) })
}

fn mean_ce(logits: &Tensor, labels: &[usize]) -> f64 {
    let c = logits.shape()[1];
    let total: f64 = logits
        .data()
        .chunks(c)
        .zip(labels)
        .map(|(row, &l)| {
            let m = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
            let lse = m + row.iter().map(|&v| (v as f64 - m).exp()).sum::<f64>().ln();
            lse - row[l] as f64
        })
        .sum();
    total / labels.len() as f64
}

/// Accuracy of each head on `items`, using the first `crop` samples of each.
pub fn evaluate_source(net: &mut SourceNet, items: &[SourceExample], crop: usize) -> Result<(f64, f64), SourceError> {
    if items.is_empty() {
        return Err(SourceError::EmptySplit("test"));
    }
    let e = evaluate(net, items, crop, 16)?;
    Ok((e.genre_acc, e.tempo_acc))
}

fn check_labels(items: &[SourceExample], n_genres: usize) -> Result<(), SourceError> {
    for e in items {
        if e.genre >= n_genres {
            return Err(SourceError::LabelOutOfRange { label: e.genre, classes: n_genres });
        }
        if e.tempo >= TEMPO_CLASSES {
            return Err(SourceError::LabelOutOfRange { label: e.tempo, classes: TEMPO_CLASSES });
        }
    }
    Ok(())
}

/// Trains DLR weights and the source convnet jointly.
///
/// Each epoch draws a fresh random crop per training item. After every
/// epoch the validation loss is measured in inference mode; the weights
/// with the lowest validation loss are returned and training stops once
/// `patience` epochs pass without improvement. `on_epoch` sees every
/// record as it is produced.
pub fn train_source(
    data: &SourceSplits,
    cfg: &DlrConfig,
    hyper: &SourceHyper,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SourceNet, TrainReport), SourceError> {
    hyper.validate()?;
    if data.train.is_empty() {
        return Err(SourceError::EmptySplit("train"));
    }
    if data.valid.is_empty() {
        return Err(SourceError::EmptySplit("valid"));
    }
    for split in [&data.train, &data.valid, &data.test] {
        check_labels(split, data.n_genres)?;
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut data_rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    data_rng.set_stream(1);

    let mut net = SourceNet::init(cfg, data.n_genres, hyper.conv_channels, &mut init_rng);
    net.set_bn_momentum(hyper.bn_momentum);
    let adam_cfg = AdamConfig { lr: hyper.lr, ..AdamConfig::default() };
    let mut adam = AdamState::new(adam_cfg, net.params());

    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut best_loss = f64::INFINITY;
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=hyper.max_epochs {
        order.shuffle(&mut data_rng);
        let mut loss_sum = 0.0;
        for (step, idx) in order.chunks(hyper.batch_size).enumerate() {
            let rows = idx
                .iter()
                .map(|&i| {
                    let s = &data.train[i].samples;
                    let off = if s.len() > hyper.crop { data_rng.gen_range(0..=s.len() - hyper.crop) } else { 0 };
                    crop(s, off, hyper.crop)
                })
                .collect();
            let x = batch_tensor(rows, hyper.crop);
            let genres: Vec<usize> = idx.iter().map(|&i| data.train[i].genre).collect();
            let tempos: Vec<usize> = idx.iter().map(|&i| data.train[i].tempo).collect();
            let loss = net.train_step(&mut adam, x, &genres, &tempos)?;
            if !loss.is_finite() {
                return Err(SourceError::Diverged { epoch, step });
            }
            loss_sum += loss as f64 * idx.len() as f64;
        }
        let v = evaluate(&mut net, &data.valid, hyper.crop, hyper.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            valid_loss: v.loss,
            valid_genre_acc: v.genre_acc,
            valid_tempo_acc: v.tempo_acc,
        };
        on_epoch(&record);
        epochs.push(record);
        if v.loss < best_loss {
            best_loss = v.loss;
            best_epoch = epoch;
            best = net.clone();
        } else if epoch - best_epoch >= hyper.patience {
            stopped_early = true;
            break;
        }
    }

    let (test_genre_acc, test_tempo_acc) = if data.test.is_empty() {
        (0.0, 0.0)
    } else {
        let t = evaluate(&mut best, &data.test, hyper.crop, hyper.batch_size)?;
        (t.genre_acc, t.tempo_acc)
    };
    let mut config = vec![
        ("dlr_layers".to_string(), cfg.n_layers().to_string()),
        ("dlr_channels".to_string(), cfg.n_channel().to_string()),
        ("dlr_alpha".to_string(), cfg.alpha().to_string()),
        ("dlr_filter_len".to_string(), cfg.filter_len().to_string()),
        ("dlr_pool".to_string(), cfg.pool().to_string()),
    ];
    config.extend(hyper.echo());
    config.push(("n_train".into(), data.train.len().to_string()));
    config.push(("n_valid".into(), data.valid.len().to_string()));
    config.push(("n_test".into(), data.test.len().to_string()));
    let report = TrainReport {
        seed: hyper.seed,
        config,
        epochs,
        best_epoch,
        stopped_early,
        test_genre_acc,
        test_tempo_acc,
    };
    Ok((best, report))
}
