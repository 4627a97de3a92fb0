//! The multi-task source problem used to learn DLR weights: genre (or
//! rhythm-pattern) classification together with four-way tempo
//! classification.

mod net;
mod report;
mod split;
mod train;

pub use net::{SourceNet, SourceVars, TEMPO_CLASSES};
pub use report::{EpochRecord, TrainReport};
pub use split::{stratified_split, Split};
pub use train::{evaluate_source, load_examples, train_source, SourceExample, SourceHyper, SourceSplits};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio::AudioError;
use crate::dlr::DlrError;
use crate::manifest::{resolve, SourceEntry};
use crate::tensor::{TensorError, WeightFileError};

/// Lower edges of tempo classes 1, 2 and 3, in BPM.
pub const TEMPO_BOUNDARIES: [f64; 3] = [112.0, 149.0, 187.0];

/// Number of genre classes kept by [`exclude_minor_genres`].
pub const KEPT_GENRES: usize = 9;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("bpm must be finite and positive, got {0}")]
    InvalidBpm(f64),
    #[error("split sizes {sizes:?} need {needed} items, only {available} available")]
    InfeasibleSplit { sizes: [usize; 3], needed: usize, available: usize },
    #[error("genre {genre} has {count} items; at least 3 are required")]
    GenreTooSmall { genre: usize, count: usize },
    #[error("the {0} split is empty")]
    EmptySplit(&'static str),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("malformed source weights: {0}")]
    BadWeights(String),
    #[error(transparent)]
    Dlr(#[from] DlrError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    WeightFile(#[from] WeightFileError),
    #[error("{path}: {source}")]
    Audio { path: PathBuf, source: AudioError },
}

/// Maps a tempo in BPM to one of four classes with left-closed intervals:
/// `[0, 112)`, `[112, 149)`, `[149, 187)`, `[187, ∞)`.
pub fn tempo_class(bpm: f64) -> Result<usize, SourceError> {
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(SourceError::InvalidBpm(bpm));
    }
    Ok(TEMPO_BOUNDARIES.iter().filter(|&&b| bpm >= b).count())
}

/// One labeled recording with its genre already mapped to a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceItem {
    pub path: PathBuf,
    pub genre: usize,
    pub bpm: f64,
}

/// Items plus the genre name behind each class index.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDataset {
    pub genres: Vec<String>,
    pub items: Vec<SourceItem>,
}

impl SourceDataset {
    pub fn genre_labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.genre).collect()
    }
}

/// Drops the smallest genres until at most nine remain (never more than
/// four are dropped) and indexes the survivors by descending item count,
/// ties broken by name. Paths are resolved against `manifest`.
pub fn exclude_minor_genres(entries: &[SourceEntry], manifest: &Path) -> SourceDataset {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in entries {
        *counts.entry(e.genre.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let drop = ranked.len().saturating_sub(KEPT_GENRES).min(4);
    ranked.truncate(ranked.len() - drop);
    let genres: Vec<String> = ranked.iter().map(|(g, _)| g.to_string()).collect();
    let items = entries
        .iter()
        .filter_map(|e| {
            let genre = genres.iter().position(|g| *g == e.genre)?;
            Some(SourceItem { path: resolve(manifest, &e.path), genre, bpm: e.bpm })
        })
        .collect();
    SourceDataset { genres, items }
}
