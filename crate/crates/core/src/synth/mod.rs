//! Deterministic rhythm-pattern audio for training and evaluation.
//!
//! Each pattern is a set of onset steps on a two-bar grid of sixteenth notes
//! (32 steps, 8 beats). A clip repeats that grid from time zero at the given
//! tempo, placing one short decaying burst per onset.

mod corpus;
mod pattern;

pub use corpus::{
    make_source_corpus, make_tag_corpus, source_item_spec, tag_item_spec, tags_for, SourceRow, TagRow, SOURCE_CLIP_SECS,
    TAG_CLIP_SECS, TAG_VOCABULARY,
};
pub use pattern::{RhythmPattern, PATTERN_COUNT, STEPS_PER_BEAT, STEPS_PER_CYCLE};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::{AudioClip, AudioError};

pub const MIN_BPM: f64 = 60.0;
pub const MAX_BPM: f64 = 240.0;
/// Peak absolute amplitude of every burst.
pub const PEAK: f32 = 0.8;
/// Upper bound on burst length.
pub const BURST_SECS: f64 = 0.03;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("tempo {0} BPM outside [60, 240]")]
    InvalidBpm(f64),
    #[error("duration {duration}s shorter than one cycle ({cycle}s)")]
    TooShort { duration: f64, cycle: f64 },
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("cannot write corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timbre {
    Click,
    NoiseBurst,
    ToneBurst,
}

impl Timbre {
    pub const ALL: [Timbre; 3] = [Timbre::Click, Timbre::NoiseBurst, Timbre::ToneBurst];

    pub fn name(self) -> &'static str {
        match self {
            Timbre::Click => "click",
            Timbre::NoiseBurst => "noise",
            Timbre::ToneBurst => "tone",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhythmSpec {
    pub pattern: RhythmPattern,
    pub bpm: f64,
    pub timbre: Timbre,
    pub seed: u64,
}

impl RhythmSpec {
    /// Seconds per two-bar cycle.
    pub fn cycle_secs(&self) -> f64 {
        STEPS_PER_CYCLE as f64 / STEPS_PER_BEAT as f64 * 60.0 / self.bpm
    }

    /// Onset times in seconds strictly before `duration`.
    pub fn onset_times(&self, duration: f64) -> Vec<f64> {
        let step = 60.0 / self.bpm / STEPS_PER_BEAT as f64;
        let mut out = Vec::new();
        for cycle in 0.. {
            let base = cycle * STEPS_PER_CYCLE;
            if base as f64 * step >= duration {
                break;
            }
            for &s in self.pattern.steps() {
                let t = (base + s) as f64 * step;
                if t < duration {
                    out.push(t);
                }
            }
        }
        out
    }
}

/// Burst waveform normalised to a peak of exactly [`PEAK`].
fn burst(timbre: Timbre, rate: u32, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = ((BURST_SECS * rate as f64).floor() as usize).max(1);
    let sr = rate as f64;
    let raw: Vec<f64> = match timbre {
        Timbre::Click => {
            let f = 1800.0f64.min(0.4 * sr);
            (0..n).map(|i| (-(i as f64) / (0.002 * sr)).exp() * (2.0 * PI * f * i as f64 / sr).cos()).collect()
        }
        Timbre::NoiseBurst => (0..n).map(|i| (-(i as f64) / (0.006 * sr)).exp() * rng.gen_range(-1.0..1.0)).collect(),
        Timbre::ToneBurst => {
            let f = rng.gen_range(300.0..700.0f64).min(0.4 * sr);
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    (1.0 - (-t / 0.001).exp()) * (-t / 0.008).exp() * (2.0 * PI * f * t).sin()
                })
                .collect()
        }
    };
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    raw.iter().map(|v| (v / peak * PEAK as f64) as f32).collect()
}

/// Renders `duration` seconds of the pattern at `rate` Hz.
pub fn render(spec: &RhythmSpec, duration: f64, rate: u32) -> Result<AudioClip, SynthError> {
    if !(MIN_BPM..=MAX_BPM).contains(&spec.bpm) {
        return Err(SynthError::InvalidBpm(spec.bpm));
    }
    if rate == 0 {
        return Err(SynthError::ZeroRate);
    }
    let cycle = spec.cycle_secs();
    if !(duration >= cycle) {
        return Err(SynthError::TooShort { duration, cycle });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = (duration * rate as f64).round() as usize;
    let mut out = vec![0.0f32; len];
    for t in spec.onset_times(duration) {
        let start = (t * rate as f64).round() as usize;
        let b = burst(spec.timbre, rate, &mut rng);
        for (o, v) in out[start.min(len)..].iter_mut().zip(b) {
            *o += v;
        }
    }
    Ok(AudioClip::new(out, rate)?)
}
