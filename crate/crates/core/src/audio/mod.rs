//! Audio clips, WAV decoding and the polyphase resampler that brings every
//! input to the 8 kHz pipeline rate.

mod resample;
mod wav;

pub use resample::{resample, Resampler};
pub use wav::{load_wav, write_wav, write_wav_i16};

use thiserror::Error;

/// Sample rate of everything downstream of decoding.
pub const PIPELINE_RATE: u32 = 8000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: String, source: std::io::Error },
    #[error("unsupported encoding in {path}: {detail}")]
    UnsupportedEncoding { path: String, detail: String },
    #[error("{0} contains no audio")]
    Empty(String),
    #[error("{channels} channels not supported (mono or stereo only)")]
    UnsupportedChannels { channels: usize },
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("channels have different lengths")]
    RaggedChannels,
    #[error("cannot write {path}: {detail}")]
    Write { path: String, detail: String },
}

/// Mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroRate);
        }
        if samples.is_empty() {
            return Err(AudioError::Empty("clip".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// The first `max_samples` samples (or the whole clip if shorter).
    pub fn truncated(&self, max_samples: usize) -> AudioClip {
        let n = self.samples.len().min(max_samples.max(1));
        AudioClip { samples: self.samples[..n].to_vec(), sample_rate: self.sample_rate }
    }
}

/// Decoded multi-channel audio, one vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClip {
    channels: Vec<Vec<f32>>,
    sample_rate: u32,
}

impl MultiClip {
    pub fn new(channels: Vec<Vec<f32>>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroRate);
        }
        if channels.is_empty() || channels.len() > 2 {
            return Err(AudioError::UnsupportedChannels { channels: channels.len() });
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(AudioError::Empty("clip".into()));
        }
        if channels.iter().any(|c| c.len() != len) {
            return Err(AudioError::RaggedChannels);
        }
        for c in &channels {
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(AudioError::NonFinite(i));
            }
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.channels[i]
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl From<AudioClip> for MultiClip {
    fn from(c: AudioClip) -> Self {
        MultiClip { channels: vec![c.samples], sample_rate: c.sample_rate }
    }
}

/// Per-sample mean over channels; a mono clip passes through unchanged.
pub fn downmix(clip: &MultiClip) -> AudioClip {
    let samples = match clip.channels.as_slice() {
        [mono] => mono.clone(),
        [l, r] => l.iter().zip(r).map(|(&a, &b)| ((a as f64 + b as f64) * 0.5) as f32).collect(),
        _ => unreachable!("MultiClip holds one or two channels"),
    };
    AudioClip { samples, sample_rate: clip.sample_rate }
}

/// Decode, downmix and resample to [`PIPELINE_RATE`].
pub fn load_pipeline_clip(path: impl AsRef<std::path::Path>) -> Result<AudioClip, AudioError> {
    let mono = downmix(&load_wav(path)?);
    resample(&mono, PIPELINE_RATE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downmix_examples() {
        let st = MultiClip::new(vec![vec![1.0, 0.5], vec![-1.0, 0.5]], 8000).unwrap();
        assert_eq!(downmix(&st).samples(), &[0.0, 0.5]);
        let mono = AudioClip::new(vec![0.1, -0.2, 0.3], 8000).unwrap();
        let m = MultiClip::from(mono.clone());
        assert_eq!(downmix(&m), mono);
        // idempotent on mono
        assert_eq!(downmix(&MultiClip::from(downmix(&m))), mono);
    }

    #[test]
    fn clip_invariants() {
        assert!(matches!(AudioClip::new(vec![], 8000), Err(AudioError::Empty(_))));
        assert!(matches!(AudioClip::new(vec![0.0], 0), Err(AudioError::ZeroRate)));
        assert!(matches!(AudioClip::new(vec![0.0, f32::NAN], 8000), Err(AudioError::NonFinite(1))));
        assert!(matches!(
            MultiClip::new(vec![vec![0.0]; 3], 8000),
            Err(AudioError::UnsupportedChannels { channels: 3 })
        ));
    }
}
