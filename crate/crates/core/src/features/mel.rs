use super::{stft, DspError, Matrix, HOP, N_FFT};
use crate::audio::{AudioClip, PIPELINE_RATE};

pub const MEL_BINS: usize = 128;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * ((mel - MIN_LOG_MEL) * log_step()).exp()
    }
}

/// Area-normalised triangular filters spaced evenly on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Matrix,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<Self, DspError> {
        if n_mels == 0 || n_fft < 2 || !(f_max > f_min && f_min >= 0.0) {
            return Err(DspError::InvalidParameter("bad filterbank geometry".into()));
        }
        let n_bins = n_fft / 2 + 1;
        let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = Matrix::zeros(n_mels, n_bins);
        for m in 0..n_mels {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            for k in 0..n_bins {
                let f = k as f64 * sample_rate as f64 / n_fft as f64;
                let w = ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0);
                weights.set(m, k, (w * norm) as f32);
            }
        }
        Ok(Self { weights, centers_hz: edges[1..=n_mels].to_vec() })
    }

    /// The 128-band, 0–4 kHz bank used for 8 kHz audio with a 512-point FFT.
    pub fn standard() -> Self {
        Self::new(MEL_BINS, N_FFT, PIPELINE_RATE, 0.0, PIPELINE_RATE as f64 / 2.0).expect("valid geometry")
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// `weights · input`, where `input` is bins × frames.
    pub fn apply(&self, input: &Matrix) -> Matrix {
        let (m, k, n) = (self.weights.rows(), self.weights.cols(), input.cols());
        assert_eq!(input.rows(), k);
        let mut out = vec![0.0f32; m * n];
        crate::tensor::kernels::gemm(m, k, n, self.weights.data(), false, input.data(), false, 0.0, &mut out);
        Matrix::new(m, n, out).expect("non-empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelScale {
    Linear,
    Decibel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Matrix,
    scale: MelScale,
    hop: usize,
}

impl MelSpectrogram {
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn scale(&self) -> MelScale {
        self.scale
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    /// Converts a linear spectrogram to decibels with the given range.
    pub fn to_db(&self, dynamic_range_db: f32) -> Result<MelSpectrogram, DspError> {
        if self.scale == MelScale::Decibel {
            return Ok(self.clone());
        }
        Ok(MelSpectrogram {
            values: super::db_scale(&self.values, dynamic_range_db)?,
            scale: MelScale::Decibel,
            hop: self.hop,
        })
    }
}

/// 128-band mel power spectrogram of an 8 kHz clip.
pub fn mel_spectrogram(clip: &AudioClip) -> Result<MelSpectrogram, DspError> {
    if clip.sample_rate() != PIPELINE_RATE {
        return Err(DspError::WrongRate { expected: PIPELINE_RATE, actual: clip.sample_rate() });
    }
    let spec = stft(clip, N_FFT, HOP)?;
    let power = spec.magnitudes().map(|v| v * v);
    Ok(MelSpectrogram { values: MelFilterbank::standard().apply(&power), scale: MelScale::Linear, hop: HOP })
}
