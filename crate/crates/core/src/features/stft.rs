use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{DspError, Matrix};
use crate::audio::AudioClip;

/// Magnitude short-time Fourier transform, `n_fft/2 + 1` bins by frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Matrix,
    n_fft: usize,
    hop: usize,
    sample_rate: u32,
}

impl Spectrogram {
    /// Wraps precomputed magnitudes; rows must equal `n_fft/2 + 1`.
    pub fn from_magnitudes(magnitudes: Matrix, n_fft: usize, hop: usize, sample_rate: u32) -> Result<Self, DspError> {
        if magnitudes.rows() != n_fft / 2 + 1 {
            return Err(DspError::InvalidParameter(format!(
                "{} rows for n_fft {n_fft}",
                magnitudes.rows()
            )));
        }
        if hop == 0 || sample_rate == 0 {
            return Err(DspError::InvalidParameter("hop and sample rate must be positive".into()));
        }
        if let Some(&v) = magnitudes.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(DspError::InvalidValue(v));
        }
        Ok(Self { magnitudes, n_fft, hop, sample_rate })
    }

    pub fn magnitudes(&self) -> &Matrix {
        &self.magnitudes
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.magnitudes.cols()
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

fn reflect(x: &[f32], i: isize) -> f32 {
    let n = x.len() as isize;
    let mut j = i;
    if j < 0 {
        j = -j;
    }
    if j >= n {
        j = 2 * (n - 1) - j;
    }
    x[j as usize]
}

/// Hann-windowed magnitude STFT with `n_fft/2` samples of reflection padding
/// at both ends, giving `floor(len/hop) + 1` frames.
pub fn stft(clip: &AudioClip, n_fft: usize, hop: usize) -> Result<Spectrogram, DspError> {
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(DspError::InvalidParameter(format!("n_fft {n_fft} is not a power of two")));
    }
    if hop == 0 || hop > n_fft {
        return Err(DspError::InvalidParameter(format!("hop {hop} must be in 1..={n_fft}")));
    }
    let x = clip.samples();
    if x.len() < n_fft {
        return Err(DspError::TooShort { len: x.len(), needed: n_fft });
    }
    let pad = (n_fft / 2) as isize;
    let n_frames = x.len() / hop + 1;
    let n_bins = n_fft / 2 + 1;
    let window = hann_window(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut mags = Matrix::zeros(n_bins, n_frames);
    for t in 0..n_frames {
        let start = (t * hop) as isize - pad;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(reflect(x, start + i as isize) as f64 * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..n_bins {
            mags.set(k, t, buf[k].norm() as f32);
        }
    }
    Ok(Spectrogram { magnitudes: mags, n_fft, hop, sample_rate: clip.sample_rate() })
}
