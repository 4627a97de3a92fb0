//! Spectrograms, Mel filterbanks, onset envelopes and tempograms, plus the
//! FEAT/CSV export formats for any 2-D feature.

mod flux;
mod io;
mod matrix;
mod mel;
mod stft;
mod tempogram;

pub use flux::{db_scale, half_wave, spectral_flux, spectral_flux_with, FluxOptions, OnsetEnvelope};
pub use io::{decode_feat, encode_feat, read_feat, write_csv, write_feat, FeatFileError};
pub use matrix::Matrix;
pub use mel::{hz_to_mel, mel_spectrogram, mel_to_hz, MelFilterbank, MelScale, MelSpectrogram, MEL_BINS};
pub use stft::{hann_window, stft, Spectrogram};
pub use tempogram::{tempogram, tempogram_with, Tempogram, TempogramParams};

use thiserror::Error;

/// FFT size and hop used for every spectral feature at 8 kHz.
pub const N_FFT: usize = 512;
pub const HOP: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("input has {len} samples but at least {needed} are required")]
    TooShort { len: usize, needed: usize },
    #[error("expected {expected} Hz audio, got {actual} Hz")]
    WrongRate { expected: u32, actual: u32 },
    #[error("empty input")]
    Empty,
    #[error("negative or non-finite value {0}")]
    InvalidValue(f32),
    #[error("frame lag {mu} needs more than {mu} frames, have {frames}")]
    LagTooLarge { mu: usize, frames: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
