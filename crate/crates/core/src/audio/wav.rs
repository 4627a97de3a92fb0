use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, AudioError, MultiClip};

/// Full-scale divisor for 16-bit PCM.
const I16_SCALE: f32 = 32768.0;

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Reads a 16-bit integer or 32-bit float PCM WAV with one or two channels.
pub fn load_wav(path: impl AsRef<Path>) -> Result<MultiClip, AudioError> {
    let path = path.as_ref();
    let name = path_str(path);
    let mut reader = WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => AudioError::Unreadable { path: name.clone(), source },
        other => AudioError::UnsupportedEncoding { path: name.clone(), detail: other.to_string() },
    })?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 || n_ch > 2 {
        return Err(AudioError::UnsupportedChannels { channels: n_ch });
    }
    let bad = |e: hound::Error| AudioError::UnsupportedEncoding { path: name.clone(), detail: e.to_string() };
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / I16_SCALE))
            .collect::<Result<_, _>>()
            .map_err(bad)?,
        (SampleFormat::Float, 32) => reader.samples::<f32>().collect::<Result<_, _>>().map_err(bad)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding {
                path: name,
                detail: format!("{bits}-bit {fmt:?} samples"),
            })
        }
    };
    if interleaved.len() < n_ch {
        return Err(AudioError::Empty(name));
    }
    let frames = interleaved.len() / n_ch;
    let channels = (0..n_ch)
        .map(|c| (0..frames).map(|f| interleaved[f * n_ch + c]).collect())
        .collect();
    MultiClip::new(channels, spec.sample_rate)
}

fn quantize(v: f32) -> i16 {
    (v * I16_SCALE).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16
}

/// Writes a mono 16-bit PCM WAV.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let q: Vec<i16> = clip.samples().iter().map(|&v| quantize(v)).collect();
    write_wav_i16(path, &q, clip.sample_rate())
}

pub fn write_wav_i16(path: impl AsRef<Path>, samples: &[i16], sample_rate: u32) -> Result<(), AudioError> {
    let path = path.as_ref();
    let werr = |e: hound::Error| AudioError::Write { path: path_str(path), detail: e.to_string() };
    let spec = WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut w = WavWriter::create(path, spec).map_err(werr)?;
    {
        let mut sw = w.get_i16_writer(samples.len() as u32);
        for &s in samples {
            sw.write_sample(s);
        }
        sw.flush().map_err(werr)?;
    }
    w.finalize().map_err(werr)
}
