use super::{AudioClip, AudioError};

const KAISER_BETA: f64 = 8.6;
/// Filter length per phase, counted at the lower of the two rates.
const TAPS_PER_PHASE: usize = 64;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.9;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
///
/// Output sample `n` sits at input position `n·M/L`; each of the `L`
/// fractional offsets has its own precomputed tap set, normalised to unit
/// DC gain.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half: usize,
    table: Vec<f64>,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self, AudioError> {
        if source_rate == 0 || target_rate == 0 {
            return Err(AudioError::ZeroRate);
        }
        let g = gcd(source_rate as u64, target_rate as u64);
        let up = (target_rate as u64 / g) as usize;
        let down = (source_rate as u64 / g) as usize;
        let ratio = (up as f64 / down as f64).min(1.0);
        let fc = ROLLOFF * ratio;
        let half = ((TAPS_PER_PHASE / 2) as f64 / ratio).ceil() as usize;
        let width = 2 * half;
        let radius = half as f64 + 1.0;
        let i0b = bessel_i0(KAISER_BETA);
        let mut table = vec![0.0; up * width];
        for p in 0..up {
            let frac = p as f64 / up as f64;
            let taps = &mut table[p * width..(p + 1) * width];
            for (k, t) in taps.iter_mut().enumerate() {
                let dist = k as f64 - (half as f64 - 1.0) - frac;
                let r = dist / radius;
                let win = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                *t = fc * sinc(fc * dist) * win;
            }
            let s: f64 = taps.iter().sum();
            taps.iter_mut().for_each(|t| *t /= s);
        }
        Ok(Self { up, down, half, table })
    }

    /// Number of output samples for `input_len` input samples.
    pub fn output_len(&self, input_len: usize) -> usize {
        let n = (input_len as u128 * self.up as u128 + self.down as u128 / 2) / self.down as u128;
        (n as usize).max(1)
    }

    pub fn process(&self, x: &[f32]) -> Vec<f32> {
        if self.up == self.down {
            return x.to_vec();
        }
        let width = 2 * self.half;
        let n_out = self.output_len(x.len());
        let len = x.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out {
            let pos = n as u128 * self.down as u128;
            let i = (pos / self.up as u128) as isize;
            let p = (pos % self.up as u128) as usize;
            let taps = &self.table[p * width..(p + 1) * width];
            let start = i - (self.half as isize - 1);
            let k_lo = (-start).max(0) as usize;
            let k_hi = ((len - start).max(0) as usize).min(width);
            let mut acc = 0.0f64;
            for k in k_lo..k_hi {
                acc += taps[k] * x[(start + k as isize) as usize] as f64;
            }
            out.push(acc as f32);
        }
        out
    }
}

/// Resamples a clip to `target_rate`. Equal rates return the clip unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == clip.sample_rate() {
        return Ok(clip.clone());
    }
    let r = Resampler::new(clip.sample_rate(), target_rate)?;
    AudioClip::new(r.process(clip.samples()), target_rate)
}
