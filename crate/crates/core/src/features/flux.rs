use super::{DspError, Matrix, Spectrogram};

/// `(x + |x|) / 2`.
pub fn half_wave(x: f32) -> f32 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Decibels of nonnegative values, floored at `max − dynamic_range_db`.
pub fn db_scale(values: &Matrix, dynamic_range_db: f32) -> Result<Matrix, DspError> {
    if values.data().is_empty() {
        return Err(DspError::Empty);
    }
    if !(dynamic_range_db >= 0.0) {
        return Err(DspError::InvalidParameter(format!("dynamic range {dynamic_range_db}")));
    }
    if let Some(&v) = values.data().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(DspError::InvalidValue(v));
    }
    let db = values.map(|v| (20.0 * (v as f64).max(1e-10).log10()) as f32);
    let top = db.max();
    let mut floor = top - dynamic_range_db;
    // f32 rounding can leave `top - floor` a hair above the range
    while top - floor > dynamic_range_db {
        floor = floor.next_up();
    }
    Ok(db.map(|v| v.max(floor)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxOptions {
    /// Frame lag between the compared spectra.
    pub mu: usize,
    /// Apply a width-3 maximum filter across bins to the lagged frame first.
    pub max_filter: bool,
}

impl Default for FluxOptions {
    fn default() -> Self {
        Self { mu: 3, max_filter: false }
    }
}

/// Onset strength per spectrogram frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEnvelope {
    strength: Vec<f32>,
    frame_rate: f64,
    mu: usize,
}

impl OnsetEnvelope {
    pub fn new(strength: Vec<f32>, frame_rate: f64, mu: usize) -> Result<Self, DspError> {
        if !(frame_rate > 0.0) {
            return Err(DspError::InvalidParameter(format!("frame rate {frame_rate}")));
        }
        if let Some(&v) = strength.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(DspError::InvalidValue(v));
        }
        Ok(Self { strength, frame_rate, mu })
    }

    pub fn strength(&self) -> &[f32] {
        &self.strength
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.strength.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strength.is_empty()
    }
}

pub fn spectral_flux(spec: &Spectrogram, mu: usize) -> Result<OnsetEnvelope, DspError> {
    spectral_flux_with(spec, &FluxOptions { mu, max_filter: false })
}

/// `strength[n] = Σ_k H(M[k, n] − M[k, n − μ])`, zero for the first μ frames.
pub fn spectral_flux_with(spec: &Spectrogram, opts: &FluxOptions) -> Result<OnsetEnvelope, DspError> {
    let mu = opts.mu;
    if mu == 0 {
        return Err(DspError::InvalidParameter("frame lag must be at least 1".into()));
    }
    let m = spec.magnitudes();
    let (bins, frames) = (m.rows(), m.cols());
    if mu >= frames {
        return Err(DspError::LagTooLarge { mu, frames });
    }
    let mut acc = vec![0.0f64; frames];
    for k in 0..bins {
        let row = m.row(k);
        let (below, above) = (k.checked_sub(1).map(|j| m.row(j)), (k + 1 < bins).then(|| m.row(k + 1)));
        for n in mu..frames {
            let mut prev = row[n - mu];
            if opts.max_filter {
                if let Some(b) = below {
                    prev = prev.max(b[n - mu]);
                }
                if let Some(a) = above {
                    prev = prev.max(a[n - mu]);
                }
            }
            acc[n] += half_wave(row[n] - prev) as f64;
        }
    }
    OnsetEnvelope::new(acc.into_iter().map(|v| v as f32).collect(), spec.frame_rate(), mu)
}
