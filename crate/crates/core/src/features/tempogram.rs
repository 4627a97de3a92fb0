use super::{hann_window, DspError, Matrix, OnsetEnvelope};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempogramParams {
    /// Analysis window length in envelope frames.
    pub window: usize,
    /// Frames between columns; `None` means `window / 2`.
    pub hop: Option<usize>,
    pub n_lags: usize,
    /// Standard deviation (frames) of the Gaussian applied to the envelope
    /// before autocorrelation; 0 disables smoothing.
    pub smoothing: f64,
    /// Zero-pad by half a window on both sides so column `c` is centred on
    /// envelope frame `c · hop`; the envelope may then be shorter than the window.
    pub centered: bool,
}

impl Default for TempogramParams {
    fn default() -> Self {
        Self { window: 384, hop: None, n_lags: 256, smoothing: 2.5, centered: false }
    }
}

/// Local autocorrelation of an onset envelope, lags by columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Tempogram {
    values: Vec<f64>,
    n_lags: usize,
    n_frames: usize,
    lag_seconds: f64,
    window: usize,
    hop: usize,
}

impl Tempogram {
    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// Seconds per lag bin.
    pub fn lag_seconds(&self) -> f64 {
        self.lag_seconds
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn value(&self, lag: usize, frame: usize) -> f64 {
        self.values[lag * self.n_frames + frame]
    }

    pub fn column(&self, frame: usize) -> Vec<f64> {
        (0..self.n_lags).map(|l| self.value(l, frame)).collect()
    }

    /// Lag (in bins) of the largest value at or above `min_lag` in a column.
    /// Ties resolve to the smaller lag.
    pub fn argmax_lag(&self, frame: usize, min_lag: usize) -> usize {
        let mut best = min_lag;
        for l in min_lag..self.n_lags {
            if self.value(l, frame) > self.value(best, frame) {
                best = l;
            }
        }
        best
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::new(self.n_lags, self.n_frames, self.values.iter().map(|&v| v as f32).collect()).expect("non-empty")
    }
}

fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return x.to_vec();
    }
    let r = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let src = i + j as isize - r;
                if (0..n).contains(&src) {
                    acc += k * x[src as usize];
                }
            }
            acc / total
        })
        .collect()
}

/// Tempogram with the default parameters and the given window.
pub fn tempogram(env: &OnsetEnvelope, window: usize) -> Result<Tempogram, DspError> {
    tempogram_with(env, &TempogramParams { window, ..Default::default() })
}

/// For each column, the Hann-tapered window `u[t] = w[t]·s[c + t]` gives
/// `value[τ] = Σ_{t=0}^{W−1−τ} u[t]·u[t + τ]`, divided by `value[0]` when
/// that is positive.
pub fn tempogram_with(env: &OnsetEnvelope, p: &TempogramParams) -> Result<Tempogram, DspError> {
    let w_len = p.window;
    if w_len == 0 || p.n_lags == 0 {
        return Err(DspError::InvalidParameter("window and lag count must be positive".into()));
    }
    let hop = p.hop.unwrap_or((w_len / 2).max(1));
    if hop == 0 {
        return Err(DspError::InvalidParameter("hop must be positive".into()));
    }
    if env.is_empty() {
        return Err(DspError::Empty);
    }
    let raw: Vec<f64> = env.strength().iter().map(|&v| v as f64).collect();
    let smoothed = gaussian_smooth(&raw, p.smoothing);
    let (signal, n_frames) = if p.centered {
        let left = w_len / 2;
        let mut padded = vec![0.0; left];
        padded.extend_from_slice(&smoothed);
        padded.resize(left + smoothed.len() + (w_len - left), 0.0);
        (padded, (smoothed.len() - 1) / hop + 1)
    } else {
        if smoothed.len() < w_len {
            return Err(DspError::TooShort { len: smoothed.len(), needed: w_len });
        }
        let n = (smoothed.len() - w_len) / hop + 1;
        (smoothed, n)
    };
    let window = hann_window(w_len);
    let mut values = vec![0.0; p.n_lags * n_frames];
    let mut seg = vec![0.0; w_len];
    for c in 0..n_frames {
        let start = c * hop;
        for (t, s) in seg.iter_mut().enumerate() {
            *s = window[t] * signal[start + t];
        }
        let mut col = vec![0.0; p.n_lags];
        for (lag, v) in col.iter_mut().enumerate().take(w_len.min(p.n_lags)) {
            *v = seg[..w_len - lag].iter().zip(&seg[lag..]).map(|(a, b)| a * b).sum();
        }
        let norm = col[0];
        for (lag, v) in col.into_iter().enumerate() {
            values[lag * n_frames + c] = if norm > 0.0 { v / norm } else { v };
        }
    }
    Ok(Tempogram { values, n_lags: p.n_lags, n_frames, lag_seconds: 1.0 / env.frame_rate(), window: w_len, hop })
}
