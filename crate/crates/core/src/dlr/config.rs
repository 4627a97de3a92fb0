use super::DlrError;

/// Total channel count of a full-size bank.
pub const DLR_CHANNELS: usize = 128;
pub const FILTER_LEN: usize = 16;
/// Pooling window and stride in samples.
pub const POOL: usize = 256;

/// Shape of the convolution bank: `n_layers` parallel branches of
/// `n_channel` filters, branch `i` dilated by `alpha^i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DlrConfig {
    n_layers: usize,
    n_channel: usize,
    alpha: usize,
    filter_len: usize,
    pool: usize,
    dilations: Vec<usize>,
}

impl DlrConfig {
    /// A full-size bank; `n_layers · n_channel` must be 128.
    pub fn new(n_layers: usize, n_channel: usize, alpha: usize) -> Result<Self, DlrError> {
        if n_layers * n_channel != DLR_CHANNELS {
            return Err(DlrError::ChannelBudget { got: n_layers * n_channel, expected: DLR_CHANNELS });
        }
        Self::reduced(n_layers, n_channel, alpha)
    }

    /// A bank with any positive channel total, for small-scale experiments.
    pub fn reduced(n_layers: usize, n_channel: usize, alpha: usize) -> Result<Self, DlrError> {
        if n_layers == 0 || n_channel == 0 {
            return Err(DlrError::InvalidConfig("need at least one branch and one channel".into()));
        }
        if alpha == 0 {
            return Err(DlrError::InvalidConfig("dilation scale must be at least 1".into()));
        }
        let mut dilations = Vec::with_capacity(n_layers);
        let mut d = 1usize;
        for i in 0..n_layers {
            if i > 0 {
                d = d
                    .checked_mul(alpha)
                    .ok_or_else(|| DlrError::InvalidConfig(format!("dilation {alpha}^{i} overflows")))?;
            }
            dilations.push(d);
        }
        let cfg = Self { n_layers, n_channel, alpha, filter_len: FILTER_LEN, pool: POOL, dilations };
        cfg.receptive_field(n_layers - 1)
            .map_err(|_| DlrError::InvalidConfig("receptive field overflows".into()))?;
        Ok(cfg)
    }

    pub fn with_filter_len(mut self, k: usize) -> Result<Self, DlrError> {
        if k == 0 {
            return Err(DlrError::InvalidConfig("filter length must be positive".into()));
        }
        self.filter_len = k;
        self.receptive_field(self.n_layers - 1)?;
        Ok(self)
    }

    pub fn with_pool(mut self, pool: usize) -> Result<Self, DlrError> {
        if pool == 0 {
            return Err(DlrError::InvalidConfig("pool must be positive".into()));
        }
        self.pool = pool;
        Ok(self)
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_channel(&self) -> usize {
        self.n_channel
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    pub fn pool(&self) -> usize {
        self.pool
    }

    pub fn channels(&self) -> usize {
        self.n_layers * self.n_channel
    }

    pub fn is_full_size(&self) -> bool {
        self.channels() == DLR_CHANNELS
    }

    /// `alpha^i` for each branch.
    pub fn dilations(&self) -> &[usize] {
        &self.dilations
    }

    /// Input span of one output sample of `branch`: `(K − 1)·alpha^branch + 1`.
    pub fn receptive_field(&self, branch: usize) -> Result<usize, DlrError> {
        let d = *self
            .dilations
            .get(branch)
            .ok_or(DlrError::BranchOutOfRange { branch, n: self.n_layers })?;
        (self.filter_len - 1)
            .checked_mul(d)
            .and_then(|v| v.checked_add(1))
            .ok_or_else(|| DlrError::InvalidConfig("receptive field overflows".into()))
    }

    /// Largest dilation expressed in seconds at `sample_rate`.
    pub fn resolution_secs(&self, sample_rate: u32) -> f64 {
        *self.dilations.last().expect("at least one branch") as f64 / sample_rate as f64
    }

    /// Pooled frame count for `len` input samples (0 when shorter than the pool).
    pub fn output_frames(&self, len: usize) -> usize {
        if len < self.pool {
            0
        } else {
            (len - self.pool) / self.pool + 1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_tables() {
        assert_eq!(DlrConfig::new(4, 32, 13).unwrap().dilations(), &[1, 13, 169, 2197]);
        assert_eq!(DlrConfig::new(4, 32, 5).unwrap().dilations(), &[1, 5, 25, 125]);
        assert_eq!(DlrConfig::new(1, 128, 1).unwrap().dilations(), &[1]);
        assert_eq!(DlrConfig::new(8, 16, 2).unwrap().dilations().last(), Some(&128));
    }

    #[test]
    fn channel_budget_enforced() {
        assert!(matches!(DlrConfig::new(4, 16, 13), Err(DlrError::ChannelBudget { got: 64, expected: 128 })));
        assert!(DlrConfig::reduced(2, 8, 13).is_ok());
        assert!(DlrConfig::reduced(2, 8, 0).is_err());
        assert!(DlrConfig::reduced(200, 1, 13).is_err());
    }

    #[test]
    fn receptive_fields() {
        let c13 = DlrConfig::new(4, 32, 13).unwrap();
        assert_eq!(c13.receptive_field(3).unwrap(), 32_956);
        assert_eq!(c13.receptive_field(0).unwrap(), 16);
        assert_eq!(DlrConfig::new(4, 32, 5).unwrap().receptive_field(2).unwrap(), 376);
        assert!(matches!(c13.receptive_field(4), Err(DlrError::BranchOutOfRange { branch: 4, n: 4 })));
        assert!((c13.resolution_secs(8000) - 0.274_625).abs() < 1e-12);
    }

    #[test]
    fn frame_counts() {
        let c = DlrConfig::new(4, 32, 13).unwrap();
        assert_eq!(c.output_frames(70_125), 273);
        assert_eq!(c.output_frames(256), 1);
        assert_eq!(c.output_frames(511), 1);
        assert_eq!(c.output_frames(255), 0);
    }
}
