use std::fmt::Write as _;

/// Losses and validation accuracies after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub valid_genre_acc: f64,
    pub valid_tempo_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub seed: u64,
    /// Effective settings as `(key, value)` pairs, in a stable order.
    pub config: Vec<(String, String)>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept; 0 means the initial weights.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test_genre_acc: f64,
    pub test_tempo_acc: f64,
}

impl TrainReport {
    /// `key=value` lines: configuration, seed, then outcome.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "epochs_run={}", self.epochs.len());
        let _ = writeln!(s, "best_epoch={}", self.best_epoch);
        let _ = writeln!(s, "stopped_early={}", self.stopped_early);
        if let Some(best) = self.epochs.iter().find(|e| e.epoch == self.best_epoch) {
            let _ = writeln!(s, "best_valid_loss={}", best.valid_loss);
        }
        let _ = writeln!(s, "test_genre_acc={}", self.test_genre_acc);
        let _ = writeln!(s, "test_tempo_acc={}", self.test_tempo_acc);
        s
    }

    /// One row per epoch under the header
    /// `epoch,train_loss,valid_loss,valid_genre_acc,valid_tempo_acc`.
    pub fn epochs_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,valid_loss,valid_genre_acc,valid_tempo_acc\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.train_loss, e.valid_loss, e.valid_genre_acc, e.valid_tempo_acc);
        }
        s
    }
}
