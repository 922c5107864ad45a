use serde::{Deserialize, Serialize};

use crate::nn::AdamConfig;

const LOSS_TAIL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            max_epochs: 1000,
            patience: 50,
        }
    }
}

/// Tracks the best epoch by validation metric, breaking ties by lower
/// validation loss.
///
/// The patience window restarts whenever either the metric or the lowest
/// validation loss seen so far improves, so a metric plateau does not stop
/// training while the loss is still falling.
pub(crate) struct EarlyStopping {
    patience: usize,
    best_metric: f64,
    best_loss: f64,
    lowest_loss: f64,
    last_progress: usize,
    pub best_epoch: usize,
    seen: bool,
    pub loss_history: Vec<f64>,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_metric: f64::NEG_INFINITY,
            best_loss: f64::INFINITY,
            lowest_loss: f64::INFINITY,
            last_progress: 0,
            best_epoch: 0,
            seen: false,
            loss_history: Vec::new(),
        }
    }

    /// Returns true when this epoch is the new best.
    pub fn observe(&mut self, epoch: usize, metric: f64, val_loss: f64) -> bool {
        let metric = if metric.is_nan() { f64::NEG_INFINITY } else { metric };
        let better = !self.seen
            || metric > self.best_metric
            || (metric == self.best_metric && val_loss < self.best_loss);
        if val_loss < self.lowest_loss {
            self.lowest_loss = val_loss;
            self.last_progress = epoch;
        }
        if better {
            self.last_progress = epoch;
            self.seen = true;
            self.best_metric = metric;
            self.best_loss = val_loss;
            self.best_epoch = epoch;
        }
        better
    }

    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch - self.last_progress >= self.patience
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best_metric.is_finite().then_some(self.best_metric)
    }

    pub fn loss_tail(&self) -> Vec<f64> {
        let start = self.loss_history.len().saturating_sub(LOSS_TAIL);
        self.loss_history[start..].to_vec()
    }
}
