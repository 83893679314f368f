use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimisation and loss-weight settings shared by every training scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Epochs without validation-accuracy improvement before stopping.
    pub patience: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    /// Weight of the supervised loss.
    pub alpha1: f64,
    /// Weight of the self-supervised loss.
    pub alpha2: f64,
    /// Weight of the adversarial loss.
    pub alpha3: f64,
    pub seed: u64,
    /// Row-normalize features before they enter the model.
    pub normalize_features: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 400,
            patience: 50,
            hidden_dim: 64,
            dropout: 0.5,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
            seed: 0,
            normalize_features: true,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("alpha3", self.alpha3)] {
            if !(a >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {a}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(
                "learning_rate must be > 0 and weight_decay >= 0".into(),
            ));
        }
        Ok(())
    }
}
