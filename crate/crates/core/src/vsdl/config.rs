use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Which latent a downstream consumer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMode {
    /// `z = μ + σ ⊙ ε` with fresh `ε`.
    Sampled,
    /// `z = μ`.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Latent width `J` per view.
    pub latent_dim: usize,
    /// Weight of the regression loss in stage 2; the view loss gets `1 - alpha`.
    pub alpha: f64,
    /// Weight of the KL term relative to the squared regression loss.
    pub kl_weight: f64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub baseline_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden widths of each view's latent encoder (before the `2J` head).
    pub latent_hidden: Vec<usize>,
    /// Hidden widths of each view's stage-1 regression network.
    pub regression_hidden: Vec<usize>,
    /// Hidden widths of the stage-2 view classifier.
    pub classifier_hidden: Vec<usize>,
    /// Hidden widths of the stage-2 location regressor.
    pub regressor_hidden: Vec<usize>,
    /// Hidden widths of the plain dense baseline.
    pub dnn_hidden: Vec<usize>,
    pub stage2_train_latents: LatentMode,
    pub predict_latents: LatentMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: trains the two-corridor experiment in well under
    /// a minute per system on one CPU core.
    fn default() -> Self {
        TrainConfig {
            latent_dim: 32,
            alpha: 0.5,
            kl_weight: 1e-3,
            stage1_epochs: 30,
            stage2_epochs: 30,
            baseline_epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            latent_hidden: vec![128, 64],
            regression_hidden: vec![64, 32],
            classifier_hidden: vec![64, 32],
            regressor_hidden: vec![64, 32],
            dnn_hidden: vec![128, 64],
            stage2_train_latents: LatentMode::Mean,
            predict_latents: LatentMode::Mean,
            seed: 1,
        }
    }
}

impl TrainConfig {
    /// Full-size architecture: three hidden layers narrowing from 1000 to
    /// 500 units in every network, J = 120, alpha = 0.5, Adam at 1e-5 and an
    /// unweighted KL term.
    pub fn full_scale() -> Self {
        let wide = vec![1000, 750, 500];
        TrainConfig {
            latent_dim: 120,
            alpha: 0.5,
            kl_weight: 1.0,
            stage1_epochs: 200,
            stage2_epochs: 200,
            baseline_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-5,
            latent_hidden: wide.clone(),
            regression_hidden: wide.clone(),
            classifier_hidden: wide.clone(),
            regressor_hidden: wide.clone(),
            dnn_hidden: wide,
            ..Default::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig::with_learning_rate(self.learning_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config("kl_weight must be finite and nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        let widths = [
            &self.latent_hidden,
            &self.regression_hidden,
            &self.classifier_hidden,
            &self.regressor_hidden,
            &self.dnn_hidden,
        ];
        if widths.iter().any(|w| w.contains(&0)) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_preset() {
        let p = TrainConfig::full_scale();
        p.validate().unwrap();
        assert_eq!(p.latent_dim, 120);
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.learning_rate, 1e-5);
        assert_eq!(p.latent_hidden.len(), 3);
    }

    #[test]
    fn rejects_bad_values() {
        for f in [
            |c: &mut TrainConfig| c.alpha = 1.0,
            |c: &mut TrainConfig| c.alpha = 0.0,
            |c: &mut TrainConfig| c.latent_dim = 0,
            |c: &mut TrainConfig| c.batch_size = 0,
            |c: &mut TrainConfig| c.learning_rate = -1.0,
            |c: &mut TrainConfig| c.latent_hidden = vec![0],
        ] {
            let mut c = TrainConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }
}
