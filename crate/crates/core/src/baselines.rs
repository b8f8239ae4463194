//! Comparison systems over the undivided feature vector: a variational
//! network that ignores view labels, and a plain dense regressor.

use ndarray::{Array2, ArrayView2, Axis};

use crate::csi::FeatureSet;
use crate::error::{Error, Result};
use crate::nn::{squared_error_grad, squared_error_rows, Activation, Adam, Mlp};
use crate::rng::{self, tag};
use crate::vsdl::{epoch_batches, Predictions, TrainConfig, ViewNetwork, ViewTrainer};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub step_losses: Vec<f64>,
    /// Mean step loss of the final epoch.
    pub final_loss: f64,
}

/// Variational encoder and regressor over the full feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct VdlModel {
    pub net: ViewNetwork,
    pub config: TrainConfig,
}

impl VdlModel {
    pub fn new(input_dim: usize, config: &TrainConfig) -> Self {
        let mut r = rng::stream(config.seed, &[tag::INIT, tag::VDL]);
        VdlModel {
            net: ViewNetwork::new(input_dim, config, &mut r),
            config: config.clone(),
        }
    }

    pub fn predict_full(&self, x: ArrayView2<f64>) -> Result<Predictions> {
        let mut noise = rng::stream(self.config.seed, &[tag::PREDICT, tag::VDL]);
        let fwd = self.net.forward(x, self.config.predict_latents, &mut noise)?;
        Ok(Predictions {
            normalized: fwd.y_hat,
            u_hat: Array2::zeros((x.nrows(), 0)),
        })
    }

    pub fn predict_features(&self, set: &FeatureSet) -> Result<Predictions> {
        self.predict_full(set.full.view())
    }
}

/// Trains on every sample's full feature vector, ignoring view labels.
pub fn vdl_train(train: &FeatureSet, config: &TrainConfig) -> Result<(VdlModel, BaselineReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let model = VdlModel::new(train.full.ncols(), config);
    let mut trainer = ViewTrainer::new(model.net, config, rng::stream(config.seed, &[tag::NOISE, tag::VDL]));
    let mut step_losses = Vec::new();
    let mut final_loss = f64::NAN;
    for epoch in 0..config.baseline_epochs {
        let mut sum = 0.0;
        let mut count = 0;
        for batch in epoch_batches(train.len(), config.batch_size, config.seed, tag::VDL, epoch) {
            let x = train.full.select(Axis(0), &batch);
            let y = train.targets.select(Axis(0), &batch);
            let loss = trainer.step(x.view(), &y)?;
            step_losses.push(loss);
            sum += loss;
            count += 1;
        }
        final_loss = sum / count as f64;
    }
    Ok((
        VdlModel {
            net: trainer.net,
            config: config.clone(),
        },
        BaselineReport { step_losses, final_loss },
    ))
}

/// Dense ReLU regressor from the full feature vector to a location.
#[derive(Debug, Clone, PartialEq)]
pub struct DnnModel {
    pub net: Mlp,
}

impl DnnModel {
    pub fn new(input_dim: usize, config: &TrainConfig) -> Self {
        let mut r = rng::stream(config.seed, &[tag::INIT, tag::DNN]);
        DnnModel {
            net: Mlp::new(input_dim, &config.dnn_hidden, 2, Activation::Identity, &mut r),
        }
    }

    pub fn predict_full(&self, x: ArrayView2<f64>) -> Result<Predictions> {
        Ok(Predictions {
            normalized: self.net.predict(x)?,
            u_hat: Array2::zeros((x.nrows(), 0)),
        })
    }

    pub fn predict_features(&self, set: &FeatureSet) -> Result<Predictions> {
        self.predict_full(set.full.view())
    }
}

pub fn dnn_train(train: &FeatureSet, config: &TrainConfig) -> Result<(DnnModel, BaselineReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut model = DnnModel::new(train.full.ncols(), config);
    let mut adam = Adam::new(config.adam());
    let mut step_losses = Vec::new();
    let mut final_loss = f64::NAN;
    for epoch in 0..config.baseline_epochs {
        let mut sum = 0.0;
        let mut count = 0;
        for batch in epoch_batches(train.len(), config.batch_size, config.seed, tag::DNN, epoch) {
            let x = train.full.select(Axis(0), &batch);
            let y = train.targets.select(Axis(0), &batch);
            let trace = model.net.forward(x.view())?;
            let y_hat = trace.output().expect("non-empty trace");
            let loss = squared_error_rows(&y, y_hat).mean().unwrap_or(0.0);
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite DNN loss at epoch {epoch}")));
            }
            let d_y = squared_error_grad(&y, y_hat, 1.0 / batch.len() as f64);
            let (grads, _) = model.net.backward(&trace, &d_y, false)?;
            let mut params = model.net.param_slices_mut();
            adam.step(&mut params, &grads.slices())?;
            step_losses.push(loss);
            sum += loss;
            count += 1;
        }
        final_loss = sum / count as f64;
    }
    Ok((model, BaselineReport { step_losses, final_loss }))
}
