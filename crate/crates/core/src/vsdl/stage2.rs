use ndarray::{s, Array2, ArrayView2, Axis};

use super::{epoch_batches, LatentMode, TrainConfig};
use crate::error::{check_len, Error, Result};
use crate::nn::{standard_normal_matrix, squared_error_grad, squared_error_rows, Activation, Adam, GaussianLatent, Mlp, MlpGrads, MlpTrace};
use crate::rng::{self, tag};

/// Softmax view classifier and location regressor over the concatenated
/// latents of all `K` views.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Model {
    pub classifier: Mlp,
    pub regressor: Mlp,
    pub alpha: f64,
    pub views: usize,
    pub latent_dim: usize,
}

#[derive(Debug, Clone)]
pub struct Stage2Forward {
    pub z: Array2<f64>,
    pub u_hat: Array2<f64>,
    pub z_prime: Array2<f64>,
    pub y_hat: Array2<f64>,
    classifier_trace: Option<MlpTrace>,
    regressor_trace: MlpTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Grads {
    pub classifier: MlpGrads,
    pub regressor: MlpGrads,
    /// Gradient with respect to the input latents, when requested.
    pub z: Option<Array2<f64>>,
}

impl Stage2Grads {
    pub fn flatten(&self) -> Vec<f64> {
        [self.classifier.flatten(), self.regressor.flatten()].concat()
    }
}

/// Scales each `J`-wide block `k` of every row of `z` by `u_hat[row, k]`.
pub fn reweight(z: ArrayView2<f64>, u_hat: ArrayView2<f64>, latent_dim: usize) -> Result<Array2<f64>> {
    check_len("reweight rows", z.nrows(), u_hat.nrows())?;
    check_len("reweight width", u_hat.ncols() * latent_dim, z.ncols())?;
    let mut out = z.to_owned();
    for (mut row, u) in out.rows_mut().into_iter().zip(u_hat.rows()) {
        for (k, &w) in u.iter().enumerate() {
            row.slice_mut(s![k * latent_dim..(k + 1) * latent_dim]).mapv_inplace(|v| v * w);
        }
    }
    Ok(out)
}

/// Per-sample joint objective `α·‖y − ŷ‖² + (1 − α)·‖ũ − û‖²`.
pub fn stage2_loss(y: [f64; 2], y_hat: [f64; 2], u_tilde: &[f64], u_hat: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_len("view label width", u_tilde.len(), u_hat.len())?;
    let reg = (y[0] - y_hat[0]).powi(2) + (y[1] - y_hat[1]).powi(2);
    let cls: f64 = u_tilde.iter().zip(u_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(alpha * reg + (1.0 - alpha) * cls)
}

impl Stage2Model {
    pub fn new<R: rand::Rng + ?Sized>(views: usize, config: &TrainConfig, rng: &mut R) -> Self {
        let width = views * config.latent_dim;
        Stage2Model {
            classifier: Mlp::new(width, &config.classifier_hidden, views, Activation::Softmax, rng),
            regressor: Mlp::new(width, &config.regressor_hidden, 2, Activation::Identity, rng),
            alpha: config.alpha,
            views,
            latent_dim: config.latent_dim,
        }
    }

    pub fn from_parts(classifier: Mlp, regressor: Mlp, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ModelFormat(format!("alpha {alpha} outside (0, 1)")));
        }
        let views = classifier.output_dim();
        let width = classifier.input_dim();
        if views == 0 || !width.is_multiple_of(views) {
            return Err(Error::ModelFormat(format!("classifier input width {width} is not a multiple of {views} views")));
        }
        if classifier.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
            return Err(Error::ModelFormat("classifier must end in softmax".into()));
        }
        check_len("regressor input width", width, regressor.input_dim())?;
        check_len("regressor output width", 2, regressor.output_dim())?;
        Ok(Stage2Model {
            classifier,
            regressor,
            alpha,
            views,
            latent_dim: width / views,
        })
    }

    pub fn forward(&self, z: ArrayView2<f64>) -> Result<Stage2Forward> {
        let trace = self.classifier.forward(z)?;
        let u_hat = trace.output().expect("non-empty trace").clone();
        self.finish(z, u_hat, Some(trace))
    }

    /// Forward pass with the classifier output replaced by `u_hat`.
    pub fn forward_forced(&self, z: ArrayView2<f64>, u_hat: ArrayView2<f64>) -> Result<Stage2Forward> {
        check_len("forced view weights", self.views, u_hat.ncols())?;
        self.finish(z, u_hat.to_owned(), None)
    }

    fn finish(&self, z: ArrayView2<f64>, u_hat: Array2<f64>, classifier_trace: Option<MlpTrace>) -> Result<Stage2Forward> {
        let z_prime = reweight(z, u_hat.view(), self.latent_dim)?;
        let regressor_trace = self.regressor.forward(z_prime.view())?;
        let y_hat = regressor_trace.output().expect("non-empty trace").clone();
        Ok(Stage2Forward {
            z: z.to_owned(),
            u_hat,
            z_prime,
            y_hat,
            classifier_trace,
            regressor_trace,
        })
    }

    /// Batch means `(L, L_reg, L_cls)` with `L = α·L_reg + (1 − α)·L_cls`.
    pub fn loss(&self, fwd: &Stage2Forward, y: &Array2<f64>, u_tilde: &Array2<f64>) -> (f64, f64, f64) {
        let reg = squared_error_rows(y, &fwd.y_hat).mean().unwrap_or(0.0);
        let cls = squared_error_rows(u_tilde, &fwd.u_hat).mean().unwrap_or(0.0);
        (self.alpha * reg + (1.0 - self.alpha) * cls, reg, cls)
    }

    /// Gradients of the joint loss from [`Stage2Model::loss`].
    pub fn backward(&self, fwd: &Stage2Forward, y: &Array2<f64>, u_tilde: &Array2<f64>, input_grad: bool) -> Result<Stage2Grads> {
        let trace = fwd.classifier_trace.as_ref().ok_or(Error::BackwardWithoutForward)?;
        let n = y.nrows() as f64;
        let j = self.latent_dim;
        let d_y = squared_error_grad(y, &fwd.y_hat, self.alpha / n);
        let (regressor, d_zp) = self.regressor.backward(&fwd.regressor_trace, &d_y, true)?;
        let d_zp = d_zp.expect("input gradient requested");

        let mut d_u = squared_error_grad(u_tilde, &fwd.u_hat, (1.0 - self.alpha) / n);
        for k in 0..self.views {
            let block = s![.., k * j..(k + 1) * j];
            let contrib = (&d_zp.slice(block) * &fwd.z.slice(block)).sum_axis(Axis(1));
            let mut col = d_u.column_mut(k);
            col += &contrib;
        }
        let (classifier, d_z_cls) = self.classifier.backward(trace, &d_u, input_grad)?;
        let z = match d_z_cls {
            Some(mut d_z) => {
                d_z += &reweight(d_zp.view(), fwd.u_hat.view(), j)?;
                Some(d_z)
            }
            None => None,
        };
        Ok(Stage2Grads { classifier, regressor, z })
    }

    fn apply(&mut self, grads: &Stage2Grads, adam: &mut Adam) -> Result<()> {
        let g: Vec<&[f64]> = grads.classifier.slices().into_iter().chain(grads.regressor.slices()).collect();
        let mut p: Vec<&mut [f64]> = self.classifier.param_slices_mut();
        p.extend(self.regressor.param_slices_mut());
        adam.step(&mut p, &g)
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        [self.classifier.flatten_params(), self.regressor.flatten_params()].concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let split = self.classifier.parameter_count();
        check_len("stage-2 parameters", split + self.regressor.parameter_count(), flat.len())?;
        self.classifier.set_flat_params(&flat[..split])?;
        self.regressor.set_flat_params(&flat[split..])
    }
}

/// Frozen stage-1 moments for the stage-2 training set.
#[derive(Debug, Clone)]
pub struct LatentSource {
    pub mu: Array2<f64>,
    pub log_var: Array2<f64>,
}

impl LatentSource {
    pub fn new(mu: Array2<f64>, log_var: Array2<f64>) -> Result<Self> {
        if mu.shape() != log_var.shape() {
            return Err(Error::Shape {
                context: "latent moments",
                expected: mu.len(),
                actual: log_var.len(),
            });
        }
        Ok(LatentSource { mu, log_var })
    }

    pub fn len(&self) -> usize {
        self.mu.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.nrows() == 0
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, mode: LatentMode, rng: &mut R) -> Result<Array2<f64>> {
        match mode {
            LatentMode::Mean => Ok(self.mu.clone()),
            LatentMode::Sampled => {
                let eps = standard_normal_matrix(self.mu.nrows(), self.mu.ncols(), rng);
                Ok(GaussianLatent::with_noise(self.mu.clone(), self.log_var.clone(), eps)?.z)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Report {
    pub step_losses: Vec<f64>,
    /// Final-epoch means of the joint, regression and classification losses.
    pub final_loss: f64,
    pub final_reg_loss: f64,
    pub final_cls_loss: f64,
}

/// Trains classifier and regressor jointly on frozen latents. Latents are
/// redrawn once per epoch when `config.stage2_train_latents` is sampled.
pub fn stage2_train(
    latents: &LatentSource,
    targets: &Array2<f64>,
    u_tilde: &Array2<f64>,
    views: usize,
    config: &TrainConfig,
) -> Result<(Stage2Model, Stage2Report)> {
    config.validate()?;
    check_len("stage-2 latent width", views * config.latent_dim, latents.mu.ncols())?;
    check_len("stage-2 targets", latents.len(), targets.nrows())?;
    check_len("stage-2 view labels", latents.len(), u_tilde.nrows())?;
    if latents.is_empty() {
        return Err(Error::Data("stage 2 needs at least one training sample".into()));
    }
    let mut model = Stage2Model::new(views, config, &mut rng::stream(config.seed, &[tag::INIT, tag::STAGE2]));
    let mut adam = Adam::new(config.adam());
    let mut noise = rng::stream(config.seed, &[tag::NOISE, tag::STAGE2]);
    let mut step_losses = Vec::new();
    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    for epoch in 0..config.stage2_epochs {
        let z = latents.draw(config.stage2_train_latents, &mut noise)?;
        let mut sums = (0.0, 0.0, 0.0);
        let mut count = 0usize;
        for batch in epoch_batches(latents.len(), config.batch_size, config.seed, tag::STAGE2, epoch) {
            let zb = z.select(Axis(0), &batch);
            let yb = targets.select(Axis(0), &batch);
            let ub = u_tilde.select(Axis(0), &batch);
            let fwd = model.forward(zb.view())?;
            let (loss, reg, cls) = model.loss(&fwd, &yb, &ub);
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite stage-2 loss at epoch {epoch}")));
            }
            let grads = model.backward(&fwd, &yb, &ub, false)?;
            model.apply(&grads, &mut adam)?;
            step_losses.push(loss);
            sums = (sums.0 + loss, sums.1 + reg, sums.2 + cls);
            count += 1;
        }
        let c = count as f64;
        last = (sums.0 / c, sums.1 / c, sums.2 / c);
    }
    Ok((
        model,
        Stage2Report {
            step_losses,
            final_loss: last.0,
            final_reg_loss: last.1,
            final_cls_loss: last.2,
        },
    ))
}
