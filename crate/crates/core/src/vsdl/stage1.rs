use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::{epoch_batches, LatentMode, TrainConfig};
use crate::csi::FeatureSet;
use crate::error::{check_len, Error, Result};
use crate::nn::{kl_diag_gaussian, squared_error_grad, squared_error_rows, Activation, Adam, GaussianLatent, Mlp, MlpGrads, MlpTrace};
use crate::rng::{self, tag, StreamRng};

/// Variational encoder `h_k` with a `[μ | log σ²]` head, plus the regression
/// network `g_k` that maps `z_k` to a location.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewNetwork {
    pub latent: Mlp,
    pub regression: Mlp,
}

#[derive(Debug, Clone)]
pub struct ViewForward {
    pub latent: GaussianLatent,
    pub y_hat: Array2<f64>,
    latent_trace: MlpTrace,
    regression_trace: MlpTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewGrads {
    pub latent: MlpGrads,
    pub regression: MlpGrads,
}

impl ViewGrads {
    pub fn flatten(&self) -> Vec<f64> {
        [self.latent.flatten(), self.regression.flatten()].concat()
    }
}

impl ViewNetwork {
    pub fn new<R: rand::Rng + ?Sized>(input_dim: usize, config: &TrainConfig, rng: &mut R) -> Self {
        let j = config.latent_dim;
        ViewNetwork {
            latent: Mlp::new(input_dim, &config.latent_hidden, 2 * j, Activation::Identity, rng),
            regression: Mlp::new(j, &config.regression_hidden, 2, Activation::Identity, rng),
        }
    }

    pub fn from_parts(latent: Mlp, regression: Mlp) -> Result<Self> {
        if !latent.output_dim().is_multiple_of(2) {
            return Err(Error::Config("latent head width must be even".into()));
        }
        check_len("regression input width", latent.output_dim() / 2, regression.input_dim())?;
        check_len("regression output width", 2, regression.output_dim())?;
        Ok(ViewNetwork { latent, regression })
    }

    pub fn input_dim(&self) -> usize {
        self.latent.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent.output_dim() / 2
    }

    /// Forward pass with an explicit noise matrix `ε` (`n × J`).
    pub fn forward_with_noise(&self, x: ArrayView2<f64>, eps: Array2<f64>) -> Result<ViewForward> {
        let latent_trace = self.latent.forward(x)?;
        let head = latent_trace.output().expect("non-empty trace");
        let j = self.latent_dim();
        let mu = head.slice(ndarray::s![.., ..j]).to_owned();
        let log_var = head.slice(ndarray::s![.., j..]).to_owned();
        if eps.shape() != mu.shape() {
            return Err(Error::Shape {
                context: "latent noise",
                expected: mu.len(),
                actual: eps.len(),
            });
        }
        let latent = GaussianLatent::with_noise(mu, log_var, eps)?;
        let regression_trace = self.regression.forward(latent.z.view())?;
        let y_hat = regression_trace.output().expect("non-empty trace").clone();
        Ok(ViewForward {
            latent,
            y_hat,
            latent_trace,
            regression_trace,
        })
    }

    pub fn forward<R: rand::Rng + ?Sized>(&self, x: ArrayView2<f64>, mode: LatentMode, rng: &mut R) -> Result<ViewForward> {
        let eps = match mode {
            LatentMode::Sampled => crate::nn::standard_normal_matrix(x.nrows(), self.latent_dim(), rng),
            LatentMode::Mean => Array2::zeros((x.nrows(), self.latent_dim())),
        };
        self.forward_with_noise(x, eps)
    }

    /// Mean over rows of `Σ(y − ŷ)² + kl_weight · KL`.
    pub fn loss(&self, fwd: &ViewForward, y: &Array2<f64>, kl_weight: f64) -> f64 {
        let reg = squared_error_rows(y, &fwd.y_hat);
        let kl = fwd.latent.kl_rows();
        (reg + kl * kl_weight).mean().unwrap_or(0.0)
    }

    /// Gradients of [`ViewNetwork::loss`].
    pub fn backward(&self, fwd: &ViewForward, y: &Array2<f64>, kl_weight: f64) -> Result<ViewGrads> {
        let n = y.nrows() as f64;
        let d_y = squared_error_grad(y, &fwd.y_hat, 1.0 / n);
        let (regression, d_z) = self.regression.backward(&fwd.regression_trace, &d_y, true)?;
        let d_head = fwd.latent.backward(&d_z.expect("input gradient requested"), kl_weight / n);
        let (latent, _) = self.latent.backward(&fwd.latent_trace, &d_head, false)?;
        Ok(ViewGrads { latent, regression })
    }

    fn apply(&mut self, grads: &ViewGrads, adam: &mut Adam) -> Result<()> {
        let g: Vec<&[f64]> = grads.latent.slices().into_iter().chain(grads.regression.slices()).collect();
        let mut p: Vec<&mut [f64]> = self.latent.param_slices_mut();
        p.extend(self.regression.param_slices_mut());
        adam.step(&mut p, &g)
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        [self.latent.flatten_params(), self.regression.flatten_params()].concat()
    }
}

/// Per-sample stage-1 objective; `None` when the view is not informative.
pub fn stage1_loss(y: [f64; 2], y_hat: [f64; 2], mu: &[f64], sigma: &[f64], u_k: u8, kl_weight: f64) -> Result<Option<f64>> {
    if u_k == 0 {
        return Ok(None);
    }
    let reg = (y[0] - y_hat[0]).powi(2) + (y[1] - y_hat[1]).powi(2);
    Ok(Some(reg + kl_weight * kl_diag_gaussian(mu, sigma)?))
}

/// Optimizer state and noise stream for one view network.
#[derive(Debug, Clone)]
pub struct ViewTrainer {
    pub net: ViewNetwork,
    adam: Adam,
    noise: StreamRng,
    kl_weight: f64,
}

impl ViewTrainer {
    pub fn new(net: ViewNetwork, config: &TrainConfig, noise: StreamRng) -> Self {
        ViewTrainer {
            net,
            adam: Adam::new(config.adam()),
            noise,
            kl_weight: config.kl_weight,
        }
    }

    /// One Adam step on the given rows; returns the batch loss.
    pub fn step(&mut self, x: ArrayView2<f64>, y: &Array2<f64>) -> Result<f64> {
        let fwd = self.net.forward(x, LatentMode::Sampled, &mut self.noise)?;
        let loss = self.net.loss(&fwd, y, self.kl_weight);
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite stage-1 loss {loss}")));
        }
        let grads = self.net.backward(&fwd, y, self.kl_weight)?;
        self.net.apply(&grads, &mut self.adam)?;
        Ok(loss)
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Model {
    pub views: Vec<ViewNetwork>,
}

impl Stage1Model {
    pub fn new(input_dims: &[usize], config: &TrainConfig) -> Self {
        let views = input_dims
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let mut r = rng::stream(config.seed, &[tag::INIT, tag::STAGE1, k as u64]);
                ViewNetwork::new(d, config, &mut r)
            })
            .collect();
        Stage1Model { views }
    }

    pub fn latent_dim(&self) -> usize {
        self.views.first().map_or(0, |v| v.latent_dim())
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }
}

/// Stage-1 training state across all views.
#[derive(Debug, Clone)]
pub struct Stage1Trainer {
    pub views: Vec<ViewTrainer>,
}

impl Stage1Trainer {
    pub fn new(model: Stage1Model, config: &TrainConfig) -> Self {
        let views = model
            .views
            .into_iter()
            .enumerate()
            .map(|(k, net)| ViewTrainer::new(net, config, rng::stream(config.seed, &[tag::NOISE, tag::STAGE1, k as u64])))
            .collect();
        Stage1Trainer { views }
    }

    /// One training step on a batch. View `k` is updated only from rows with
    /// `labels[row][k] == 1`; with no such row it is left untouched (no
    /// optimizer step, no moment update) and its entry is `None`.
    pub fn step(&mut self, inputs: &[ArrayView2<f64>], targets: ArrayView2<f64>, labels: &[Vec<u8>]) -> Result<Vec<Option<f64>>> {
        check_len("stage-1 view inputs", self.views.len(), inputs.len())?;
        check_len("stage-1 labels", targets.nrows(), labels.len())?;
        let mut losses = Vec::with_capacity(self.views.len());
        for (k, (trainer, x)) in self.views.iter_mut().zip(inputs).enumerate() {
            check_len("stage-1 batch rows", targets.nrows(), x.nrows())?;
            let rows: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, u)| u.get(k).copied() == Some(1))
                .map(|(i, _)| i)
                .collect();
            if rows.is_empty() {
                losses.push(None);
                continue;
            }
            let xs = x.select(Axis(0), &rows);
            let ys = targets.select(Axis(0), &rows);
            losses.push(Some(trainer.step(xs.view(), &ys)?));
        }
        Ok(losses)
    }

    pub fn into_model(self) -> Stage1Model {
        Stage1Model {
            views: self.views.into_iter().map(|t| t.net).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Report {
    /// Loss of every optimizer step, per view.
    pub step_losses: Vec<Vec<f64>>,
    /// Mean step loss of the final epoch, per view.
    pub final_losses: Vec<f64>,
}

/// Trains every view network on its informative samples.
pub fn stage1_train(train: &FeatureSet, config: &TrainConfig) -> Result<(Stage1Model, Stage1Report)> {
    config.validate()?;
    let k = train.views.len();
    if let Some(i) = train.labels.iter().position(|u| u.iter().all(|&b| b == 0)) {
        return Err(Error::Data(format!("training sample {i} has no informative view")));
    }
    for view in 0..k {
        if !train.labels.iter().any(|u| u[view] == 1) {
            return Err(Error::UninformativeView(view + 1));
        }
    }
    let dims: Vec<usize> = train.views.iter().map(|v| v.ncols()).collect();
    let mut trainer = Stage1Trainer::new(Stage1Model::new(&dims, config), config);
    let mut step_losses = vec![Vec::new(); k];
    let mut final_losses = vec![f64::NAN; k];
    for epoch in 0..config.stage1_epochs {
        let mut epoch_losses = vec![Vec::new(); k];
        for batch in epoch_batches(train.len(), config.batch_size, config.seed, tag::STAGE1, epoch) {
            let xs: Vec<Array2<f64>> = train.views.iter().map(|v| v.select(Axis(0), &batch)).collect();
            let views: Vec<ArrayView2<f64>> = xs.iter().map(|x| x.view()).collect();
            let ys = train.targets.select(Axis(0), &batch);
            let labels: Vec<Vec<u8>> = batch.iter().map(|&i| train.labels[i].clone()).collect();
            for (v, l) in trainer.step(&views, ys.view(), &labels)?.into_iter().enumerate() {
                if let Some(l) = l {
                    step_losses[v].push(l);
                    epoch_losses[v].push(l);
                }
            }
        }
        for (v, losses) in epoch_losses.iter().enumerate() {
            if !losses.is_empty() {
                final_losses[v] = losses.iter().sum::<f64>() / losses.len() as f64;
            }
        }
    }
    Ok((trainer.into_model(), Stage1Report { step_losses, final_losses }))
}

/// Per-view `(μ, log σ²)` for a batch, concatenated over views (`n × KJ` each).
pub fn latent_moments(model: &Stage1Model, views: &[ArrayView2<f64>]) -> Result<(Array2<f64>, Array2<f64>)> {
    check_len("latent extraction views", model.view_count(), views.len())?;
    let mut mus = Vec::with_capacity(views.len());
    let mut lvs = Vec::with_capacity(views.len());
    for (net, x) in model.views.iter().zip(views) {
        let head = net.latent.predict(*x)?;
        let j = net.latent_dim();
        mus.push(head.slice(ndarray::s![.., ..j]).to_owned());
        lvs.push(head.slice(ndarray::s![.., j..]).to_owned());
    }
    let cat = |parts: &[Array2<f64>]| {
        let v: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.view()).collect();
        concatenate(Axis(1), &v).map_err(|e| Error::Data(e.to_string()))
    };
    Ok((cat(&mus)?, cat(&lvs)?))
}

/// Latents `z = {z_1, …, z_K}` for every row, regardless of view labels.
pub fn extract_latents<R: rand::Rng + ?Sized>(model: &Stage1Model, views: &[ArrayView2<f64>], mode: LatentMode, rng: &mut R) -> Result<Array2<f64>> {
    let (mu, log_var) = latent_moments(model, views)?;
    Ok(match mode {
        LatentMode::Mean => mu,
        LatentMode::Sampled => {
            let eps = crate::nn::standard_normal_matrix(mu.nrows(), mu.ncols(), rng);
            GaussianLatent::with_noise(mu, log_var, eps)?.z
        }
    })
}
