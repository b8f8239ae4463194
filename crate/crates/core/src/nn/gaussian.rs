//! Mean-field Gaussian latents with the reparameterization `z = μ + σ ⊙ ε`.
//!
//! Networks emit `[μ | log σ²]`; `σ = exp(log σ² / 2)` keeps σ positive.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;

/// A batch of latents, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent {
    pub mu: Array2<f64>,
    pub log_var: Array2<f64>,
    pub sigma: Array2<f64>,
    pub eps: Array2<f64>,
    pub z: Array2<f64>,
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || standard_normal(rng))
}

impl GaussianLatent {
    pub fn with_noise(mu: Array2<f64>, log_var: Array2<f64>, eps: Array2<f64>) -> Result<Self> {
        if mu.shape() != log_var.shape() || mu.shape() != eps.shape() {
            return Err(Error::Shape {
                context: "gaussian latent",
                expected: mu.len(),
                actual: if mu.shape() != log_var.shape() { log_var.len() } else { eps.len() },
            });
        }
        let sigma = log_var.mapv(|lv| (0.5 * lv).exp());
        let z = &mu + &(&sigma * &eps);
        Ok(GaussianLatent {
            mu,
            log_var,
            sigma,
            eps,
            z,
        })
    }

    /// Splits a `2J`-wide head output into `[μ | log σ²]` and draws fresh `ε`.
    pub fn sample_head<R: Rng + ?Sized>(head: ArrayView2<f64>, rng: &mut R) -> Result<Self> {
        let (mu, log_var) = split_head(head)?;
        let eps = standard_normal_matrix(mu.nrows(), mu.ncols(), rng);
        Self::with_noise(mu, log_var, eps)
    }

    /// Head output with `ε = 0`, so `z = μ`.
    pub fn mean_head(head: ArrayView2<f64>) -> Result<Self> {
        let (mu, log_var) = split_head(head)?;
        let eps = Array2::zeros(mu.raw_dim());
        Self::with_noise(mu, log_var, eps)
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.ncols()
    }

    /// KL divergence from the standard normal, per row.
    pub fn kl_rows(&self) -> Array1<f64> {
        let mut terms = self.mu.mapv(|m| m * m);
        terms.zip_mut_with(&self.log_var, |t, &lv| *t += lv.exp() - lv - 1.0);
        terms.sum_axis(Axis(1)) * 0.5
    }

    /// Gradient with respect to the head output `[μ | log σ²]`, given the
    /// upstream gradient on `z` and the weight applied to the KL term of each row.
    pub fn backward(&self, grad_z: &Array2<f64>, kl_scale: f64) -> Array2<f64> {
        let j = self.latent_dim();
        let mut out = Array2::zeros((self.mu.nrows(), 2 * j));
        {
            let mut d_mu = out.slice_mut(s![.., ..j]);
            d_mu.assign(grad_z);
            d_mu.scaled_add(kl_scale, &self.mu);
        }
        {
            let mut d_lv = out.slice_mut(s![.., j..]);
            d_lv.assign(&(grad_z * &self.eps * &self.sigma * 0.5));
            d_lv.zip_mut_with(&self.log_var, |d, &lv| *d += kl_scale * 0.5 * (lv.exp() - 1.0));
        }
        out
    }
}

fn split_head(head: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    if !head.ncols().is_multiple_of(2) || head.ncols() == 0 {
        return Err(Error::Shape {
            context: "gaussian head width (must be even)",
            expected: head.ncols() + 1,
            actual: head.ncols(),
        });
    }
    let j = head.ncols() / 2;
    Ok((head.slice(s![.., ..j]).to_owned(), head.slice(s![.., j..]).to_owned()))
}

/// `½ Σ_j (μ_j² + σ_j² − ln σ_j² − 1)`.
pub fn kl_diag_gaussian(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if mu.len() != sigma.len() {
        return Err(Error::Shape {
            context: "kl_diag_gaussian",
            expected: mu.len(),
            actual: sigma.len(),
        });
    }
    let mut total = 0.0;
    for (&m, &s) in mu.iter().zip(sigma) {
        if !(s > 0.0) {
            return Err(Error::NonPositiveSigma(s));
        }
        let var = s * s;
        total += m * m + var - var.ln() - 1.0;
    }
    Ok(0.5 * total)
}

/// Single-sample reparameterized draw.
pub fn reparameterize<R: Rng + ?Sized>(mu: &[f64], sigma: &[f64], rng: &mut R) -> Result<GaussianLatent> {
    if mu.len() != sigma.len() {
        return Err(Error::Shape {
            context: "reparameterize",
            expected: mu.len(),
            actual: sigma.len(),
        });
    }
    if let Some(&s) = sigma.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositiveSigma(s));
    }
    let j = mu.len();
    let mu_m = Array2::from_shape_vec((1, j), mu.to_vec()).expect("row shape");
    let lv = Array2::from_shape_vec((1, j), sigma.iter().map(|s| 2.0 * s.ln()).collect()).expect("row shape");
    let eps = standard_normal_matrix(1, j, rng);
    GaussianLatent::with_noise(mu_m, lv, eps)
}
