//! Two-stage view-selective model.
//!
//! Stage 1 trains one variational network per view, updating view `k` only on
//! samples whose view label has `u_k = 1`. Stage 2 freezes stage 1, feeds the
//! concatenated latents to a softmax view classifier, scales each latent
//! block by its classifier output and regresses the location from the
//! rescaled latents, trading the two squared losses off with `alpha`.

mod config;
mod pipeline;
mod stage1;
mod stage2;

use rand::seq::SliceRandom;

pub use config::{LatentMode, TrainConfig};
pub use pipeline::{Prediction, Predictions, VsdlPipeline, VsdlReport};
pub use stage1::{
    extract_latents, latent_moments, stage1_loss, stage1_train, Stage1Model, Stage1Report, Stage1Trainer, ViewForward,
    ViewGrads, ViewNetwork, ViewTrainer,
};
pub use stage2::{reweight, stage2_loss, stage2_train, LatentSource, Stage2Forward, Stage2Grads, Stage2Model, Stage2Report};

use crate::rng::{self, tag};

/// Shuffled mini-batches of `0..n` for one epoch.
pub(crate) fn epoch_batches(n: usize, batch_size: usize, seed: u64, stream: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[tag::SHUFFLE, stream, epoch as u64]);
    idx.shuffle(&mut r);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}
