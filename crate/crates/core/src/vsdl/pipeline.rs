use ndarray::{Array2, ArrayView2};

use super::{extract_latents, latent_moments, stage1_train, stage2_train, LatentSource, Stage1Model, Stage1Report, Stage2Model, Stage2Report, TrainConfig};
use crate::csi::{featurize, relative_csi, CsiMatrix, FeatureSet, Normalization, ViewSpec};
use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Trained stage-1 encoders and stage-2 networks. The stage-1 regression
/// heads are kept for inspection but play no part in prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct VsdlPipeline {
    pub stage1: Stage1Model,
    pub stage2: Stage2Model,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VsdlReport {
    pub stage1: Stage1Report,
    pub stage2: Stage2Report,
}

/// Batch predictions, one row per packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// Locations in the unit square.
    pub normalized: Array2<f64>,
    /// View weights `û`, empty (zero columns) for systems without a classifier.
    pub u_hat: Array2<f64>,
}

impl Predictions {
    pub fn meters(&self, norm: &Normalization) -> Array2<f64> {
        let mut out = self.normalized.clone();
        for mut row in out.rows_mut() {
            let p = norm.denormalize([row[0], row[1]]);
            row[0] = p[0];
            row[1] = p[1];
        }
        out
    }

    pub fn len(&self) -> usize {
        self.normalized.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.nrows() == 0
    }
}

/// Location of a single packet plus the dominant-view report.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub location_m: [f64; 2],
    pub u_hat: Vec<f64>,
}

impl VsdlPipeline {
    /// Stage 1 to completion, then stage 2 on the frozen latents.
    pub fn train(train: &FeatureSet, config: &TrainConfig) -> Result<(Self, VsdlReport)> {
        let (stage1, r1) = stage1_train(train, config).map_err(|e| e.in_stage("stage 1"))?;
        let views: Vec<ArrayView2<f64>> = train.views.iter().map(|v| v.view()).collect();
        let (mu, log_var) = latent_moments(&stage1, &views)?;
        let source = LatentSource::new(mu, log_var)?;
        let u_tilde = train.normalized_labels()?;
        let (stage2, r2) = stage2_train(&source, &train.targets, &u_tilde, stage1.view_count(), config).map_err(|e| e.in_stage("stage 2"))?;
        Ok((
            VsdlPipeline {
                stage1,
                stage2,
                config: config.clone(),
            },
            VsdlReport { stage1: r1, stage2: r2 },
        ))
    }

    pub fn predict_views(&self, views: &[ArrayView2<f64>]) -> Result<Predictions> {
        let mut noise = rng::stream(self.config.seed, &[tag::PREDICT]);
        let z = extract_latents(&self.stage1, views, self.config.predict_latents, &mut noise)?;
        let fwd = self.stage2.forward(z.view())?;
        Ok(Predictions {
            normalized: fwd.y_hat,
            u_hat: fwd.u_hat,
        })
    }

    pub fn predict_features(&self, set: &FeatureSet) -> Result<Predictions> {
        let views: Vec<ArrayView2<f64>> = set.views.iter().map(|v| v.view()).collect();
        self.predict_views(&views)
    }

    /// Full path from raw per-AP CSI to meters.
    pub fn predict(&self, raw: &[CsiMatrix], spec: &ViewSpec, norm: Option<&Normalization>) -> Result<Prediction> {
        let norm = norm.ok_or_else(|| Error::Data("missing normalization constants".into()))?;
        let rel = raw.iter().map(relative_csi).collect::<Result<Vec<_>>>()?;
        let views = featurize(&rel, spec)?;
        let arrays = views
            .into_iter()
            .map(|v| {
                let n = v.len();
                Array2::from_shape_vec((1, n), v).map_err(|e| Error::Data(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<ArrayView2<f64>> = arrays.iter().map(|a| a.view()).collect();
        let p = self.predict_views(&refs)?;
        Ok(Prediction {
            location_m: norm.denormalize([p.normalized[[0, 0]], p.normalized[[0, 1]]]),
            u_hat: p.u_hat.row(0).to_vec(),
        })
    }
}
