use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{config_hash, median, ErrorReport, ExperimentConfig, RunMetadata};
use crate::bundle::{Bundle, SystemKind, TrainingSummary};
use crate::csi::{Dataset, FeatureSet, Split};
use crate::error::{Error, Result};

/// Mean test error of one system across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: SystemKind,
    pub seeds: Vec<u64>,
    pub mean_m: Vec<f64>,
    pub median_of_means_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub summaries: Vec<SystemSummary>,
    pub training: Vec<TrainingSummary>,
    /// Seed-major, then system in config order.
    pub reports: Vec<ErrorReport>,
}

impl ExperimentResult {
    pub fn summary(&self, system: SystemKind) -> Option<&SystemSummary> {
        self.summaries.iter().find(|s| s.system == system)
    }
}

fn stage_name(kind: SystemKind) -> &'static str {
    match kind {
        SystemKind::Vsdl => "train vsdl",
        SystemKind::Vdl => "train vdl",
        SystemKind::Dnn => "train dnn",
    }
}

/// Scores a bundle on the test split of a dataset.
pub fn evaluate_bundle(bundle: &Bundle, dataset: &Dataset, config_hash: &str) -> Result<ErrorReport> {
    bundle.data.check_compatible(&dataset.header)?;
    let test = FeatureSet::from_records(&dataset.header, dataset.split(Split::Test))?;
    let pred = bundle.predict_features(&test)?;
    let metadata = RunMetadata {
        system: bundle.kind(),
        seed: bundle.config.seed,
        config_hash: config_hash.to_string(),
    };
    ErrorReport::evaluate(metadata, &pred, &test, &pred.meters(&bundle.data.normalization))
}

/// Trains one system on the training split and scores it on the test split.
pub fn train_and_evaluate(
    kind: SystemKind,
    dataset: &Dataset,
    train: &FeatureSet,
    config: &crate::vsdl::TrainConfig,
    config_hash: &str,
) -> Result<(Bundle, TrainingSummary, ErrorReport)> {
    let (bundle, summary) = Bundle::train(kind, &dataset.header, train, config).map_err(|e| e.in_stage(stage_name(kind)))?;
    let report = evaluate_bundle(&bundle, dataset, config_hash).map_err(|e| e.in_stage("evaluate"))?;
    Ok((bundle, summary, report))
}

/// Simulates a dataset per seed, trains every configured system on it and
/// evaluates each on the held-out points.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let hash = config_hash(config)?;
    let mut reports = Vec::new();
    let mut training = Vec::new();
    for &seed in &config.seeds {
        let (sim, train_cfg) = config.for_seed(seed);
        let dataset = sim.generate().map_err(|e| e.in_stage("simulate"))?;
        let train = FeatureSet::from_records(&dataset.header, dataset.split(Split::Train)).map_err(|e| e.in_stage("featurize"))?;
        for &kind in &config.systems {
            let (_, summary, report) = train_and_evaluate(kind, &dataset, &train, &train_cfg, &hash)?;
            training.push(summary);
            reports.push(report);
        }
    }
    let summaries = config
        .systems
        .iter()
        .map(|&system| {
            let mean_m: Vec<f64> = reports.iter().filter(|r| r.metadata.system == system).map(|r| r.mean_m).collect();
            SystemSummary {
                system,
                seeds: config.seeds.clone(),
                median_of_means_m: median(&mean_m),
                mean_m,
            }
        })
        .collect();
    Ok(ExperimentResult {
        config_hash: hash,
        summaries,
        training,
        reports,
    })
}

/// Plain-text comparison of mean localization error per system and seed.
pub fn comparison_table(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let seeds = result.summaries.first().map(|s| s.seeds.clone()).unwrap_or_default();
    let _ = write!(out, "{:<8}", "system");
    for s in &seeds {
        let _ = write!(out, " {:>9}", format!("seed {s}"));
    }
    let _ = writeln!(out, " {:>9}", "median");
    for s in &result.summaries {
        let _ = write!(out, "{:<8}", s.system.label());
        for m in &s.mean_m {
            let _ = write!(out, " {m:>9.4}");
        }
        let _ = writeln!(out, " {:>9.4}", s.median_of_means_m);
    }
    let _ = writeln!(out, "mean localization error on test points, meters");
    let _ = writeln!(out, "config sha256 {}", result.config_hash);
    out
}

#[derive(Serialize)]
struct CdfRow {
    system: SystemKind,
    seed: u64,
    error_m: f64,
    fraction: f64,
}

/// CSV of every report's CDF: `system,seed,error_m,fraction`.
pub fn cdf_csv(reports: &[ErrorReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for c in &r.cdf {
            w.serialize(CdfRow {
                system: r.metadata.system,
                seed: r.metadata.seed,
                error_m: c.error_m,
                fraction: c.fraction,
            })
            .map_err(|e| Error::Data(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}
