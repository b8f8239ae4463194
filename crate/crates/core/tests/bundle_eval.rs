use std::fs;

use vsdl_core::bundle::{Bundle, SystemKind};
use vsdl_core::csi::{FeatureSet, Split};
use vsdl_core::eval::{cdf_csv, comparison_table, config_hash, evaluate_bundle, run_experiment, ExperimentConfig};
use vsdl_core::vsdl::TrainConfig;
use vsdl_core::Error;

fn small_experiment() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seeds: vec![4, 9],
        ..ExperimentConfig::default()
    };
    cfg.simulation.packets_per_point = 3;
    cfg.train = TrainConfig {
        latent_dim: 4,
        latent_hidden: vec![16],
        regression_hidden: vec![8],
        classifier_hidden: vec![8],
        regressor_hidden: vec![8],
        dnn_hidden: vec![16],
        stage1_epochs: 2,
        stage2_epochs: 2,
        baseline_epochs: 2,
        ..TrainConfig::default()
    };
    cfg
}

#[test]
fn saved_bundles_predict_identically() {
    let exp = small_experiment();
    let (sim, train_cfg) = exp.for_seed(4);
    let data = sim.generate().unwrap();
    let train = FeatureSet::from_records(&data.header, data.split(Split::Train)).unwrap();
    let test = FeatureSet::from_records(&data.header, data.split(Split::Test)).unwrap();
    for kind in SystemKind::ALL {
        let (bundle, _) = Bundle::train(kind, &data.header, &train, &train_cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bundle.save(dir.path()).unwrap();
        let loaded = Bundle::load(dir.path()).unwrap();
        assert_eq!(loaded.kind(), kind);
        let (a, b) = (bundle.predict_features(&test).unwrap(), loaded.predict_features(&test).unwrap());
        assert_eq!(a.normalized, b.normalized, "{kind}");
        assert_eq!(a.u_hat, b.u_hat, "{kind}");
        assert_eq!(evaluate_bundle(&bundle, &data, "h").unwrap(), evaluate_bundle(&loaded, &data, "h").unwrap());
    }
}

#[test]
fn corrupted_network_file_is_rejected() {
    let exp = small_experiment();
    let (sim, train_cfg) = exp.for_seed(4);
    let data = sim.generate().unwrap();
    let train = FeatureSet::from_records(&data.header, data.split(Split::Train)).unwrap();
    let (bundle, _) = Bundle::train(SystemKind::Dnn, &data.header, &train, &train_cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    let path = dir.path().join("dnn.vsnn");
    let mut bytes = fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(Bundle::load(dir.path()), Err(Error::ModelFormat(_))));

    fs::remove_file(&path).unwrap();
    assert!(matches!(Bundle::load(dir.path()), Err(Error::Io(_))));
}

#[test]
fn bundle_rejects_mismatched_dataset() {
    let exp = small_experiment();
    let (sim, train_cfg) = exp.for_seed(4);
    let data = sim.generate().unwrap();
    let train = FeatureSet::from_records(&data.header, data.split(Split::Train)).unwrap();
    let (bundle, _) = Bundle::train(SystemKind::Dnn, &data.header, &train, &train_cfg).unwrap();
    let mut other = data.clone();
    other.header.ap_ids.pop();
    assert!(evaluate_bundle(&bundle, &other, "h").is_err());
}

#[test]
fn experiment_reports_are_consistent() {
    let exp = small_experiment();
    let result = run_experiment(&exp).unwrap();
    assert_eq!(result.config_hash, config_hash(&exp).unwrap());
    assert_eq!(result.reports.len(), 6);
    for r in &result.reports {
        let mean = r.errors_m.iter().sum::<f64>() / r.errors_m.len() as f64;
        assert!((mean - r.mean_m).abs() < 1e-12);
        assert_eq!(r.samples, 9 * 3);
        assert_eq!(r.cdf.len(), r.samples);
        assert_eq!(r.cdf.last().unwrap().fraction, 1.0);
        assert!(r.cdf.windows(2).all(|w| w[0].error_m <= w[1].error_m && w[0].fraction < w[1].fraction));
        assert_eq!(r.median_m, r.percentiles_m["p50"]);
        assert_eq!(r.points.len(), 9);
        let point_mean = r.points.iter().map(|p| p.mean_error_m * p.packets as f64).sum::<f64>() / r.samples as f64;
        assert!((point_mean - r.mean_m).abs() < 1e-12);
    }
    for s in &result.summaries {
        let means: Vec<f64> = result.reports.iter().filter(|r| r.metadata.system == s.system).map(|r| r.mean_m).collect();
        assert_eq!(s.mean_m, means);
        assert_eq!(s.median_of_means_m, (means[0] + means[1]) / 2.0);
    }
    let table = comparison_table(&result);
    for s in &result.summaries {
        let line = table.lines().find(|l| l.starts_with(s.system.label())).unwrap();
        let cells: Vec<f64> = line.split_whitespace().skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 3);
        for (c, m) in cells.iter().zip(&s.mean_m) {
            assert!((c - m).abs() <= 5e-5);
        }
    }
    let csv = cdf_csv(&result.reports).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6 * 27);
    assert_eq!(csv.lines().next().unwrap(), "system,seed,error_m,fraction");
    assert_eq!(run_experiment(&exp).unwrap(), result);
}
