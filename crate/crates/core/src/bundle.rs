//! Trained-model bundles: a directory holding `bundle.json` plus one binary
//! network file per trained component. See `docs/FORMATS.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{dnn_train, vdl_train, DnnModel, VdlModel};
use crate::csi::{ApId, DatasetHeader, FeatureSet, Normalization, ViewSpec};
use crate::error::{Error, Result};
use crate::nn::io::{decode_networks, encode_networks};
use crate::nn::Mlp;
use crate::vsdl::{Predictions, Stage1Model, Stage2Model, TrainConfig, ViewNetwork, VsdlPipeline};

pub const BUNDLE_FORMAT: &str = "vsdl-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const MANIFEST: &str = "bundle.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Vsdl,
    Vdl,
    Dnn,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::Vsdl, SystemKind::Vdl, SystemKind::Dnn];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Vsdl => "vsdl",
            SystemKind::Vdl => "vdl",
            SystemKind::Dnn => "dnn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SystemKind::Vsdl => "VSDL",
            SystemKind::Vdl => "VDL",
            SystemKind::Dnn => "DNN",
        }
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vsdl" => Ok(SystemKind::Vsdl),
            "vdl" => Ok(SystemKind::Vdl),
            "dnn" => Ok(SystemKind::Dnn),
            _ => Err(Error::Config(format!("unknown system `{s}` (expected vsdl, vdl or dnn)"))),
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature layout a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub ap_ids: Vec<ApId>,
    pub antenna_pairs: usize,
    pub subcarriers: usize,
    pub view_spec: ViewSpec,
    pub normalization: Normalization,
}

impl DataSpec {
    pub fn from_header(h: &DatasetHeader) -> Self {
        DataSpec {
            ap_ids: h.ap_ids.clone(),
            antenna_pairs: h.antenna_pairs,
            subcarriers: h.subcarriers,
            view_spec: h.view_spec.clone(),
            normalization: h.normalization,
        }
    }

    /// Errors unless `h` describes the same features and coordinate frame.
    pub fn check_compatible(&self, h: &DatasetHeader) -> Result<()> {
        let other = DataSpec::from_header(h);
        if other.ap_ids != self.ap_ids || other.antenna_pairs != self.antenna_pairs || other.subcarriers != self.subcarriers {
            return Err(Error::Data("dataset feature layout does not match the model".into()));
        }
        if other.view_spec != self.view_spec {
            return Err(Error::Data("dataset view spec does not match the model".into()));
        }
        if other.normalization != self.normalization {
            return Err(Error::Data("dataset normalization does not match the model".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedSystem {
    Vsdl(VsdlPipeline),
    Vdl(VdlModel),
    Dnn(DnnModel),
}

impl TrainedSystem {
    pub fn kind(&self) -> SystemKind {
        match self {
            TrainedSystem::Vsdl(_) => SystemKind::Vsdl,
            TrainedSystem::Vdl(_) => SystemKind::Vdl,
            TrainedSystem::Dnn(_) => SystemKind::Dnn,
        }
    }

    pub fn predict_features(&self, set: &FeatureSet) -> Result<Predictions> {
        match self {
            TrainedSystem::Vsdl(p) => p.predict_features(set),
            TrainedSystem::Vdl(m) => m.predict_features(set),
            TrainedSystem::Dnn(m) => m.predict_features(set),
        }
    }
}

/// Final training losses, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub system: SystemKind,
    /// Stage-1 final loss per view (VSDL only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage1_losses: Vec<f64>,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_reg_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cls_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkFile {
    role: String,
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    system: SystemKind,
    data: DataSpec,
    train_config: TrainConfig,
    networks: Vec<NetworkFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub data: DataSpec,
    pub config: TrainConfig,
    pub system: TrainedSystem,
}

impl Bundle {
    pub fn train(kind: SystemKind, header: &DatasetHeader, train: &FeatureSet, config: &TrainConfig) -> Result<(Self, TrainingSummary)> {
        let (system, summary) = match kind {
            SystemKind::Vsdl => {
                let (p, r) = VsdlPipeline::train(train, config)?;
                let s = TrainingSummary {
                    system: kind,
                    stage1_losses: r.stage1.final_losses,
                    final_loss: r.stage2.final_loss,
                    final_reg_loss: Some(r.stage2.final_reg_loss),
                    final_cls_loss: Some(r.stage2.final_cls_loss),
                };
                (TrainedSystem::Vsdl(p), s)
            }
            SystemKind::Vdl => {
                let (m, r) = vdl_train(train, config)?;
                (TrainedSystem::Vdl(m), baseline_summary(kind, r.final_loss))
            }
            SystemKind::Dnn => {
                let (m, r) = dnn_train(train, config)?;
                (TrainedSystem::Dnn(m), baseline_summary(kind, r.final_loss))
            }
        };
        Ok((
            Bundle {
                data: DataSpec::from_header(header),
                config: config.clone(),
                system,
            },
            summary,
        ))
    }

    pub fn kind(&self) -> SystemKind {
        self.system.kind()
    }

    pub fn predict_features(&self, set: &FeatureSet) -> Result<Predictions> {
        self.system.predict_features(set)
    }

    /// Network files in bundle order, as `(role, file name, networks)`.
    fn network_files(&self) -> Vec<(String, String, Vec<&Mlp>)> {
        match &self.system {
            TrainedSystem::Vsdl(p) => {
                let mut out: Vec<_> = p
                    .stage1
                    .views
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (format!("stage1_view{}", k + 1), format!("stage1_view{}.vsnn", k + 1), vec![&v.latent, &v.regression]))
                    .collect();
                out.push(("stage2".into(), "stage2.vsnn".into(), vec![&p.stage2.classifier, &p.stage2.regressor]));
                out
            }
            TrainedSystem::Vdl(m) => vec![("vdl".into(), "vdl.vsnn".into(), vec![&m.net.latent, &m.net.regression])],
            TrainedSystem::Dnn(m) => vec![("dnn".into(), "dnn.vsnn".into(), vec![&m.net])],
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut networks = Vec::new();
        for (role, file, nets) in self.network_files() {
            let bytes = encode_networks(&nets);
            let sha256 = hex::encode(Sha256::digest(&bytes));
            fs::write(dir.join(&file), bytes)?;
            networks.push(NetworkFile { role, file, sha256 });
        }
        let manifest = Manifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            system: self.kind(),
            data: self.data.clone(),
            train_config: self.config.clone(),
            networks,
        };
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        fs::write(dir.join(MANIFEST), json)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format != BUNDLE_FORMAT {
            return Err(Error::ModelFormat(format!("not a model bundle (format `{}`)", manifest.format)));
        }
        if manifest.version != BUNDLE_VERSION {
            return Err(Error::ModelFormat(format!("unsupported bundle version {}", manifest.version)));
        }
        manifest.train_config.validate()?;
        let mut loaded = Vec::with_capacity(manifest.networks.len());
        for nf in &manifest.networks {
            let bytes = fs::read(dir.join(&nf.file))?;
            if hex::encode(Sha256::digest(&bytes)) != nf.sha256 {
                return Err(Error::ModelFormat(format!("checksum mismatch for {}", nf.file)));
            }
            loaded.push((nf.role.as_str(), decode_networks(&bytes)?));
        }
        let config = manifest.train_config;
        let system = match manifest.system {
            SystemKind::Vsdl => {
                let views = manifest.data.view_spec.len();
                if loaded.len() != views + 1 {
                    return Err(Error::ModelFormat(format!("expected {} network files, found {}", views + 1, loaded.len())));
                }
                let stage2_nets = loaded.pop().expect("checked length");
                let [classifier, regressor] = pair(stage2_nets, "stage2")?;
                let stage1 = loaded
                    .into_iter()
                    .map(|(role, nets)| {
                        let [latent, regression] = pair((role, nets), role)?;
                        ViewNetwork::from_parts(latent, regression)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let stage2 = Stage2Model::from_parts(classifier, regressor, config.alpha)?;
                if stage2.views != views || stage1.iter().any(|v| v.latent_dim() != stage2.latent_dim) {
                    return Err(Error::ModelFormat("stage-1 and stage-2 networks disagree on shape".into()));
                }
                TrainedSystem::Vsdl(VsdlPipeline {
                    stage1: Stage1Model { views: stage1 },
                    stage2,
                    config: config.clone(),
                })
            }
            SystemKind::Vdl => {
                let nets = single(loaded)?;
                let [latent, regression] = pair(nets, "vdl")?;
                TrainedSystem::Vdl(VdlModel {
                    net: ViewNetwork::from_parts(latent, regression)?,
                    config: config.clone(),
                })
            }
            SystemKind::Dnn => {
                let (_, mut nets) = single(loaded)?;
                if nets.len() != 1 {
                    return Err(Error::ModelFormat("dnn file must hold one network".into()));
                }
                TrainedSystem::Dnn(DnnModel { net: nets.remove(0) })
            }
        };
        Ok(Bundle {
            data: manifest.data,
            config,
            system,
        })
    }
}

fn baseline_summary(system: SystemKind, final_loss: f64) -> TrainingSummary {
    TrainingSummary {
        system,
        stage1_losses: Vec::new(),
        final_loss,
        final_reg_loss: None,
        final_cls_loss: None,
    }
}

fn single(mut loaded: Vec<(&str, Vec<Mlp>)>) -> Result<(&str, Vec<Mlp>)> {
    if loaded.len() != 1 {
        return Err(Error::ModelFormat(format!("expected one network file, found {}", loaded.len())));
    }
    Ok(loaded.remove(0))
}

fn pair((_, nets): (&str, Vec<Mlp>), role: &str) -> Result<[Mlp; 2]> {
    <[Mlp; 2]>::try_from(nets).map_err(|n| Error::ModelFormat(format!("{role} file must hold two networks, found {}", n.len())))
}
