//! Line-delimited JSON dataset files.
//!
//! The first line is a header record (`"kind": "header"`), every following
//! line one packet (`"kind": "packet"`). Per-AP relative CSI is stored as
//! `[re, im]` pairs, antenna-pair major, subcarrier minor. See `docs/FORMATS.md`.

use std::io::{BufRead, Write};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{featurize, featurize_full, ApId, MultiviewSample, Normalization, RelativeCsiVector, ViewSpec};
use crate::error::{Error, Result};

pub const DATASET_FORMAT: &str = "vsdl-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    /// Canonical AP order, used for the undivided feature vector.
    pub ap_ids: Vec<ApId>,
    pub antenna_pairs: usize,
    pub subcarriers: usize,
    pub view_spec: ViewSpec,
    pub normalization: Normalization,
    pub seed: u64,
    pub packets_per_point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApPhasors {
    pub ap_id: ApId,
    pub phasors: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub point_id: u32,
    pub packet: u32,
    pub split: Split,
    pub raw_location_m: [f64; 2],
    pub location: [f64; 2],
    pub view_label: Vec<u8>,
    pub aps: Vec<ApPhasors>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header(DatasetHeader),
    Packet(PacketRecord),
}

impl PacketRecord {
    pub fn from_relative(
        point_id: u32,
        packet: u32,
        split: Split,
        raw_location_m: [f64; 2],
        normalization: &Normalization,
        view_label: Vec<u8>,
        rel: &[RelativeCsiVector],
    ) -> Self {
        PacketRecord {
            point_id,
            packet,
            split,
            raw_location_m,
            location: normalization.normalize(raw_location_m),
            view_label,
            aps: rel
                .iter()
                .map(|r| ApPhasors {
                    ap_id: r.ap_id,
                    phasors: r.values().iter().map(|v| [v.re, v.im]).collect(),
                })
                .collect(),
        }
    }

    pub fn relative_csi(&self, header: &DatasetHeader) -> Result<Vec<RelativeCsiVector>> {
        self.aps
            .iter()
            .map(|ap| {
                let values = ap.phasors.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                RelativeCsiVector::from_phasors(ap.ap_id, header.antenna_pairs, header.subcarriers, values)
            })
            .collect()
    }

    pub fn to_sample(&self, header: &DatasetHeader) -> Result<MultiviewSample> {
        let rel = self.relative_csi(header)?;
        Ok(MultiviewSample {
            features_per_view: featurize(&rel, &header.view_spec)?,
            location: self.location,
            view_label: self.view_label.clone(),
            raw_location_m: self.raw_location_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<PacketRecord>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &PacketRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &Line::Header(self.header.clone()))?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, &LineRef::Packet(r))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(line) => match serde_json::from_str::<Line>(&line?)? {
                Line::Header(h) => h,
                Line::Packet(_) => return Err(Error::Data("dataset must start with a header record".into())),
            },
            None => return Err(Error::Data("empty dataset file".into())),
        };
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::Data(format!(
                "unsupported dataset format {} v{}",
                header.format, header.version
            )));
        }
        header.view_spec.validate(&header.ap_ids)?;
        let mut records = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Line>(&line)? {
                Line::Packet(p) => {
                    if p.view_label.len() != header.view_spec.len() {
                        return Err(Error::Data(format!(
                            "point {} packet {}: view label has {} entries, expected {}",
                            p.point_id,
                            p.packet,
                            p.view_label.len(),
                            header.view_spec.len()
                        )));
                    }
                    records.push(p)
                }
                Line::Header(_) => return Err(Error::Data("duplicate header record".into())),
            }
        }
        Ok(Dataset { header, records })
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LineRef<'a> {
    Packet(&'a PacketRecord),
}

/// Dense design matrices for a set of packets, one row per packet.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    /// Per-view features `x_k`.
    pub views: Vec<Array2<f64>>,
    /// Undivided features over all APs in header order.
    pub full: Array2<f64>,
    /// Normalized locations.
    pub targets: Array2<f64>,
    pub raw_locations: Array2<f64>,
    pub labels: Vec<Vec<u8>>,
    pub point_ids: Vec<u32>,
    pub packets: Vec<u32>,
}

impl FeatureSet {
    pub fn from_records<'a>(header: &DatasetHeader, records: impl IntoIterator<Item = &'a PacketRecord>) -> Result<Self> {
        let records: Vec<&PacketRecord> = records.into_iter().collect();
        let n = records.len();
        let k = header.view_spec.len();
        let mut view_rows: Vec<Vec<f64>> = vec![Vec::new(); k];
        let mut full_rows = Vec::new();
        let mut targets = Vec::with_capacity(2 * n);
        let mut raw = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(n);
        let mut view_widths = vec![0; k];
        let mut full_width = 0;
        for r in &records {
            let rel = r.relative_csi(header)?;
            let views = featurize(&rel, &header.view_spec)?;
            for (j, v) in views.into_iter().enumerate() {
                view_widths[j] = v.len();
                view_rows[j].extend(v);
            }
            let full = featurize_full(&rel, &header.ap_ids)?;
            full_width = full.len();
            full_rows.extend(full);
            targets.extend(r.location);
            raw.extend(r.raw_location_m);
            labels.push(r.view_label.clone());
        }
        let shape_err = |e: ndarray::ShapeError| Error::Data(format!("inconsistent feature widths: {e}"));
        let views = view_rows
            .into_iter()
            .zip(&view_widths)
            .map(|(rows, &w)| Array2::from_shape_vec((n, w), rows).map_err(shape_err))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureSet {
            views,
            full: Array2::from_shape_vec((n, full_width), full_rows).map_err(shape_err)?,
            targets: Array2::from_shape_vec((n, 2), targets).map_err(shape_err)?,
            raw_locations: Array2::from_shape_vec((n, 2), raw).map_err(shape_err)?,
            labels,
            point_ids: records.iter().map(|r| r.point_id).collect(),
            packets: records.iter().map(|r| r.packet).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Normalized view labels `ũ` as a matrix.
    pub fn normalized_labels(&self) -> Result<Array2<f64>> {
        let k = self.views.len();
        let mut out = Array2::zeros((self.len(), k));
        for (i, u) in self.labels.iter().enumerate() {
            let ut = super::normalize_view_label(u)?;
            for (j, v) in ut.into_iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }
}
