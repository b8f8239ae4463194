//! CSI domain types and the preprocessing from raw complex CSI to multiview
//! network inputs.
//!
//! Raw CSI of one AP is an `antennas × subcarriers` complex grid. The relative
//! CSI divides each antenna's unit phasor by the unit phasor of the last
//! (reference) antenna, which strips amplitude and any phase term common to all
//! antennas of a packet. Relative phasors are then laid out as interleaved
//! `(re, im)` reals, per view, for the networks.

pub mod dataset;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{ApPhasors, Dataset, DatasetHeader, FeatureSet, PacketRecord, Split};

pub type ApId = u32;

/// Selected OFDM subcarriers of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierSpec {
    /// Subcarrier indices `s_i`, strictly increasing, all within `[-max_index, max_index]`.
    pub indices: Vec<i32>,
    pub max_index: i32,
    /// Subcarrier spacing in Hz.
    pub spacing_hz: f64,
    /// Channel center frequency in Hz.
    pub center_freq_hz: f64,
}

impl SubcarrierSpec {
    pub fn new(indices: Vec<i32>, max_index: i32, spacing_hz: f64, center_freq_hz: f64) -> Result<Self> {
        let spec = SubcarrierSpec {
            indices,
            max_index,
            spacing_hz,
            center_freq_hz,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `count` indices spread evenly (rounded) over `[-max_index, max_index]`.
    pub fn evenly_spread(count: usize, max_index: i32, spacing_hz: f64, center_freq_hz: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("subcarrier count must be at least 1".into()));
        }
        let indices = if count == 1 {
            vec![0]
        } else {
            let span = 2.0 * f64::from(max_index);
            (0..count)
                .map(|i| -max_index + (i as f64 * span / (count - 1) as f64).round() as i32)
                .collect()
        };
        Self::new(indices, max_index, spacing_hz, center_freq_hz)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::Config("at least one subcarrier is required".into()));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("subcarrier indices must be strictly increasing".into()));
        }
        if self.indices.iter().any(|s| s.abs() > self.max_index) {
            return Err(Error::Config(format!(
                "subcarrier index outside [-{0}, {0}]",
                self.max_index
            )));
        }
        if !(self.spacing_hz > 0.0 && self.center_freq_hz > 0.0) {
            return Err(Error::Config("subcarrier spacing and center frequency must be positive".into()));
        }
        Ok(())
    }
}

/// Raw channel matrix of one AP for one packet, antenna-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    pub ap_id: ApId,
    antennas: usize,
    subcarriers: usize,
    values: Vec<Complex64>,
}

impl CsiMatrix {
    pub fn new(ap_id: ApId, antennas: usize, subcarriers: usize, values: Vec<Complex64>) -> Result<Self> {
        if antennas < 2 {
            return Err(Error::Data(format!(
                "AP {ap_id}: at least two antennas are required, got {antennas}"
            )));
        }
        if subcarriers == 0 {
            return Err(Error::Data(format!("AP {ap_id}: no subcarriers")));
        }
        if values.len() != antennas * subcarriers {
            return Err(Error::Shape {
                context: "CsiMatrix values",
                expected: antennas * subcarriers,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Data(format!("AP {ap_id}: non-finite CSI value")));
        }
        Ok(CsiMatrix {
            ap_id,
            antennas,
            subcarriers,
            values,
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn get(&self, antenna: usize, subcarrier: usize) -> Complex64 {
        self.values[antenna * self.subcarriers + subcarrier]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Unit phasors `x_{m,i}` for antennas `0..M-1` relative to the last antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeCsiVector {
    pub ap_id: ApId,
    pairs: usize,
    subcarriers: usize,
    values: Vec<Complex64>,
}

impl RelativeCsiVector {
    /// Builds from stored phasors; every entry must be of unit magnitude (within 1e-9).
    pub fn from_phasors(ap_id: ApId, pairs: usize, subcarriers: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != pairs * subcarriers {
            return Err(Error::Shape {
                context: "RelativeCsiVector values",
                expected: pairs * subcarriers,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| (v.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Data(format!(
                "AP {ap_id}: relative CSI entry {v} is not a unit phasor"
            )));
        }
        Ok(RelativeCsiVector {
            ap_id,
            pairs,
            subcarriers,
            values,
        })
    }

    /// Number of antenna pairs, `M - 1`.
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn get(&self, pair: usize, subcarrier: usize) -> Complex64 {
        self.values[pair * self.subcarriers + subcarrier]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Real feature length contributed by this AP.
    pub fn feature_len(&self) -> usize {
        2 * self.values.len()
    }
}

/// Partition of APs into views; views may share APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    /// `views[k]` lists the AP ids of view `k` in feature order.
    pub views: Vec<Vec<ApId>>,
}

impl ViewSpec {
    pub fn new(views: Vec<Vec<ApId>>) -> Self {
        ViewSpec { views }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Checks that every AP of `all_aps` is covered and that views only name known APs.
    pub fn validate(&self, all_aps: &[ApId]) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Config("view spec has no views".into()));
        }
        for (k, view) in self.views.iter().enumerate() {
            if view.is_empty() {
                return Err(Error::Config(format!("view {} has no APs", k + 1)));
            }
            for (i, ap) in view.iter().enumerate() {
                if !all_aps.contains(ap) {
                    return Err(Error::Config(format!("view {} names unknown AP {ap}", k + 1)));
                }
                if view[..i].contains(ap) {
                    return Err(Error::Config(format!("view {} lists AP {ap} twice", k + 1)));
                }
            }
        }
        if let Some(ap) = all_aps.iter().find(|ap| !self.views.iter().any(|v| v.contains(ap))) {
            return Err(Error::Config(format!("AP {ap} belongs to no view")));
        }
        Ok(())
    }
}

/// One packet split into per-view real features.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewSample {
    pub features_per_view: Vec<Vec<f64>>,
    /// Location normalized into `[0, 1]^2`.
    pub location: [f64; 2],
    pub view_label: Vec<u8>,
    pub raw_location_m: [f64; 2],
}

/// Relative CSI of one packet: unit phasor of each antenna times the conjugate
/// unit phasor of the last antenna, per subcarrier.
pub fn relative_csi(raw: &CsiMatrix) -> Result<RelativeCsiVector> {
    let antennas = raw.antennas();
    let subcarriers = raw.subcarriers();
    let reference = antennas - 1;
    let unit = |m: usize, i: usize| -> Result<Complex64> {
        let h = raw.get(m, i);
        let mag = h.norm();
        if mag == 0.0 || !mag.is_normal() {
            return Err(Error::ZeroMagnitude {
                ap_id: raw.ap_id,
                antenna: m,
                subcarrier: i,
            });
        }
        Ok(h / mag)
    };
    let mut values = Vec::with_capacity(reference * subcarriers);
    let refs = (0..subcarriers).map(|i| unit(reference, i)).collect::<Result<Vec<_>>>()?;
    for m in 0..reference {
        for (i, r) in refs.iter().enumerate() {
            let x = unit(m, i)? * r.conj();
            // renormalize away the last-ulp drift of the product
            values.push(x / x.norm());
        }
    }
    Ok(RelativeCsiVector {
        ap_id: raw.ap_id,
        pairs: reference,
        subcarriers,
        values,
    })
}

fn push_phasors(out: &mut Vec<f64>, rel: &RelativeCsiVector) {
    for v in rel.values() {
        out.push(v.re);
        out.push(v.im);
    }
}

/// Lays the relative CSI of all APs out as one real vector per view.
///
/// Order within a view: AP (as listed in the view), antenna pair, subcarrier,
/// then `(re, im)`. Shared APs are duplicated into every view that lists them.
pub fn featurize(rel: &[RelativeCsiVector], spec: &ViewSpec) -> Result<Vec<Vec<f64>>> {
    spec.views
        .iter()
        .map(|view| {
            let mut out = Vec::new();
            for ap in view {
                let r = rel
                    .iter()
                    .find(|r| r.ap_id == *ap)
                    .ok_or(Error::MissingAp(*ap))?;
                push_phasors(&mut out, r);
            }
            Ok(out)
        })
        .collect()
}

/// Concatenates all APs in the given order, without view duplication.
pub fn featurize_full(rel: &[RelativeCsiVector], ap_order: &[ApId]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for ap in ap_order {
        let r = rel
            .iter()
            .find(|r| r.ap_id == *ap)
            .ok_or(Error::MissingAp(*ap))?;
        push_phasors(&mut out, r);
    }
    Ok(out)
}

/// Inverse of the per-view layout: rebuilds the phasors of the APs in `aps`.
pub fn defeaturize(features: &[f64], aps: &[ApId], pairs: usize, subcarriers: usize) -> Result<Vec<RelativeCsiVector>> {
    let per_ap = 2 * pairs * subcarriers;
    if features.len() != per_ap * aps.len() {
        return Err(Error::Shape {
            context: "defeaturize",
            expected: per_ap * aps.len(),
            actual: features.len(),
        });
    }
    aps.iter()
        .zip(features.chunks_exact(per_ap))
        .map(|(&ap, chunk)| {
            let values = chunk
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            RelativeCsiVector::from_phasors(ap, pairs, subcarriers, values)
        })
        .collect()
}

/// `ũ_k = u_k / Σ u_i`.
pub fn normalize_view_label(u: &[u8]) -> Result<Vec<f64>> {
    if let Some(bad) = u.iter().find(|&&b| b > 1) {
        return Err(Error::Data(format!("view label entries must be 0 or 1, got {bad}")));
    }
    let total: u32 = u.iter().map(|&b| u32::from(b)).sum();
    if total == 0 {
        return Err(Error::EmptyViewLabel);
    }
    Ok(u.iter().map(|&b| f64::from(b) / f64::from(total)).collect())
}

/// Affine map between meters and the unit square, from the topology bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min_m: [f64; 2],
    pub max_m: [f64; 2],
}

impl Normalization {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Result<Self> {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        if !(min[0].is_finite() && max[0].is_finite()) {
            return Err(Error::Config("cannot normalize an empty point set".into()));
        }
        Ok(Normalization { min_m: min, max_m: max })
    }

    fn span(&self, axis: usize) -> f64 {
        let s = self.max_m[axis] - self.min_m[axis];
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    pub fn normalize(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.min_m[0]) / self.span(0),
            (p[1] - self.min_m[1]) / self.span(1),
        ]
    }

    pub fn denormalize(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0] * self.span(0) + self.min_m[0],
            p[1] * self.span(1) + self.min_m[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn matrix(ap: ApId, antennas: usize, values: Vec<Complex64>) -> CsiMatrix {
        let sc = values.len() / antennas;
        CsiMatrix::new(ap, antennas, sc, values).unwrap()
    }

    #[test]
    fn identical_antennas_give_unit_output() {
        let row = [Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        let raw = matrix(1, 3, row.iter().cycle().take(6).copied().collect());
        let rel = relative_csi(&raw).unwrap();
        assert_eq!(rel.pairs(), 2);
        for v in rel.values() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn magnitudes_cancel() {
        let raw = matrix(
            1,
            2,
            vec![Complex64::from_polar(7.5, FRAC_PI_2), Complex64::new(0.2, 0.0)],
        );
        let rel = relative_csi(&raw).unwrap();
        assert!((rel.get(0, 0) - Complex64::from_polar(1.0, FRAC_PI_2)).norm() < 1e-15);
    }

    #[test]
    fn zero_magnitude_is_rejected() {
        let raw = matrix(4, 2, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        match relative_csi(&raw) {
            Err(Error::ZeroMagnitude { ap_id: 4, antenna: 1, subcarrier: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_antenna_is_rejected() {
        assert!(CsiMatrix::new(1, 1, 1, vec![Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn two_corridor_feature_lengths() {
        let pairs = 2;
        let sc = 30;
        let rel: Vec<_> = (1..=7)
            .map(|ap| {
                RelativeCsiVector::from_phasors(ap, pairs, sc, vec![Complex64::new(1.0, 0.0); pairs * sc])
                    .unwrap()
            })
            .collect();
        let spec = ViewSpec::new(vec![vec![1, 2, 3, 4, 5], vec![3, 4, 5, 6, 7]]);
        let views = featurize(&rel, &spec).unwrap();
        assert_eq!(views.len(), 2);
        assert!(views.iter().all(|v| v.len() == 600));
        let complex_count: usize = rel.iter().map(|r| r.values().len()).sum();
        assert_eq!(complex_count, 420);
        assert!(views[0].chunks(2).all(|c| c == [1.0, 0.0]));
    }

    #[test]
    fn euler_phasors_featurize_to_minus_one() {
        let v = Complex64::from_polar(1.0, PI);
        let rel = vec![RelativeCsiVector::from_phasors(9, 1, 4, vec![v; 4]).unwrap()];
        let views = featurize(&rel, &ViewSpec::new(vec![vec![9]])).unwrap();
        for c in views[0].chunks(2) {
            assert!((c[0] + 1.0).abs() < 1e-15 && c[1].abs() < 1e-15);
        }
    }

    #[test]
    fn missing_ap_is_incomplete() {
        let rel = vec![RelativeCsiVector::from_phasors(1, 1, 1, vec![Complex64::new(1.0, 0.0)]).unwrap()];
        let spec = ViewSpec::new(vec![vec![1, 2]]);
        assert!(matches!(featurize(&rel, &spec), Err(Error::MissingAp(2))));
    }

    #[test]
    fn view_label_normalization() {
        assert_eq!(normalize_view_label(&[1, 0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(normalize_view_label(&[1, 1]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_view_label(&[1, 1, 1, 1]).unwrap(), vec![0.25; 4]);
        assert!(matches!(normalize_view_label(&[0, 0]), Err(Error::EmptyViewLabel)));
        assert!(normalize_view_label(&[2, 0]).is_err());
    }

    #[test]
    fn view_spec_validation() {
        let aps = [1, 2, 3];
        assert!(ViewSpec::new(vec![vec![1, 2], vec![2, 3]]).validate(&aps).is_ok());
        assert!(ViewSpec::new(vec![vec![1, 2]]).validate(&aps).is_err());
        assert!(ViewSpec::new(vec![vec![1, 2, 3, 4]]).validate(&aps).is_err());
        assert!(ViewSpec::new(vec![vec![1, 1, 2, 3]]).validate(&aps).is_err());
    }

    #[test]
    fn evenly_spread_subcarriers() {
        let spec = SubcarrierSpec::evenly_spread(30, 28, 312_500.0, 5.18e9).unwrap();
        assert_eq!(spec.len(), 30);
        assert_eq!(spec.indices[0], -28);
        assert_eq!(spec.indices[29], 28);
        assert!(SubcarrierSpec::new(vec![1, 1], 28, 1.0, 1.0).is_err());
        assert!(SubcarrierSpec::new(vec![-30], 28, 1.0, 1.0).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        let pts = [[0.0, 0.0], [6.5, 6.5], [3.0, 0.5]];
        let n = Normalization::from_points(pts.iter()).unwrap();
        assert_eq!(n.normalize([6.5, 0.0]), [1.0, 0.0]);
        let back = n.denormalize(n.normalize([3.0, 0.5]));
        assert!((back[0] - 3.0).abs() < 1e-12 && (back[1] - 0.5).abs() < 1e-12);
    }
}
