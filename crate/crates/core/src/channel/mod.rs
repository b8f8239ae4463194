//! Synthetic multipath CSI for a corridor deployment.
//!
//! Each path contributes `a · exp(j(φ + s_i λ + μ_m + β))` to antenna `m` at
//! subcarrier `s_i`, where `φ` is the nominal phase from time of flight and
//! angle of arrival. `λ` (subcarrier slope) and `β` (packet phase) are drawn
//! per packet and AP, `μ_m` once per antenna per dataset, and complex Gaussian
//! noise is added last.

mod config;
mod generate;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csi::{ApId, SubcarrierSpec, ViewSpec};
use crate::error::{Error, Result};

pub use config::SimulationConfig;
pub use generate::generate_dataset;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// A straight corridor of a given width; its index is the view index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub start_m: [f64; 2],
    pub end_m: [f64; 2],
    pub width_m: f64,
}

impl Corridor {
    pub fn length_m(&self) -> f64 {
        let d = sub(self.end_m, self.start_m);
        dot(d, d).sqrt()
    }

    pub fn orientation_rad(&self) -> f64 {
        let d = sub(self.end_m, self.start_m);
        d[1].atan2(d[0])
    }

    /// Whether `p` lies on the corridor floor (within half the width of the center line).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let seg = sub(self.end_m, self.start_m);
        let len2 = dot(seg, seg);
        let rel = sub(p, self.start_m);
        let t = if len2 > 0.0 { (dot(rel, seg) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let closest = [self.start_m[0] + t * seg[0], self.start_m[1] + t * seg[1]];
        let off = sub(p, closest);
        dot(off, off).sqrt() <= 0.5 * self.width_m + 1e-9
    }
}

/// A uniform linear array. Antenna `m` sits at `position + m·d·t`, where `t`
/// is the facing direction rotated a quarter turn counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApPlacement {
    pub ap_id: ApId,
    pub position_m: [f64; 2],
    pub antenna_spacing_m: f64,
    /// Broadside direction, degrees counter-clockwise from +x.
    pub facing_deg: f64,
}

impl ApPlacement {
    fn broadside(&self) -> [f64; 2] {
        let f = self.facing_deg.to_radians();
        [f.cos(), f.sin()]
    }

    fn array_axis(&self) -> [f64; 2] {
        let f = self.facing_deg.to_radians();
        [-f.sin(), f.cos()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Corridor `k` defines view `k`.
    pub corridors: Vec<Corridor>,
    pub aps: Vec<ApPlacement>,
    /// AP membership of each corridor view.
    pub views: Vec<Vec<ApId>>,
    pub train_points_m: Vec<[f64; 2]>,
    pub test_points_m: Vec<[f64; 2]>,
    pub point_spacing_m: f64,
}

impl Topology {
    pub fn ap_ids(&self) -> Vec<ApId> {
        self.aps.iter().map(|a| a.ap_id).collect()
    }

    pub fn view_spec(&self) -> ViewSpec {
        ViewSpec::new(self.views.clone())
    }

    /// `u_k = 1` iff the point lies on corridor `k`.
    pub fn view_label(&self, p: [f64; 2]) -> Vec<u8> {
        self.corridors.iter().map(|c| u8::from(c.contains(p))).collect()
    }

    /// Whether AP `ap` belongs to a view whose corridor contains the point.
    pub fn is_line_of_sight(&self, p: [f64; 2], ap: ApId) -> bool {
        self.corridors
            .iter()
            .zip(&self.views)
            .any(|(c, v)| c.contains(p) && v.contains(&ap))
    }

    pub fn validate(&self) -> Result<()> {
        if self.corridors.is_empty() {
            return Err(Error::Config("topology has no corridors".into()));
        }
        if self.corridors.len() != self.views.len() {
            return Err(Error::Config(format!(
                "{} corridors but {} views",
                self.corridors.len(),
                self.views.len()
            )));
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if !(ap.antenna_spacing_m > 0.0) {
                return Err(Error::Config(format!("AP {} antenna spacing must be positive", ap.ap_id)));
            }
            if self.aps[..i].iter().any(|o| o.ap_id == ap.ap_id) {
                return Err(Error::Config(format!("duplicate AP id {}", ap.ap_id)));
            }
        }
        self.view_spec().validate(&self.ap_ids())?;
        if self.train_points_m.is_empty() {
            return Err(Error::Config("topology has no training points".into()));
        }
        for p in self.train_points_m.iter().chain(&self.test_points_m) {
            if !self.corridors.iter().any(|c| c.contains(*p)) {
                return Err(Error::Config(format!("point ({}, {}) is on no corridor", p[0], p[1])));
            }
        }
        Ok(())
    }

    /// Two perpendicular 7 m corridors meeting in an L, two walking lanes
    /// each, points every 0.5 m: 52 points of which 9 are held out for test.
    /// Seven APs: AP1-AP2 line corridor 1, AP6-AP7 corridor 2, AP3-AP5 sit
    /// around the junction and belong to both views.
    pub fn two_corridor() -> Self {
        let spacing = 0.5;
        let d = SPEED_OF_LIGHT / (2.0 * 5.18e9);
        let corridors = vec![
            Corridor {
                start_m: [-0.25, 0.25],
                end_m: [6.75, 0.25],
                width_m: 1.0,
            },
            Corridor {
                start_m: [0.25, -0.25],
                end_m: [0.25, 6.75],
                width_m: 1.0,
            },
        ];
        let ap = |ap_id, x, y, facing_deg| ApPlacement {
            ap_id,
            position_m: [x, y],
            antenna_spacing_m: d,
            facing_deg,
        };
        let aps = vec![
            ap(1, 5.0, -0.25, 90.0),
            ap(2, 2.5, 0.75, -90.0),
            ap(3, -0.25, -0.25, 45.0),
            ap(4, 0.75, 0.75, -135.0),
            ap(5, 0.25, 0.25, 45.0),
            ap(6, -0.25, 5.0, 0.0),
            ap(7, 0.75, 2.5, 180.0),
        ];
        let test_points_m = vec![
            [1.5, 0.5],
            [3.0, 0.0],
            [4.5, 0.5],
            [6.0, 0.0],
            [0.5, 1.5],
            [0.0, 3.0],
            [0.5, 4.5],
            [0.0, 6.0],
            [0.5, 0.5],
        ];
        let mut all = Vec::new();
        for step in 0..14 {
            let along = step as f64 * spacing;
            for lane in [0.0, spacing] {
                all.push([along, lane]);
                all.push([lane, along]);
            }
        }
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        all.dedup();
        all.retain(|p| !test_points_m.contains(p));
        Topology {
            corridors,
            aps,
            views: vec![vec![1, 2, 3, 4, 5], vec![3, 4, 5, 6, 7]],
            train_points_m: all,
            test_points_m,
            point_spacing_m: spacing,
        }
    }
}

/// Random multipath used when a point has no line of sight to an AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlosModel {
    /// Number of paths `R`.
    pub paths: usize,
    /// Excess delays are uniform in `[0, delay_spread_s]`.
    pub delay_spread_s: f64,
    /// Path amplitude decays as `exp(-excess_delay / amplitude_decay_s)`.
    pub amplitude_decay_s: f64,
    /// Arrival angles are uniform in `±angle_spread_rad / 2` (capped at ±π/2).
    pub angle_spread_rad: f64,
}

/// Weak static reflections added to line-of-sight links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosMultipath {
    pub paths: usize,
    /// Amplitude relative to the direct path, uniform in this range.
    pub relative_amplitude: [f64; 2],
    pub delay_spread_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub subcarriers: SubcarrierSpec,
    pub antennas: usize,
    pub speed_of_light: f64,
    /// `λ` is uniform in `±subcarrier_slope_max` (rad per subcarrier index), per packet.
    pub subcarrier_slope_max: f64,
    /// Standard deviation of the complex additive noise `Z`.
    pub noise_std: f64,
    pub los_multipath: LosMultipath,
    pub nlos: NlosModel,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        self.subcarriers.validate()?;
        if self.antennas < 2 {
            return Err(Error::Config("at least two antennas per AP are required".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        if self.nlos.paths < 1 {
            return Err(Error::Config("NLoS model needs at least one path".into()));
        }
        if !(self.speed_of_light > 0.0) {
            return Err(Error::Config("speed_of_light must be positive".into()));
        }
        let [lo, hi] = self.los_multipath.relative_amplitude;
        if !(0.0 <= lo && lo <= hi) {
            return Err(Error::Config("los_multipath.relative_amplitude must be an ordered nonnegative range".into()));
        }
        Ok(())
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        let subcarriers = SubcarrierSpec::evenly_spread(30, 28, 312_500.0, 5.18e9).expect("valid default subcarriers");
        ChannelParams {
            subcarriers,
            antennas: 3,
            speed_of_light: SPEED_OF_LIGHT,
            subcarrier_slope_max: 0.05,
            noise_std: 0.2,
            los_multipath: LosMultipath {
                paths: 2,
                relative_amplitude: [0.01, 0.05],
                delay_spread_s: 30e-9,
            },
            nlos: NlosModel {
                paths: 5,
                delay_spread_s: 60e-9,
                amplitude_decay_s: 20e-9,
                angle_spread_rad: PI,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationPath {
    pub tof_s: f64,
    /// Relative to array broadside, in `[-π/2, π/2]`.
    pub aoa_rad: f64,
    pub amplitude: f64,
    pub is_los: bool,
}

/// Phase offsets of one packet at one AP.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PacketOffsets {
    /// `λ`, rad per subcarrier index.
    pub subcarrier_slope: f64,
    /// `μ_m` of the antenna being synthesized.
    pub antenna_offset: f64,
    /// `β`.
    pub packet_phase: f64,
}

/// Nominal phase in radians: `2π (s_i δ_f τ + m f_c d sinθ / c)` for zero-based antenna `m`.
pub fn nominal_phase(path: &PropagationPath, antenna: usize, subcarrier: i32, antenna_spacing_m: f64, params: &ChannelParams) -> f64 {
    let sc = &params.subcarriers;
    let delay_cycles = f64::from(subcarrier) * sc.spacing_hz * path.tof_s;
    let array_cycles = antenna as f64 * sc.center_freq_hz * antenna_spacing_m * path.aoa_rad.sin() / params.speed_of_light;
    TAU * (delay_cycles + array_cycles)
}

/// Measured CSI of one antenna and subcarrier: sum of path phasors with offsets, plus `noise`.
pub fn measured_csi(
    paths: &[PropagationPath],
    antenna: usize,
    subcarrier: i32,
    offsets: &PacketOffsets,
    noise: Complex64,
    antenna_spacing_m: f64,
    params: &ChannelParams,
) -> Complex64 {
    let offset = f64::from(subcarrier) * offsets.subcarrier_slope + offsets.antenna_offset + offsets.packet_phase;
    paths
        .iter()
        .map(|p| Complex64::from_polar(p.amplitude, nominal_phase(p, antenna, subcarrier, antenna_spacing_m, params) + offset))
        .sum::<Complex64>()
        + noise
}

/// Direct path from a transmitter to an AP; amplitude decays as 1/distance.
pub fn los_params(tx_m: [f64; 2], ap: &ApPlacement, speed_of_light: f64) -> Result<PropagationPath> {
    let v = sub(tx_m, ap.position_m);
    let dist = dot(v, v).sqrt();
    if dist < 1e-9 {
        return Err(Error::DegenerateGeometry(ap.ap_id));
    }
    let sin_theta = (dot(v, ap.array_axis()) / dist).clamp(-1.0, 1.0);
    Ok(PropagationPath {
        tof_s: dist / speed_of_light,
        aoa_rad: sin_theta.asin(),
        amplitude: 1.0 / dist,
        is_los: true,
    })
}

/// Signed bearing of the transmitter from broadside, without the front/back fold.
pub fn bearing_from_broadside(tx_m: [f64; 2], ap: &ApPlacement) -> f64 {
    let v = sub(tx_m, ap.position_m);
    dot(v, ap.array_axis()).atan2(dot(v, ap.broadside()))
}

fn clamp_angle(a: f64) -> f64 {
    a.clamp(-FRAC_PI_2, FRAC_PI_2)
}
