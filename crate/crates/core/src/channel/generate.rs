use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;

use super::{clamp_angle, los_params, measured_csi, ApPlacement, ChannelParams, PacketOffsets, PropagationPath, Topology};
use crate::csi::dataset::{DatasetHeader, DATASET_FORMAT, DATASET_VERSION};
use crate::csi::{relative_csi, CsiMatrix, Dataset, Normalization, PacketRecord, Split};
use crate::error::{Error, Result};
use crate::rng::{self, standard_normal, tag};

struct PointSpec {
    id: u32,
    split: Split,
    position: [f64; 2],
    label: Vec<u8>,
}

/// Simulates `packets_per_point` packets at every train and test point.
///
/// Point ids number training points first, then test points. Every packet has
/// its own random stream derived from `(seed, point, packet)`, so the output
/// does not depend on generation order.
pub fn generate_dataset(topology: &Topology, params: &ChannelParams, packets_per_point: usize, seed: u64) -> Result<Dataset> {
    topology.validate()?;
    params.validate()?;
    if packets_per_point == 0 {
        return Err(Error::Config("packets_per_point must be at least 1".into()));
    }
    let normalization = Normalization::from_points(topology.train_points_m.iter().chain(&topology.test_points_m))?;
    let points: Vec<PointSpec> = topology
        .train_points_m
        .iter()
        .map(|p| (Split::Train, *p))
        .chain(topology.test_points_m.iter().map(|p| (Split::Test, *p)))
        .enumerate()
        .map(|(id, (split, position))| PointSpec {
            id: id as u32,
            split,
            position,
            label: topology.view_label(position),
        })
        .collect();

    let antenna_offsets: Vec<Vec<f64>> = topology
        .aps
        .iter()
        .map(|ap| {
            let mut r = rng::stream(seed, &[tag::ANTENNA_OFFSET, u64::from(ap.ap_id)]);
            (0..params.antennas).map(|_| r.random_range(0.0..TAU)).collect()
        })
        .collect();

    let mut records = Vec::with_capacity(points.len() * packets_per_point);
    for point in &points {
        let links = point_links(topology, params, point, seed)?;
        for packet in 0..packets_per_point {
            let mut r = rng::stream(seed, &[tag::PACKET, u64::from(point.id), packet as u64]);
            let mut rel = Vec::with_capacity(topology.aps.len());
            for ((ap, link), mu) in topology.aps.iter().zip(&links).zip(&antenna_offsets) {
                let raw = synthesize_packet(ap, link, mu, params, &mut r)?;
                rel.push(relative_csi(&raw)?);
            }
            records.push(PacketRecord::from_relative(
                point.id,
                packet as u32,
                point.split,
                point.position,
                &normalization,
                point.label.clone(),
                &rel,
            ));
        }
    }

    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            ap_ids: topology.ap_ids(),
            antenna_pairs: params.antennas - 1,
            subcarriers: params.subcarriers.len(),
            view_spec: topology.view_spec(),
            normalization,
            seed,
            packets_per_point,
        },
        records,
    })
}

/// Fixed propagation between one point and one AP.
enum Link {
    /// Direct path plus static reflections.
    LineOfSight(Vec<PropagationPath>),
    /// No direct path; multipath is redrawn for every packet.
    Obstructed { base: PropagationPath },
}

fn point_links(topology: &Topology, params: &ChannelParams, point: &PointSpec, seed: u64) -> Result<Vec<Link>> {
    topology
        .aps
        .iter()
        .map(|ap| {
            let direct = los_params(point.position, ap, params.speed_of_light)?;
            if !topology.is_line_of_sight(point.position, ap.ap_id) {
                return Ok(Link::Obstructed { base: direct });
            }
            let mut r = rng::stream(seed, &[tag::STATIC_MULTIPATH, u64::from(point.id), u64::from(ap.ap_id)]);
            let mp = &params.los_multipath;
            let mut paths = vec![direct];
            for _ in 0..mp.paths {
                let rel_amp = if mp.relative_amplitude[1] > mp.relative_amplitude[0] {
                    r.random_range(mp.relative_amplitude[0]..mp.relative_amplitude[1])
                } else {
                    mp.relative_amplitude[0]
                };
                paths.push(PropagationPath {
                    tof_s: direct.tof_s + mp.delay_spread_s * r.random::<f64>(),
                    aoa_rad: r.random_range(-FRAC_PI_2..FRAC_PI_2),
                    amplitude: rel_amp * direct.amplitude,
                    is_los: false,
                });
            }
            Ok(Link::LineOfSight(paths))
        })
        .collect()
}

fn synthesize_packet<R: Rng>(ap: &ApPlacement, link: &Link, mu: &[f64], params: &ChannelParams, r: &mut R) -> Result<CsiMatrix> {
    let offsets = PacketOffsets {
        subcarrier_slope: if params.subcarrier_slope_max > 0.0 {
            r.random_range(-params.subcarrier_slope_max..params.subcarrier_slope_max)
        } else {
            0.0
        },
        antenna_offset: 0.0,
        packet_phase: r.random_range(0.0..TAU),
    };
    let random_paths;
    let paths: &[PropagationPath] = match link {
        Link::LineOfSight(p) => p,
        Link::Obstructed { base } => {
            let nlos = &params.nlos;
            let half = 0.5 * nlos.angle_spread_rad;
            random_paths = (0..nlos.paths)
                .map(|_| {
                    let excess = nlos.delay_spread_s * r.random::<f64>();
                    let decay = if nlos.amplitude_decay_s > 0.0 {
                        (-excess / nlos.amplitude_decay_s).exp()
                    } else {
                        1.0
                    };
                    PropagationPath {
                        tof_s: base.tof_s + excess,
                        aoa_rad: clamp_angle(if half > 0.0 { r.random_range(-half..half) } else { 0.0 }),
                        amplitude: base.amplitude * decay,
                        is_los: false,
                    }
                })
                .collect::<Vec<_>>();
            &random_paths
        }
    };
    let sc = &params.subcarriers;
    let noise_scale = params.noise_std * std::f64::consts::FRAC_1_SQRT_2;
    let mut values = Vec::with_capacity(params.antennas * sc.len());
    for (m, &mu_m) in mu.iter().enumerate() {
        let o = PacketOffsets {
            antenna_offset: mu_m,
            ..offsets
        };
        for &s in &sc.indices {
            let noise = if noise_scale > 0.0 {
                Complex64::new(noise_scale * standard_normal(r), noise_scale * standard_normal(r))
            } else {
                Complex64::new(0.0, 0.0)
            };
            values.push(measured_csi(paths, m, s, &o, noise, ap.antenna_spacing_m, params));
        }
    }
    CsiMatrix::new(ap.ap_id, params.antennas, sc.len(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Corridor, SPEED_OF_LIGHT};

    fn one_point_topology() -> Topology {
        Topology {
            corridors: vec![Corridor {
                start_m: [0.0, 0.0],
                end_m: [4.0, 0.0],
                width_m: 1.0,
            }],
            aps: vec![ApPlacement {
                ap_id: 1,
                position_m: [2.0, -1.0],
                antenna_spacing_m: SPEED_OF_LIGHT / (2.0 * 5.18e9),
                facing_deg: 90.0,
            }],
            views: vec![vec![1]],
            train_points_m: vec![[1.0, 0.0]],
            test_points_m: vec![],
            point_spacing_m: 0.5,
        }
    }

    #[test]
    fn single_packet_single_ap() {
        let params = ChannelParams::default();
        let ds = generate_dataset(&one_point_topology(), &params, 1, 9).unwrap();
        assert_eq!(ds.records.len(), 1);
        let s = ds.records[0].to_sample(&ds.header).unwrap();
        assert_eq!(s.features_per_view[0].len(), 2 * 2 * 30);
        assert_eq!(s.view_label, vec![1]);
    }

    #[test]
    fn zero_packets_rejected() {
        assert!(generate_dataset(&one_point_topology(), &ChannelParams::default(), 0, 1).is_err());
    }

    #[test]
    fn invalid_topology_propagates() {
        let mut t = one_point_topology();
        t.train_points_m.push([9.0, 9.0]);
        assert!(matches!(generate_dataset(&t, &ChannelParams::default(), 1, 1), Err(Error::Config(_))));
    }
}
