use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use vsdl_core::channel::{generate_dataset, los_params, measured_csi, ApPlacement, ChannelParams, PacketOffsets, SimulationConfig, Topology, SPEED_OF_LIGHT};
use vsdl_core::csi::{relative_csi, CsiMatrix, Split};

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

proptest! {
    #[test]
    fn los_geometry_matches_vector_oracle(
        ax in -10.0f64..10.0, ay in -10.0f64..10.0,
        tx in -10.0f64..10.0, ty in -10.0f64..10.0,
        facing in -180.0f64..180.0,
    ) {
        let (vx, vy) = (tx - ax, ty - ay);
        let dist = vx.hypot(vy);
        prop_assume!(dist > 1e-3);
        let ap = ApPlacement { ap_id: 1, position_m: [ax, ay], antenna_spacing_m: 0.029, facing_deg: facing };
        let p = los_params([tx, ty], &ap, SPEED_OF_LIGHT).unwrap();
        let theta = (vy.atan2(vx) - facing.to_radians()).sin().asin();
        prop_assert!((p.tof_s - dist / SPEED_OF_LIGHT).abs() < 1e-18);
        prop_assert!((p.aoa_rad - theta).abs() < 1e-9);
        prop_assert!((p.amplitude - 1.0 / dist).abs() < 1e-12);
    }

    #[test]
    fn adjacent_antenna_difference_is_geometric(
        tof in 1e-9f64..1e-7,
        theta in -1.5f64..1.5,
        slope in -0.1f64..0.1,
        beta in 0.0..TAU,
        mu in prop::collection::vec(0.0..TAU, 3),
        s in -28i32..=28,
    ) {
        let params = ChannelParams::default();
        let d = SPEED_OF_LIGHT / (2.0 * 5.18e9);
        let path = vsdl_core::channel::PropagationPath { tof_s: tof, aoa_rad: theta, amplitude: 0.7, is_los: true };
        let zero = Complex64::new(0.0, 0.0);
        for m in 0..2 {
            let h = |k: usize| {
                let o = PacketOffsets { subcarrier_slope: slope, antenna_offset: mu[k], packet_phase: beta };
                measured_csi(&[path], k, s, &o, zero, d, &params)
            };
            let diff = (h(m + 1) / h(m)).arg();
            let want = TAU * 5.18e9 * d * theta.sin() / SPEED_OF_LIGHT + mu[m + 1] - mu[m];
            prop_assert!(wrap(diff - want).abs() < 1e-9);
        }
    }
}

#[test]
fn single_packet_relative_csi_matches_direct_recomputation() {
    let params = ChannelParams::default();
    let d = SPEED_OF_LIGHT / (2.0 * 5.18e9);
    let paths = [vsdl_core::channel::PropagationPath { tof_s: 2.3e-8, aoa_rad: 0.6, amplitude: 0.4, is_los: true }];
    let mu = [0.3, 2.0, 5.1];
    let offsets = |m: usize| PacketOffsets { subcarrier_slope: 0.04, antenna_offset: mu[m], packet_phase: 1.9 };
    let sc = &params.subcarriers.indices;
    let values: Vec<Complex64> = (0..3)
        .flat_map(|m| sc.iter().map(move |&s| (m, s)))
        .map(|(m, s)| measured_csi(&paths, m, s, &offsets(m), Complex64::new(0.0, 0.0), d, &params))
        .collect();
    let rel = relative_csi(&CsiMatrix::new(1, 3, sc.len(), values).unwrap()).unwrap();
    for m in 0..2 {
        let want = Complex64::from_polar(1.0, TAU * (m as f64 - 2.0) * 0.5 * 0.6f64.sin() + mu[m] - mu[2]);
        for i in 0..sc.len() {
            assert!((rel.get(m, i) - want).norm() < 1e-9);
        }
    }
}

fn circular_variance(phasors: &[Complex64]) -> f64 {
    let mean = phasors.iter().sum::<Complex64>() / phasors.len() as f64;
    1.0 - mean.norm()
}

#[test]
fn line_of_sight_features_are_more_stable_than_obstructed() {
    let topology = Topology::two_corridor();
    let mut params = ChannelParams::default();
    params.noise_std = 0.01;
    let ds = generate_dataset(&topology, &params, 100, 3).unwrap();
    let point = ds.records.iter().find(|r| r.view_label == [1, 0]).unwrap().point_id;
    let packets: Vec<_> = ds.records.iter().filter(|r| r.point_id == point).collect();
    assert_eq!(packets.len(), 100);
    let variance = |ap: u32| {
        let feature = 5;
        let ph: Vec<Complex64> = packets
            .iter()
            .map(|r| {
                let a = r.aps.iter().find(|a| a.ap_id == ap).unwrap();
                Complex64::new(a.phasors[feature][0], a.phasors[feature][1])
            })
            .collect();
        circular_variance(&ph)
    };
    assert!(topology.is_line_of_sight(packets[0].raw_location_m, 1));
    assert!(!topology.is_line_of_sight(packets[0].raw_location_m, 6));
    let (los, nlos) = (variance(1), variance(6));
    assert!(los < 0.01, "{los}");
    assert!(nlos > 10.0 * los, "los {los} nlos {nlos}");
}

#[test]
fn default_dataset_shape_and_determinism() {
    let cfg = SimulationConfig::default();
    let a = cfg.generate().unwrap();
    assert_eq!(a.records.len(), 5200);
    assert_eq!(a.split(Split::Train).count(), 4300);
    assert_eq!(a.split(Split::Test).count(), 900);
    assert_eq!(a.header.ap_ids.len(), 7);
    let features: usize = a.records[0].aps.iter().map(|ap| ap.phasors.len()).sum();
    assert_eq!(features, 420);
    assert!(a.records.iter().any(|r| r.view_label == [1, 1]));
    let b = cfg.generate().unwrap();
    assert_eq!(a.records, b.records);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(other.generate().unwrap().records, a.records);
}

#[test]
fn every_point_has_a_consistent_label() {
    let topology = Topology::two_corridor();
    for p in topology.train_points_m.iter().chain(&topology.test_points_m) {
        let label = topology.view_label(*p);
        assert!(label.contains(&1), "{p:?}");
        for ap in &topology.aps {
            let in_view = topology.views.iter().zip(&label).any(|(v, &u)| u == 1 && v.contains(&ap.ap_id));
            assert_eq!(topology.is_line_of_sight(*p, ap.ap_id), in_view);
        }
    }
}
