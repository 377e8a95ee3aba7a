use num_complex::Complex64;

use netmimo::channel::{
    aggregate_comp_channel, load_trace, save_trace, ChannelGenerator, ChannelSnapshot, ScenarioConfig,
};
use netmimo::linalg::CMat;
use netmimo::Error;

fn cfg(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        snr_range_db: [40.0, 40.0],
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

/// Zeroth-order Bessel function from its power series.
fn bessel_j0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= -(x * x / 4.0) / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn isolation_sets_direct_to_cross_power_ratio() {
    let (mut direct, mut cross) = (0.0, 0.0);
    for seed in 0..10_000u64 {
        let snap = ChannelGenerator::new(cfg(seed)).unwrap().snapshot_at(0.0).unwrap();
        let s = (seed % 38) as usize;
        direct += snap.link(0, 0, s).norm_squared();
        cross += snap.link(0, 1, s).norm_squared();
    }
    let ratio_db = 10.0 * (direct / cross).log10();
    assert!((ratio_db - 15.0).abs() < 0.5, "{ratio_db}");
}

#[test]
fn zero_isolation_makes_links_alike() {
    let (mut direct, mut cross) = (0.0, 0.0);
    for seed in 0..10_000u64 {
        let c = ScenarioConfig { isolation_db: 0.0, ..cfg(seed) };
        let snap = ChannelGenerator::new(c).unwrap().snapshot_at(0.0).unwrap();
        direct += snap.link(1, 1, 5).norm_squared();
        cross += snap.link(1, 2, 5).norm_squared();
    }
    assert!((10.0 * (direct / cross).log10()).abs() < 0.5);
}

#[test]
fn twenty_ms_step_follows_bessel_correlation() {
    let expected = bessel_j0(2.0 * std::f64::consts::PI * 8.0 * 0.02);
    assert!((expected - 0.764).abs() < 2e-3);
    let (mut cross, mut power) = (Complex64::new(0.0, 0.0), 0.0);
    for seed in 0..10_000u64 {
        let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(seed) };
        let mut g = ChannelGenerator::new(c).unwrap();
        let a = g.snapshot_at(0.0).unwrap();
        let b = g.snapshot_at(0.02).unwrap();
        let (x, y) = (a.link(0, 0, 0)[(0, 0)], b.link(0, 0, 0)[(0, 0)]);
        cross += x.conj() * y;
        power += x.norm_sqr();
    }
    let rho = cross.re / power;
    assert!((rho - expected).abs() < 0.03, "{rho} vs {expected}");
}

#[test]
fn tiny_steps_are_continuous() {
    let (mut cross, mut p0, mut p1) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for seed in 0..2_000u64 {
        let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(seed) };
        let mut g = ChannelGenerator::new(c).unwrap();
        let a = g.snapshot_at(0.0).unwrap();
        let b = g.snapshot_at(1e-6).unwrap();
        for s in 0..38 {
            let (x, y) = (a.link(2, 1, s)[(1, 0)], b.link(2, 1, s)[(1, 0)]);
            cross += x.conj() * y;
            p0 += x.norm_sqr();
            p1 += y.norm_sqr();
        }
    }
    let rho = cross.norm() / (p0 * p1).sqrt();
    assert!(rho > 1.0 - 1e-3, "{rho}");
}

#[test]
fn adjacent_subcarriers_are_coherent_at_50ns() {
    let (mut cross, mut p0, mut p1) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for seed in 0..2_000u64 {
        let snap = ChannelGenerator::new(cfg(seed)).unwrap().snapshot_at(0.0).unwrap();
        for s in 0..37 {
            let (x, y) = (snap.link(0, 0, s)[(0, 1)], snap.link(0, 0, s + 1)[(0, 1)]);
            cross += x.conj() * y;
            p0 += x.norm_sqr();
            p1 += y.norm_sqr();
        }
    }
    let rho = cross.norm() / (p0 * p1).sqrt();
    assert!(rho > 0.99, "{rho}");
}

#[test]
fn direct_link_energy_matches_configured_gain() {
    for k_db in [None, Some(6.0)] {
        let mut acc = 0.0;
        let n = 10_000u64;
        for seed in 0..n {
            let c = ScenarioConfig { rician_k_db: k_db, snr_range_db: [30.0, 50.0], ..cfg(seed) };
            let mut g = ChannelGenerator::new(c).unwrap();
            let gain = g.mean_entry_gain(0, 0);
            let snap = g.snapshot_at(0.0).unwrap();
            acc += snap.link(0, 0, (seed % 38) as usize).norm_squared() / (4.0 * gain);
        }
        let ratio = acc / n as f64;
        assert!((ratio - 1.0).abs() < 0.02, "{k_db:?}: {ratio}");
    }
}

#[test]
fn tap_variance_is_stationary() {
    let n = 10_000u64;
    let (mut v0, mut v1) = (0.0, 0.0);
    for seed in 0..n {
        let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(seed) };
        let mut g = ChannelGenerator::new(c).unwrap();
        let a = g.snapshot_at(0.0).unwrap();
        let b = g.snapshot_at(0.5).unwrap();
        v0 += a.link(1, 0, 3)[(0, 0)].norm_sqr();
        v1 += b.link(1, 0, 3)[(0, 0)].norm_sqr();
    }
    assert!((v1 / v0 - 1.0).abs() < 0.03, "{}", v1 / v0);
}

#[test]
fn static_channel_is_frozen_in_time() {
    let mut g = ChannelGenerator::new(cfg(9)).unwrap();
    let a = g.snapshot_at(1.0).unwrap();
    let b = g.snapshot_at(0.0).unwrap();
    assert_eq!(a.matrices(), b.matrices());
}

#[test]
fn aggregate_places_links_bs_major() {
    let snap = ChannelGenerator::new(cfg(4)).unwrap().snapshot_at(0.0).unwrap();
    for k in 0..3 {
        for s in [0, 17, 37] {
            let agg = aggregate_comp_channel(&snap, k, s).unwrap();
            assert_eq!(agg.shape(), (2, 6));
            for j in 0..3 {
                for a in 0..2 {
                    for r in 0..2 {
                        assert_eq!(agg[(r, 2 * j + a)], snap.link(k, j, s)[(r, a)]);
                    }
                }
            }
        }
    }
}

#[test]
fn trace_roundtrip_is_bit_exact() {
    let c = ScenarioConfig { doppler_hz: 4.0, ..cfg(12) };
    let trace = ChannelGenerator::new(c).unwrap().trace(&[0.0, 0.001, 0.02]).unwrap();
    let mut buf = Vec::new();
    save_trace(&trace, &mut buf).unwrap();
    let back = load_trace(buf.as_slice()).unwrap();
    assert_eq!(back, trace);

    let cut = &buf[..buf.len() / 2];
    assert!(matches!(load_trace(cut), Err(Error::Parse { .. })));
}

#[test]
fn hand_written_trace_loads() {
    let c = ScenarioConfig { num_subcarriers: 2, ..ScenarioConfig::default() };
    let mut h = vec![[0.0, 0.0]; 9 * 2 * 4];
    // link (0,0), subcarrier 0 = identity; order is k, j, s, row, column
    h[0] = [1.0, 0.0];
    h[3] = [1.0, 0.0];
    let doc = serde_json::json!({
        "format": "netmimo-channel-trace",
        "version": 1,
        "config": c,
        "snapshots": [{ "t": 0.0, "h": h }],
    });
    let trace = load_trace(doc.to_string().as_bytes()).unwrap();
    let snap: &ChannelSnapshot = &trace.snapshots[0];
    assert_eq!(snap.link(0, 0, 0), &CMat::identity(2, 2));
    assert_eq!(snap.link(0, 1, 0), &CMat::zeros(2, 2));
}

#[test]
fn same_seed_same_trace() {
    let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(77) };
    let a = ChannelGenerator::new(c.clone()).unwrap().trace(&[0.0, 0.01]).unwrap();
    let b = ChannelGenerator::new(c).unwrap().trace(&[0.0, 0.01]).unwrap();
    assert_eq!(a, b);
}
