use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netmimo::codec::{
    angles_to_v, decode_csi, decompose, dequantize_angles, dequantize_phi, dequantize_psi, encode_csi,
    feedback_bit_count, quantize_angles, quantize_phi, quantize_psi, quantize_snr, unpack_fields, v_to_angles,
    CodecConfig,
};
use netmimo::linalg::{chordal_distance, random_matrix, random_semi_unitary, CMat};

fn testbed() -> CodecConfig {
    CodecConfig::testbed()
}

/// Field sum written out independently of the codec: angles per group,
/// one average per stream, one delta per reporting point and stream.
fn expected_bits(m: usize, n: usize, ng: usize, nc: usize, b: usize) -> usize {
    let per_group: usize = (0..n).map(|i| m - 1 - i).sum::<usize>() * b;
    let groups = nc.div_ceil(ng);
    let points = nc.div_ceil((ng / 2).max(1));
    groups * per_group + n * 8 + points * n * 4
}

#[test]
fn packed_length_matches_field_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for ng in [1, 2, 4, 8, 16] {
        for nc in [38, 58] {
            let cfg = CodecConfig { ng, nc, ..testbed() };
            let h: Vec<CMat> = (0..nc).map(|_| random_matrix(&mut rng, 2, 6)).collect();
            let c = encode_csi(&h, &cfg, 1e-3).unwrap();
            assert_eq!(c.bit_count, expected_bits(6, 2, ng, nc, 16), "ng={ng} nc={nc}");
            assert_eq!(c.payload.len(), c.bit_count.div_ceil(8));
            assert_eq!(cfg.packed_bits(), c.bit_count);
        }
    }
}

#[test]
fn testbed_payload_sizes() {
    let cfg = testbed();
    let closed_form = ((2 * 6 - 1) * 2 - 2 * 2) * (7 + 9) / 2;
    assert_eq!(closed_form, 144);
    assert_eq!(cfg.angles_per_group() * (7 + 9), closed_form);
    let b = feedback_bit_count(&cfg).unwrap();
    assert_eq!(b.analytic_total, 719);
    assert!((b.per_subcarrier - 18.921).abs() < 5e-4);
}

#[test]
fn single_group_single_stream_formula() {
    for m in [2usize, 4, 6] {
        let cfg = CodecConfig { m, n: 1, ng: 38, nc: 38, ..testbed() };
        let b = feedback_bit_count(&cfg).unwrap();
        let symbolic = ((2 * m - 1) - 1) as f64 * 16.0 / (2.0 * 38.0) + 4.0 / 38.0 + 16.0 / 38.0;
        assert!((b.per_subcarrier - symbolic).abs() < 1e-12);
    }
}

#[test]
fn random_payloads_always_decode() {
    let cfg = testbed();
    let bits = cfg.packed_bits();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..2_000 {
        let mut payload: Vec<u8> = (0..bits.div_ceil(8)).map(|_| rng.random()).collect();
        // unused tail bits of the last byte must be zero
        let spare = payload.len() * 8 - bits;
        if let Some(last) = payload.last_mut() {
            *last &= 0xffu8 << spare;
        }
        let d = decode_csi(&payload, bits, &cfg).unwrap();
        for (_, v) in &d.groups {
            let gram = v.adjoint() * v;
            assert!((gram - CMat::identity(2, 2)).norm() < 1e-9);
        }
        for (_, snr) in &d.snr_points {
            assert!(snr.iter().all(|x| x.is_finite() && (-18.0..=61.0).contains(x)));
        }
    }
}

#[test]
fn encode_decode_keeps_fields() {
    let cfg = testbed();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let h: Vec<CMat> = (0..38).map(|_| random_matrix(&mut rng, 2, 6).scale(10.0)).collect();
        let c = encode_csi(&h, &cfg, 1e-2).unwrap();
        let d = decode_csi(&c.payload, c.bit_count, &cfg).unwrap();
        assert_eq!(d.fields, c.fields);
        assert_eq!(unpack_fields(&c.payload, c.bit_count, &cfg).unwrap(), c.fields);
    }
}

#[test]
fn svd_multiplies_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1_000 {
        let h = random_matrix(&mut rng, 2, 6);
        let d = decompose(&h).unwrap();
        assert!((d.reconstruct() - &h).norm() < 1e-9 * h.norm());
        assert!(d.s[0] >= d.s[1]);
    }
}

#[test]
fn nine_angles_of_each_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = v_to_angles(&random_semi_unitary(&mut rng, 6, 2)).unwrap();
    assert_eq!((a.phi.len(), a.psi.len()), (9, 9));
}

/// Upper bound on the chordal error from half-step angle errors: each
/// phase stage and each rotation is unitary, so their errors add up in
/// spectral norm; the projector difference has rank at most 2n.
fn chordal_bound(n: usize, b_phi: u8, b_psi: u8, angles: usize) -> f64 {
    let phase_stages = n as f64;
    let s = phase_stages * PI / f64::from(1u32 << b_phi) + angles as f64 * PI / f64::from(1u32 << (b_psi + 2));
    2.0 * (n as f64).sqrt() * s
}

#[test]
fn quantized_subspace_error_is_small_and_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut coarse, mut fine) = (Vec::new(), Vec::new());
    let bound = chordal_bound(2, 7, 9, 9);
    for _ in 0..1_000 {
        let v = random_semi_unitary(&mut rng, 6, 2);
        let a = v_to_angles(&v).unwrap();
        let d = |bp: u8, bs: u8| {
            let q = dequantize_angles(&quantize_angles(&a, bp, bs), bp, bs);
            chordal_distance(&v, &angles_to_v(&q, 6, 2).unwrap())
        };
        fine.push(d(7, 9));
        coarse.push(d(5, 7));
    }
    let max = fine.iter().cloned().fold(0.0, f64::max);
    assert!(max <= bound, "{max} > {bound}");
    let med = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (mf, mc) = (med(fine), med(coarse));
    assert!(mf < 0.05, "{mf}");
    assert!(mf <= mc, "{mf} vs {mc}");
}

fn brute_force(x: f64, levels: u32, value: impl Fn(u16) -> f64, circular: bool) -> u16 {
    let mut best = (f64::INFINITY, 0u16);
    for k in 0..levels as u16 {
        let mut d = (x - value(k)).abs();
        if circular {
            d = d.min(TAU - d);
        }
        // strict comparison keeps the smaller index on ties
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

#[test]
fn angle_quantizers_pick_the_nearest_grid_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100_000 {
        let phi: f64 = rng.random_range(0.0..TAU);
        let psi: f64 = rng.random_range(0.0..FRAC_PI_2);
        for (bp, bs) in [(7u8, 9u8), (5, 7)] {
            let kp = quantize_phi(phi, bp);
            let want = brute_force(phi, 1 << bp, |k| dequantize_phi(k, bp), false);
            assert_eq!(kp, want, "phi {phi}");
            let ks = quantize_psi(psi, bs);
            assert_eq!(ks, brute_force(psi, 1 << bs, |k| dequantize_psi(k, bs), false), "psi {psi}");
        }
    }
}

#[test]
fn quarter_pi_psi_error() {
    let q = dequantize_psi(quantize_psi(PI / 4.0, 9), 9);
    assert!((q - PI / 4.0).abs() <= PI / 2048.0);
}

/// Brute-force SNR encoder: nearest average code, then for each value the
/// delta on the 4-bit grid nearest to it, ties away from zero.
fn brute_snr(points: &[Vec<f64>], cfg: &CodecConfig) -> (Vec<u16>, Vec<Vec<u8>>) {
    let streams = points[0].len();
    let mut avg_codes = Vec::new();
    for i in 0..streams {
        let mean = points.iter().map(|p| p[i]).sum::<f64>() / points.len() as f64;
        let mut best = (f64::INFINITY, 0u16);
        for c in 0..256u16 {
            let d = (cfg.snr_avg_min_db + f64::from(c) * cfg.snr_avg_step_db - mean).abs();
            if d < best.0 - 1e-12 || ((d - best.0).abs() <= 1e-12 && c > best.1 && mean > 0.0) {
                best = (d, c);
            }
        }
        avg_codes.push(best.1);
    }
    let deltas = points
        .iter()
        .map(|p| {
            (0..streams)
                .map(|i| {
                    let avg = cfg.snr_avg_min_db + f64::from(avg_codes[i]) * cfg.snr_avg_step_db;
                    let target = p[i] - avg;
                    let mut best = (f64::INFINITY, 0i32);
                    for d in -8i32..=7 {
                        let e = (f64::from(d) - target).abs();
                        if e < best.0 - 1e-12 || ((e - best.0).abs() <= 1e-12 && d.abs() > best.1.abs()) {
                            best = (e, d);
                        }
                    }
                    (best.1 + 8) as u8
                })
                .collect()
        })
        .collect();
    (avg_codes, deltas)
}

#[test]
fn snr_codes_match_brute_force() {
    let cfg = testbed();
    let fixed = vec![vec![30.0, 41.0], vec![41.0, 30.0]];
    let q = quantize_snr(&fixed, &cfg);
    assert_eq!(q.codes.avg_codes, vec![182, 182]);
    // 30 − 35.5 = −5.5 → −6, 41 − 35.5 = 5.5 → +6
    assert_eq!(q.codes.delta_codes, vec![vec![2, 14], vec![14, 2]]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2_000 {
        let base: f64 = rng.random_range(0.0..50.0);
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..2).map(|_| base + rng.random_range(-6.0..6.0)).collect())
            .collect();
        let q = quantize_snr(&pts, &cfg);
        let (a, d) = brute_snr(&pts, &cfg);
        assert_eq!(q.codes.avg_codes, a);
        assert_eq!(q.codes.delta_codes, d);
    }
}

#[test]
fn snr_endpoints() {
    let cfg = testbed();
    let q = quantize_snr(&[vec![-10.0, 53.75]], &cfg);
    assert_eq!(q.codes.avg_codes, vec![0, 255]);
    let q = quantize_snr(&vec![vec![20.0, 20.0]; 10], &cfg);
    assert_eq!(q.codes.avg_codes, vec![120, 120]);
    assert!(q.codes.delta_codes.iter().flatten().all(|&d| d == 8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn givens_roundtrip_any_seed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_semi_unitary(&mut rng, 6, 2);
        let back = angles_to_v(&v_to_angles(&v).unwrap(), 6, 2).unwrap();
        prop_assert!(chordal_distance(&v, &back) < 1e-9);
    }

    #[test]
    fn phi_error_is_within_half_step(phi in 0.0..TAU) {
        let err = (phi - dequantize_phi(quantize_phi(phi, 7), 7)).abs();
        prop_assert!(err <= PI / 128.0 + 1e-12);
    }

    #[test]
    fn packing_is_invertible(seed in any::<u64>(), ng in prop::sample::select(vec![1usize, 2, 4, 8, 16])) {
        let cfg = CodecConfig { ng, ..testbed() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<CMat> = (0..38).map(|_| random_matrix(&mut rng, 2, 6)).collect();
        let c = encode_csi(&h, &cfg, 1e-3).unwrap();
        prop_assert_eq!(unpack_fields(&c.payload, c.bit_count, &cfg).unwrap(), c.fields);
    }
}
