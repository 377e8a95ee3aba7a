use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netmimo::impairments::{
    apply_rx_impairments, apply_tx_impairments, evm_at, load_profile, sample_cpe, save_profile, EvmTable,
    ImpairmentProfile, SymbolGrid,
};

fn random_grid(rng: &mut ChaCha8Rng, chains: usize, symbols: usize, nc: usize) -> SymbolGrid {
    let mut g = SymbolGrid::zeros(chains, symbols, nc);
    for c in 0..chains {
        for t in 0..symbols {
            for z in g.symbol_mut(c, t) {
                *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
    }
    g
}

/// Measured EVM: RMS error over RMS reference, pooled over the grid.
fn measured_evm(clean: &SymbolGrid, noisy: &SymbolGrid, derotate: Option<&[f64]>) -> f64 {
    let (mut err, mut sig) = (0.0, 0.0);
    for c in 0..clean.chains() {
        for t in 0..clean.symbols() {
            let back = derotate.map_or(Complex64::new(1.0, 0.0), |p| {
                Complex64::from_polar(1.0, -p[c * clean.symbols() + t])
            });
            for (a, b) in clean.symbol(c, t).iter().zip(noisy.symbol(c, t)) {
                err += (b * back - a).norm_sqr();
                sig += a.norm_sqr();
            }
        }
    }
    (err / sig).sqrt()
}

#[test]
fn flat_transmit_evm_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let clean = random_grid(&mut rng, 6, 400, 52);
    let mut noisy = clean.clone();
    let phases = apply_tx_impairments(&mut noisy, &ImpairmentProfile::flat(0.02, 0.0, 1.5), &mut rng);
    let evm = measured_evm(&clean, &noisy, Some(&phases));
    assert!((evm / 0.02 - 1.0).abs() < 0.03, "{evm}");
}

#[test]
fn flat_receive_evm_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clean = random_grid(&mut rng, 6, 400, 52);
    let mut noisy = clean.clone();
    apply_rx_impairments(&mut noisy, &ImpairmentProfile::flat(0.0, 0.04, 0.0), &mut rng);
    let evm = measured_evm(&clean, &noisy, None);
    assert!((evm / 0.04 - 1.0).abs() < 0.03, "{evm}");
}

#[test]
fn interpolation_stays_within_neighbouring_knots() {
    let table = EvmTable::new(vec![(-60.0, 0.04), (-50.0, 0.03), (-40.0, 0.01), (-20.0, 0.005)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = table.knots();
    let mut last = f64::INFINITY;
    let mut queries: Vec<f64> = (0..1000).map(|_| rng.random_range(-80.0..0.0)).collect();
    queries.sort_by(f64::total_cmp);
    for p in queries {
        let e = evm_at(&table, p);
        assert!(e <= last + 1e-15, "not monotone at {p}");
        last = e;
        let i = k.partition_point(|&(x, _)| x <= p);
        let (lo, hi) = match i {
            0 => (k[0].1, k[0].1),
            i if i == k.len() => (k[i - 1].1, k[i - 1].1),
            i => (k[i].1.min(k[i - 1].1), k[i].1.max(k[i - 1].1)),
        };
        assert!(e >= lo - 1e-15 && e <= hi + 1e-15);
    }
    assert_eq!(evm_at(&table, -50.0), 0.03);
    assert!((evm_at(&table, -45.0) - 0.02).abs() < 1e-15);
}

#[test]
fn cpe_median_matches_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mags: Vec<f64> = (0..200_000).map(|_| sample_cpe(1.5, &mut rng).abs()).collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let b = 1.5f64.to_radians() / 2f64.sqrt();
    let expected = b * std::f64::consts::LN_2;
    assert!((median / expected - 1.0).abs() < 0.02, "{median} vs {expected}");
}

#[test]
fn noise_energy_adds_to_signal_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clean = random_grid(&mut rng, 6, 300, 52);
    let mut noisy = clean.clone();
    let p = ImpairmentProfile::flat(0.05, 0.0, 3.0);
    apply_tx_impairments(&mut noisy, &p, &mut rng);
    let energy = |g: &SymbolGrid| -> f64 {
        (0..g.chains())
            .flat_map(|c| (0..g.symbols()).map(move |t| (c, t)))
            .map(|(c, t)| g.symbol(c, t).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    };
    let ratio = energy(&noisy) / energy(&clean);
    assert!((ratio - (1.0 + 0.05f64.powi(2))).abs() < 5e-4, "{ratio}");
}

#[test]
fn ideal_profile_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let clean = random_grid(&mut rng, 6, 10, 52);
    let mut g = clean.clone();
    let p = ImpairmentProfile::ideal();
    assert!(p.is_ideal());
    let phases = apply_tx_impairments(&mut g, &p, &mut rng);
    apply_rx_impairments(&mut g, &p, &mut rng);
    assert_eq!(g, clean);
    assert!(phases.iter().all(|&x| x == 0.0));
}

#[test]
fn profile_file_roundtrip() {
    let p = ImpairmentProfile::synthetic();
    let mut buf = Vec::new();
    save_profile(&p, &mut buf).unwrap();
    assert_eq!(load_profile(buf.as_slice()).unwrap(), p);
    assert!(load_profile(&b"{\"tx\": 3}"[..]).is_err());
}

#[test]
fn table_rejects_bad_knots() {
    assert!(EvmTable::new(vec![]).is_err());
    assert!(EvmTable::new(vec![(0.0, 1.2)]).is_err());
    assert!(EvmTable::new(vec![(0.0, 0.01), (0.0, 0.02)]).is_err());
}
