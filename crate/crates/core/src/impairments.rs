//! Transmitter and receiver impairments applied per OFDM symbol in the
//! frequency domain.
//!
//! Each chain adds complex Gaussian noise whose standard deviation is
//! `EVM(P) · RMS`, where `RMS` is the symbol's root-mean-square amplitude
//! over its subcarriers and `P` the same level in dBm. Transmit chains then
//! rotate the whole symbol by a Laplacian common phase error.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::linalg::complex_gaussian;
use crate::{Error, Result};

/// Piecewise-linear EVM curve over power in dBm.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmTable {
    knots: Vec<(f64, f64)>,
}

impl EvmTable {
    /// Knots are `(dBm, EVM fraction)` with strictly increasing power and
    /// EVM in `[0, 1)`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::config("evm_table", "needs at least one knot"));
        }
        if knots.iter().any(|&(p, e)| !p.is_finite() || !(0.0..1.0).contains(&e)) {
            return Err(Error::config("evm_table", "EVM values must lie in [0, 1)"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config("evm_table", "power knots must be strictly increasing"));
        }
        Ok(EvmTable { knots })
    }

    pub fn flat(evm: f64) -> Self {
        EvmTable::new(vec![(0.0, evm)]).expect("flat EVM must lie in [0, 1)")
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn is_zero(&self) -> bool {
        self.knots.iter().all(|&(_, e)| e == 0.0)
    }
}

/// Linear interpolation with constant extrapolation past both ends.
pub fn evm_at(table: &EvmTable, power_dbm: f64) -> f64 {
    let k = &table.knots;
    let (p0, e0) = k[0];
    let (pn, en) = k[k.len() - 1];
    if power_dbm <= p0 {
        return e0;
    }
    if power_dbm >= pn {
        return en;
    }
    let i = k.partition_point(|&(p, _)| p <= power_dbm);
    let (pa, ea) = k[i - 1];
    let (pb, eb) = k[i];
    ea + (eb - ea) * (power_dbm - pa) / (pb - pa)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentProfile {
    pub tx: Vec<EvmTable>,
    pub rx: Vec<EvmTable>,
    /// Standard deviation of the per-chain common phase error in degrees.
    pub cpe_std_deg: f64,
    /// Level in dBm of a unit-RMS transmit symbol.
    pub tx_dbm_at_unit_rms: f64,
    /// Level in dBm of a unit-RMS received symbol.
    pub rx_dbm_at_unit_rms: f64,
}

pub const NUM_CHAINS: usize = 6;

impl ImpairmentProfile {
    pub fn ideal() -> Self {
        Self::flat(0.0, 0.0, 0.0)
    }

    pub fn flat(tx_evm: f64, rx_evm: f64, cpe_std_deg: f64) -> Self {
        ImpairmentProfile {
            tx: vec![EvmTable::flat(tx_evm); NUM_CHAINS],
            rx: vec![EvmTable::flat(rx_evm); NUM_CHAINS],
            cpe_std_deg,
            tx_dbm_at_unit_rms: 0.0,
            rx_dbm_at_unit_rms: 0.0,
        }
    }

    /// Flat 2 % EVM on every chain with 1.5° CPE.
    pub fn default_evm() -> Self {
        Self::flat(0.02, 0.02, 1.5)
    }

    /// Synthetic curves: transmitters at 1.5 % rising to 4 % between 13 and
    /// 18 dBm, receivers at 4 % for weak inputs (−60 dBm) falling to 1 %
    /// above −40 dBm, 1.5° CPE.
    pub fn synthetic() -> Self {
        let tx = EvmTable::new(vec![(13.0, 0.015), (18.0, 0.04)]).unwrap();
        let rx = EvmTable::new(vec![(-60.0, 0.04), (-40.0, 0.01)]).unwrap();
        ImpairmentProfile {
            tx: vec![tx; NUM_CHAINS],
            rx: vec![rx; NUM_CHAINS],
            cpe_std_deg: 1.5,
            tx_dbm_at_unit_rms: 0.0,
            rx_dbm_at_unit_rms: 0.0,
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.cpe_std_deg == 0.0
            && self.tx.iter().all(EvmTable::is_zero)
            && self.rx.iter().all(EvmTable::is_zero)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx.len() != NUM_CHAINS || self.rx.len() != NUM_CHAINS {
            return Err(Error::config("profile", "six TX and six RX tables are required"));
        }
        if !(self.cpe_std_deg >= 0.0 && self.cpe_std_deg.is_finite()) {
            return Err(Error::config("cpe_std_deg", "must be finite and >= 0"));
        }
        if !self.tx_dbm_at_unit_rms.is_finite() || !self.rx_dbm_at_unit_rms.is_finite() {
            return Err(Error::config("dbm_at_unit_rms", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    /// Per chain, `[dBm, EVM %]` knots.
    tx: Vec<Vec<[f64; 2]>>,
    rx: Vec<Vec<[f64; 2]>>,
    cpe_std_deg: f64,
    #[serde(default)]
    tx_dbm_at_unit_rms: f64,
    #[serde(default)]
    rx_dbm_at_unit_rms: f64,
}

fn tables_from_file(chains: Vec<Vec<[f64; 2]>>) -> Result<Vec<EvmTable>> {
    chains
        .into_iter()
        .map(|k| EvmTable::new(k.into_iter().map(|[p, e]| (p, e / 100.0)).collect()))
        .collect()
}

fn tables_to_file(tables: &[EvmTable]) -> Vec<Vec<[f64; 2]>> {
    tables
        .iter()
        .map(|t| t.knots.iter().map(|&(p, e)| [p, e * 100.0]).collect())
        .collect()
}

/// Reads a JSON profile listing `[dBm, EVM %]` knots for each chain.
pub fn load_profile<R: Read>(source: R) -> Result<ImpairmentProfile> {
    let file: ProfileFile = serde_json::from_reader(source).map_err(Error::from_json)?;
    let profile = ImpairmentProfile {
        tx: tables_from_file(file.tx)?,
        rx: tables_from_file(file.rx)?,
        cpe_std_deg: file.cpe_std_deg,
        tx_dbm_at_unit_rms: file.tx_dbm_at_unit_rms,
        rx_dbm_at_unit_rms: file.rx_dbm_at_unit_rms,
    };
    profile.validate()?;
    Ok(profile)
}

pub fn save_profile<W: Write>(profile: &ImpairmentProfile, sink: W) -> Result<()> {
    let file = ProfileFile {
        tx: tables_to_file(&profile.tx),
        rx: tables_to_file(&profile.rx),
        cpe_std_deg: profile.cpe_std_deg,
        tx_dbm_at_unit_rms: profile.tx_dbm_at_unit_rms,
        rx_dbm_at_unit_rms: profile.rx_dbm_at_unit_rms,
    };
    serde_json::to_writer_pretty(sink, &file).map_err(Error::from_json)
}

/// Complex values indexed by (chain, OFDM symbol, subcarrier).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    chains: usize,
    symbols: usize,
    subcarriers: usize,
    data: Vec<Complex64>,
}

impl SymbolGrid {
    pub fn zeros(chains: usize, symbols: usize, subcarriers: usize) -> Self {
        SymbolGrid {
            chains,
            symbols,
            subcarriers,
            data: vec![Complex64::new(0.0, 0.0); chains * symbols * subcarriers],
        }
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    fn offset(&self, chain: usize, symbol: usize) -> usize {
        assert!(chain < self.chains && symbol < self.symbols);
        (chain * self.symbols + symbol) * self.subcarriers
    }

    pub fn get(&self, chain: usize, symbol: usize, sc: usize) -> Complex64 {
        self.symbol(chain, symbol)[sc]
    }

    pub fn set(&mut self, chain: usize, symbol: usize, sc: usize, value: Complex64) {
        self.symbol_mut(chain, symbol)[sc] = value;
    }

    pub fn symbol(&self, chain: usize, symbol: usize) -> &[Complex64] {
        let o = self.offset(chain, symbol);
        &self.data[o..o + self.subcarriers]
    }

    pub fn symbol_mut(&mut self, chain: usize, symbol: usize) -> &mut [Complex64] {
        let o = self.offset(chain, symbol);
        let n = self.subcarriers;
        &mut self.data[o..o + n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn rms(x: &[Complex64]) -> f64 {
    (x.iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64).sqrt()
}

/// Laplacian phase with standard deviation `std_deg` degrees, in radians.
pub fn sample_cpe<R: Rng + ?Sized>(std_deg: f64, rng: &mut R) -> f64 {
    if std_deg == 0.0 {
        return 0.0;
    }
    let b = std_deg.to_radians() / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn add_evm_noise<R: Rng + ?Sized>(
    x: &mut [Complex64],
    table: &EvmTable,
    dbm_at_unit_rms: f64,
    rng: &mut R,
) {
    let level = rms(x);
    if level == 0.0 || table.is_zero() {
        return;
    }
    let dbm = 20.0 * level.log10() + dbm_at_unit_rms;
    let sigma = evm_at(table, dbm) * level;
    for z in x.iter_mut() {
        *z += complex_gaussian(rng, sigma * sigma);
    }
}

/// Applies transmit EVM noise and CPE in place and returns the phase drawn
/// for each (chain, symbol), chain-major.
pub fn apply_tx_impairments<R: Rng + ?Sized>(
    grid: &mut SymbolGrid,
    profile: &ImpairmentProfile,
    rng: &mut R,
) -> Vec<f64> {
    let mut phases = Vec::with_capacity(grid.chains * grid.symbols);
    for c in 0..grid.chains {
        let table = &profile.tx[c % profile.tx.len()];
        for t in 0..grid.symbols {
            let x = grid.symbol_mut(c, t);
            add_evm_noise(x, table, profile.tx_dbm_at_unit_rms, rng);
            let theta = sample_cpe(profile.cpe_std_deg, rng);
            if theta != 0.0 {
                let ph = Complex64::from_polar(1.0, theta);
                x.iter_mut().for_each(|z| *z *= ph);
            }
            phases.push(theta);
        }
    }
    phases
}

/// Receive-side EVM noise keyed on the received level; no phase error.
pub fn apply_rx_impairments<R: Rng + ?Sized>(
    grid: &mut SymbolGrid,
    profile: &ImpairmentProfile,
    rng: &mut R,
) {
    for c in 0..grid.chains {
        let table = &profile.rx[c % profile.rx.len()];
        for t in 0..grid.symbols {
            add_evm_noise(grid.symbol_mut(c, t), table, profile.rx_dbm_at_unit_rms, rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qpsk_grid(rng: &mut ChaCha8Rng, chains: usize, symbols: usize, nc: usize, amp: f64) -> SymbolGrid {
        let mut g = SymbolGrid::zeros(chains, symbols, nc);
        let s = amp / std::f64::consts::SQRT_2;
        for c in 0..chains {
            for t in 0..symbols {
                for z in g.symbol_mut(c, t) {
                    *z = Complex64::new(
                        if rng.random::<bool>() { s } else { -s },
                        if rng.random::<bool>() { s } else { -s },
                    );
                }
            }
        }
        g
    }

    fn empirical_evm(a: &SymbolGrid, b: &SymbolGrid) -> f64 {
        let (mut err, mut sig) = (0.0, 0.0);
        for (x, y) in a.data.iter().zip(&b.data) {
            err += (y - x).norm_sqr();
            sig += x.norm_sqr();
        }
        (err / sig).sqrt()
    }

    #[test]
    fn interpolation() {
        let t = EvmTable::new(vec![(0.0, 0.01), (10.0, 0.03)]).unwrap();
        assert_eq!(evm_at(&t, 0.0), 0.01);
        assert_eq!(evm_at(&t, 10.0), 0.03);
        assert!((evm_at(&t, 5.0) - 0.02).abs() < 1e-15);
        assert_eq!(evm_at(&t, -50.0), 0.01);
        assert_eq!(evm_at(&t, 50.0), 0.03);
    }

    #[test]
    fn table_validation() {
        assert!(EvmTable::new(vec![]).is_err());
        assert!(EvmTable::new(vec![(1.0, 0.01), (1.0, 0.02)]).is_err());
        assert!(EvmTable::new(vec![(1.0, 1.5)]).is_err());
    }

    #[test]
    fn ideal_profile_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = qpsk_grid(&mut rng, 6, 10, 38, 1.0);
        let mut h = g.clone();
        let ph = apply_tx_impairments(&mut h, &ImpairmentProfile::ideal(), &mut rng);
        apply_rx_impairments(&mut h, &ImpairmentProfile::ideal(), &mut rng);
        assert_eq!(g, h);
        assert!(ph.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn flat_tx_evm_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = qpsk_grid(&mut rng, 1, 2700, 38, 0.7);
        let mut h = g.clone();
        apply_tx_impairments(&mut h, &ImpairmentProfile::flat(0.02, 0.0, 0.0), &mut rng);
        let e = empirical_evm(&g, &h);
        assert!((e / 0.02 - 1.0).abs() < 0.03, "{e}");
    }

    #[test]
    fn cpe_is_common_to_the_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = qpsk_grid(&mut rng, 6, 20, 38, 1.0);
        let mut h = g.clone();
        let ph = apply_tx_impairments(&mut h, &ImpairmentProfile::flat(0.0, 0.0, 1.5), &mut rng);
        for c in 0..6 {
            for t in 0..20 {
                let p = Complex64::from_polar(1.0, ph[c * 20 + t]);
                for s in 0..38 {
                    assert_eq!(h.get(c, t, s), g.get(c, t, s) * p);
                }
            }
        }
    }

    #[test]
    fn weaker_inputs_get_more_relative_noise() {
        let p = ImpairmentProfile::synthetic();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut last = 0.0;
        for amp_db in [-30.0, -40.0, -50.0, -60.0] {
            let amp = 10f64.powf(amp_db / 20.0);
            let g = qpsk_grid(&mut rng, 1, 500, 38, amp);
            let mut h = g.clone();
            apply_rx_impairments(&mut h, &p, &mut rng);
            let e = empirical_evm(&g, &h);
            assert!(e > last);
            last = e;
        }
    }

    #[test]
    fn zero_std_cpe_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..100).all(|_| sample_cpe(0.0, &mut rng) == 0.0));
    }

    #[test]
    fn profile_file_roundtrip_and_validation() {
        let p = ImpairmentProfile::synthetic();
        let mut buf = Vec::new();
        save_profile(&p, &mut buf).unwrap();
        let q = load_profile(buf.as_slice()).unwrap();
        assert_eq!(p.cpe_std_deg, q.cpe_std_deg);
        for (a, b) in p.tx.iter().zip(&q.tx) {
            for (x, y) in a.knots().iter().zip(b.knots()) {
                assert!((x.0 - y.0).abs() < 1e-12 && (x.1 - y.1).abs() < 1e-12);
            }
        }
        let bad = r#"{"tx": [[[10, 2], [5, 3]]], "rx": [], "cpe_std_deg": 1}"#;
        assert!(load_profile(bad.as_bytes()).is_err());
    }
}
