//! Synthetic indoor channels for the three-cell, two-antenna downlink.
//!
//! Each BS→MS link is a tapped delay line with an exponential power-delay
//! profile. Direct links may carry a static Rician component on the first
//! tap; cross links are Rayleigh and attenuated by `isolation_db`. Mobility
//! is modelled by letting a fraction of the scattered power evolve as a
//! first-order Gauss–Markov process with Jakes-shaped step correlation
//! `J0(2π f_d Δt)`.
//!
//! Matrices are receive × transmit. Snapshots are indexed `h[k][j][s]`:
//! channel from BS `j` to MS `k` on subcarrier `s`.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{complex_gaussian, CMat};
use crate::{seed, Error, Result};

/// Cyclic prefix of the OFDM air interface.
pub const CYCLIC_PREFIX_S: f64 = 0.4e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of BS–MS pairs (fixed at 3).
    pub num_links: usize,
    /// Antennas per BS and per MS (fixed at 2).
    pub antennas_per_node: usize,
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    /// Per-MS direct-link SNR range in dB; each MS draws uniformly from it.
    pub snr_range_db: [f64; 2],
    /// Mean attenuation of cross links relative to the direct link of the same MS.
    pub isolation_db: f64,
    /// Rician K-factor of direct links in dB; `None` is pure Rayleigh (NLoS).
    pub rician_k_db: Option<f64>,
    pub rms_delay_spread_s: f64,
    pub num_taps: usize,
    pub tap_spacing_s: f64,
    pub doppler_hz: f64,
    /// Fraction of a direct link's scattered power that is time varying.
    pub varying_fraction: f64,
    /// Time-varying fraction on cross links. When absent, cross links carry
    /// the same absolute varying power as the direct link of the same MS,
    /// i.e. `min(1, varying_fraction · 10^(isolation_db/10))`.
    pub cross_varying_fraction: Option<f64>,
    /// Thermal noise power per receive antenna (linear, same units as symbol power).
    pub noise_power: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_links: 3,
            antennas_per_node: 2,
            num_subcarriers: 38,
            subcarrier_spacing_hz: 312.5e3,
            snr_range_db: [35.0, 60.0],
            isolation_db: 15.0,
            rician_k_db: None,
            rms_delay_spread_s: 50e-9,
            num_taps: 16,
            tap_spacing_s: 50e-9,
            doppler_hz: 0.0,
            varying_fraction: 1.0,
            cross_varying_fraction: None,
            noise_power: 1e-9,
            rng_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_links != 3 {
            return Err(Error::config("num_links", "must be 3"));
        }
        if self.antennas_per_node != 2 {
            return Err(Error::config("antennas_per_node", "must be 2"));
        }
        if self.num_subcarriers < 2 {
            return Err(Error::config("num_subcarriers", "must be at least 2"));
        }
        if !(self.subcarrier_spacing_hz > 0.0 && self.subcarrier_spacing_hz.is_finite()) {
            return Err(Error::config("subcarrier_spacing_hz", "must be positive"));
        }
        let [lo, hi] = self.snr_range_db;
        if !(lo.is_finite() && hi.is_finite() && (0.0..=80.0).contains(&lo) && (0.0..=80.0).contains(&hi))
        {
            return Err(Error::config("snr_range_db", "must lie within [0, 80] dB"));
        }
        if lo > hi {
            return Err(Error::config("snr_range_db", "low end exceeds high end"));
        }
        if !(self.isolation_db >= 0.0 && self.isolation_db.is_finite()) {
            return Err(Error::config("isolation_db", "must be finite and >= 0"));
        }
        if let Some(k) = self.rician_k_db {
            if !k.is_finite() {
                return Err(Error::config("rician_k_db", "must be finite (use null for NLoS)"));
            }
        }
        if !(self.rms_delay_spread_s >= 0.0 && self.rms_delay_spread_s < CYCLIC_PREFIX_S) {
            return Err(Error::config(
                "rms_delay_spread_s",
                "must be >= 0 and shorter than the 0.4 us cyclic prefix",
            ));
        }
        if !(1..=16).contains(&self.num_taps) {
            return Err(Error::config("num_taps", "must be within 1..=16"));
        }
        if !(self.tap_spacing_s > 0.0 && self.tap_spacing_s.is_finite()) {
            return Err(Error::config("tap_spacing_s", "must be positive"));
        }
        if self.rms_delay_spread_s > 0.0 && self.rms_delay_spread_s >= max_rms_spread(self) {
            return Err(Error::config(
                "rms_delay_spread_s",
                "not representable with num_taps x tap_spacing_s",
            ));
        }
        if !(self.doppler_hz >= 0.0 && self.doppler_hz.is_finite()) {
            return Err(Error::config("doppler_hz", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.varying_fraction) {
            return Err(Error::config("varying_fraction", "must lie within [0, 1]"));
        }
        if let Some(f) = self.cross_varying_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("cross_varying_fraction", "must lie within [0, 1]"));
            }
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config("noise_power", "must be positive"));
        }
        Ok(())
    }

    pub fn isolation_linear(&self) -> f64 {
        10f64.powf(-self.isolation_db / 10.0)
    }

    pub fn cross_varying(&self) -> f64 {
        self.cross_varying_fraction.unwrap_or_else(|| {
            (self.varying_fraction * 10f64.powf(self.isolation_db / 10.0)).min(1.0)
        })
    }

    /// Centre-referenced baseband frequency of subcarrier `s`.
    pub fn subcarrier_frequency(&self, s: usize) -> f64 {
        (s as f64 - (self.num_subcarriers as f64 - 1.0) / 2.0) * self.subcarrier_spacing_hz
    }
}

fn geometric_profile(ratio: f64, taps: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..taps).map(|l| ratio.powi(l as i32)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn rms_spread(p: &[f64], spacing: f64) -> f64 {
    let mean: f64 = p.iter().enumerate().map(|(l, w)| w * l as f64).sum();
    let second: f64 = p.iter().enumerate().map(|(l, w)| w * (l as f64).powi(2)).sum();
    (second - mean * mean).max(0.0).sqrt() * spacing
}

fn max_rms_spread(cfg: &ScenarioConfig) -> f64 {
    rms_spread(&geometric_profile(1.0, cfg.num_taps), cfg.tap_spacing_s)
}

/// Normalised tap powers of a truncated exponential profile whose discrete
/// RMS delay spread equals `cfg.rms_delay_spread_s`.
pub fn power_delay_profile(cfg: &ScenarioConfig) -> Vec<f64> {
    if cfg.rms_delay_spread_s <= 0.0 || cfg.num_taps == 1 {
        let mut p = vec![0.0; cfg.num_taps];
        p[0] = 1.0;
        return p;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rms_spread(&geometric_profile(mid, cfg.num_taps), cfg.tap_spacing_s)
            < cfg.rms_delay_spread_s
        {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    geometric_profile(0.5 * (lo + hi), cfg.num_taps)
}

/// Step correlation of the varying tap component over `dt` seconds.
pub fn jakes_correlation(doppler_hz: f64, dt: f64) -> f64 {
    puruspe::Jn(0, 2.0 * std::f64::consts::PI * doppler_hz * dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    pub t: f64,
    num_links: usize,
    num_subcarriers: usize,
    h: Vec<CMat>,
}

impl ChannelSnapshot {
    /// Builds a snapshot from matrices in k-major, j-major, s-major order.
    pub fn from_matrices(
        t: f64,
        num_links: usize,
        num_subcarriers: usize,
        h: Vec<CMat>,
    ) -> Result<Self> {
        if h.len() != num_links * num_links * num_subcarriers {
            return Err(Error::contract(format!(
                "expected {} link matrices, got {}",
                num_links * num_links * num_subcarriers,
                h.len()
            )));
        }
        if let Some(m) = h.iter().find(|m| m.shape() != (2, 2)) {
            return Err(Error::contract(format!("link matrix has shape {:?}", m.shape())));
        }
        if h.iter().flat_map(|m| m.iter()).any(|x| !x.is_finite()) {
            return Err(Error::contract("non-finite channel entry"));
        }
        Ok(ChannelSnapshot {
            t,
            num_links,
            num_subcarriers,
            h,
        })
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    fn index(&self, k: usize, j: usize, s: usize) -> usize {
        (k * self.num_links + j) * self.num_subcarriers + s
    }

    /// Channel from BS `j` to MS `k` on subcarrier `s`.
    pub fn link(&self, k: usize, j: usize, s: usize) -> &CMat {
        &self.h[self.index(k, j, s)]
    }

    pub fn link_mut(&mut self, k: usize, j: usize, s: usize) -> &mut CMat {
        let i = self.index(k, j, s);
        &mut self.h[i]
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.h
    }

    /// The 2×(2K) channel from all BS antennas to MS `k`.
    pub fn aggregate(&self, k: usize, s: usize) -> Result<CMat> {
        aggregate_comp_channel(self, k, s)
    }
}

/// Horizontal concatenation `[h[k][0][s] | h[k][1][s] | h[k][2][s]]`.
/// Column `2j + a` is antenna `a` of BS `j`.
pub fn aggregate_comp_channel(snap: &ChannelSnapshot, k: usize, s: usize) -> Result<CMat> {
    if k >= snap.num_links || s >= snap.num_subcarriers {
        return Err(Error::contract(format!(
            "index (k={k}, s={s}) out of range for {} links x {} subcarriers",
            snap.num_links, snap.num_subcarriers
        )));
    }
    let k_links = snap.num_links;
    Ok(DMatrix::from_fn(2, 2 * k_links, |r, c| {
        snap.link(k, c / 2, s)[(r, c % 2)]
    }))
}

/// Stateful channel source bound to one scenario and seed.
///
/// The generator must not be advanced from several threads at once; clone
/// it (or build one per thread) for parallel use.
#[derive(Debug, Clone)]
pub struct ChannelGenerator {
    cfg: ScenarioConfig,
    pdp: Vec<f64>,
    /// Mean per-entry power of each link, `[k][j]` flattened.
    link_gain: Vec<f64>,
    /// Static Rician component per (k, j, r, c); zero on cross links.
    los: Vec<Complex64>,
    /// Static scattered tap values per (k, j, r, c, l), unit variance.
    fixed: Vec<Complex64>,
    /// Gauss–Markov tap values per (k, j, r, c, l), unit variance.
    varying: Vec<Complex64>,
    phasors: Vec<Complex64>,
    evolve_rng: ChaCha8Rng,
    history: Vec<ChannelSnapshot>,
}

/// Creates a generator for `cfg`; deterministic in `cfg.rng_seed`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<ChannelGenerator> {
    ChannelGenerator::new(cfg.clone())
}

impl ChannelGenerator {
    const ENTRIES: usize = 4;

    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let k_links = cfg.num_links;
        let taps = cfg.num_taps;
        let pdp = power_delay_profile(&cfg);
        let mut rng = seed::rng(cfg.rng_seed, &[seed::label("channel-init")]);
        let evolve_rng = seed::rng(cfg.rng_seed, &[seed::label("channel-evolve")]);

        let [lo, hi] = cfg.snr_range_db;
        let noise = cfg.noise_power;
        let iso = cfg.isolation_linear();
        let mut link_gain = Vec::with_capacity(k_links * k_links);
        for k in 0..k_links {
            let snr_db = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let direct = noise * 10f64.powf(snr_db / 10.0);
            for j in 0..k_links {
                link_gain.push(if j == k { direct } else { direct * iso });
            }
        }

        let kappa = cfg.rician_k_db.map(|k| 10f64.powf(k / 10.0));
        let links = k_links * k_links;
        let mut los = Vec::with_capacity(links * Self::ENTRIES);
        let mut fixed = Vec::with_capacity(links * Self::ENTRIES * taps);
        let mut varying = Vec::with_capacity(links * Self::ENTRIES * taps);
        for k in 0..k_links {
            for j in 0..k_links {
                for _e in 0..Self::ENTRIES {
                    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    los.push(match kappa {
                        Some(kap) if j == k => Complex64::from_polar((kap / (kap + 1.0)).sqrt(), phase),
                        _ => Complex64::new(0.0, 0.0),
                    });
                    for _l in 0..taps {
                        fixed.push(complex_gaussian(&mut rng, 1.0));
                        varying.push(complex_gaussian(&mut rng, 1.0));
                    }
                }
            }
        }

        let nc = cfg.num_subcarriers;
        let mut phasors = Vec::with_capacity(nc * taps);
        for s in 0..nc {
            let f = cfg.subcarrier_frequency(s);
            for l in 0..taps {
                let tau = l as f64 * cfg.tap_spacing_s;
                phasors.push(Complex64::from_polar(1.0, -std::f64::consts::TAU * f * tau));
            }
        }

        Ok(ChannelGenerator {
            cfg,
            pdp,
            link_gain,
            los,
            fixed,
            varying,
            phasors,
            evolve_rng,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn power_delay_profile(&self) -> &[f64] {
        &self.pdp
    }

    /// Mean power of one matrix entry of link `(k, j)`.
    pub fn mean_entry_gain(&self, k: usize, j: usize) -> f64 {
        self.link_gain[k * self.cfg.num_links + j]
    }

    /// Current Gauss–Markov tap values, ordered (k, j, entry, tap).
    pub fn varying_taps(&self) -> &[Complex64] {
        &self.varying
    }

    fn last_time(&self) -> Option<f64> {
        self.history.last().map(|s| s.t)
    }

    fn advance(&mut self, dt: f64) {
        if self.cfg.doppler_hz == 0.0 || dt == 0.0 {
            return;
        }
        let rho = jakes_correlation(self.cfg.doppler_hz, dt);
        let innov = (1.0 - rho * rho).max(0.0);
        for x in self.varying.iter_mut() {
            *x = *x * rho + complex_gaussian(&mut self.evolve_rng, innov);
        }
    }

    /// Channel snapshot at time `t` (seconds).
    ///
    /// Times must be non-decreasing across calls unless the channel is
    /// static; earlier times are served from the generator's history.
    pub fn snapshot_at(&mut self, t: f64) -> Result<ChannelSnapshot> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::contract(format!("snapshot time must be finite and >= 0, got {t}")));
        }
        if let Some(snap) = self.history.iter().find(|s| s.t == t) {
            return Ok(snap.clone());
        }
        match self.last_time() {
            Some(last) if t < last => {
                if self.cfg.doppler_hz == 0.0 {
                    let mut snap = self.render();
                    snap.t = t;
                    return Ok(snap);
                }
                return Err(Error::contract(format!(
                    "time {t} precedes last generated snapshot at {last}"
                )));
            }
            Some(last) => self.advance(t - last),
            None => {}
        }
        let mut snap = self.render();
        snap.t = t;
        self.history.push(snap.clone());
        Ok(snap)
    }

    fn render(&self) -> ChannelSnapshot {
        let k_links = self.cfg.num_links;
        let nc = self.cfg.num_subcarriers;
        let taps = self.cfg.num_taps;
        let kappa = self.cfg.rician_k_db.map(|k| 10f64.powf(k / 10.0));
        let alpha_direct = self.cfg.varying_fraction;
        let alpha_cross = self.cfg.cross_varying();
        let mut h = Vec::with_capacity(k_links * k_links * nc);
        let mut taps_now = vec![Complex64::new(0.0, 0.0); taps];
        let mut per_entry = vec![vec![Complex64::new(0.0, 0.0); nc]; Self::ENTRIES];
        for k in 0..k_links {
            for j in 0..k_links {
                let link = k * k_links + j;
                let amp = self.link_gain[link].sqrt();
                let (scatter, alpha) = if j == k {
                    (kappa.map_or(1.0, |kap| 1.0 / (kap + 1.0)), alpha_direct)
                } else {
                    (1.0, alpha_cross)
                };
                let (a_fix, a_var) = ((1.0 - alpha).sqrt(), alpha.sqrt());
                for (e, resp) in per_entry.iter_mut().enumerate() {
                    let base = (link * Self::ENTRIES + e) * taps;
                    for (l, tap) in taps_now.iter_mut().enumerate() {
                        let z = self.fixed[base + l] * a_fix + self.varying[base + l] * a_var;
                        *tap = z * (self.pdp[l] * scatter).sqrt();
                    }
                    let los = self.los[link * Self::ENTRIES + e];
                    for (s, out) in resp.iter_mut().enumerate() {
                        let ph = &self.phasors[s * taps..(s + 1) * taps];
                        let sum: Complex64 = taps_now.iter().zip(ph).map(|(a, b)| a * b).sum();
                        *out = (sum + los) * amp;
                    }
                }
                for s in 0..nc {
                    h.push(CMat::from_row_slice(
                        2,
                        2,
                        &[per_entry[0][s], per_entry[1][s], per_entry[2][s], per_entry[3][s]],
                    ));
                }
            }
        }
        ChannelSnapshot {
            t: 0.0,
            num_links: k_links,
            num_subcarriers: nc,
            h,
        }
    }

    /// Snapshots at each of `times` (must be non-decreasing).
    pub fn trace(&mut self, times: &[f64]) -> Result<ChannelTrace> {
        let snapshots = times
            .iter()
            .map(|&t| self.snapshot_at(t))
            .collect::<Result<Vec<_>>>()?;
        ChannelTrace::new(self.cfg.clone(), snapshots)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub config: ScenarioConfig,
    pub snapshots: Vec<ChannelSnapshot>,
}

impl ChannelTrace {
    pub fn new(config: ScenarioConfig, snapshots: Vec<ChannelSnapshot>) -> Result<Self> {
        config.validate()?;
        for w in snapshots.windows(2) {
            if w[1].t <= w[0].t {
                return Err(Error::contract("snapshot times must be strictly increasing"));
            }
        }
        for s in &snapshots {
            if s.num_links != config.num_links || s.num_subcarriers != config.num_subcarriers {
                return Err(Error::contract("snapshot dimensions disagree with the scenario"));
            }
        }
        Ok(ChannelTrace { config, snapshots })
    }
}

pub const TRACE_FORMAT: &str = "netmimo-channel-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceFile {
    format: String,
    version: u32,
    config: ScenarioConfig,
    snapshots: Vec<SnapshotRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotRecord {
    t: f64,
    /// `[re, im]` pairs in k, j, s, row, column order.
    h: Vec<[f64; 2]>,
}

/// Writes `trace` as a versioned JSON document.
pub fn save_trace<W: Write>(trace: &ChannelTrace, sink: W) -> Result<()> {
    let file = TraceFile {
        format: TRACE_FORMAT.to_string(),
        version: TRACE_VERSION,
        config: trace.config.clone(),
        snapshots: trace
            .snapshots
            .iter()
            .map(|snap| SnapshotRecord {
                t: snap.t,
                h: snap
                    .h
                    .iter()
                    .flat_map(|m| {
                        (0..2).flat_map(move |r| (0..2).map(move |c| [m[(r, c)].re, m[(r, c)].im]))
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(sink, &file).map_err(Error::from_json)
}

pub fn load_trace<R: Read>(source: R) -> Result<ChannelTrace> {
    let file: TraceFile = serde_json::from_reader(source).map_err(Error::from_json)?;
    let at_top = |message: String| Error::Parse {
        line: 1,
        column: 1,
        message,
    };
    if file.format != TRACE_FORMAT {
        return Err(at_top(format!("unexpected format tag `{}`", file.format)));
    }
    if file.version != TRACE_VERSION {
        return Err(at_top(format!("unsupported trace version {}", file.version)));
    }
    file.config.validate()?;
    let k = file.config.num_links;
    let nc = file.config.num_subcarriers;
    let expected = k * k * nc * 4;
    let snapshots = file
        .snapshots
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            if rec.h.len() != expected {
                return Err(at_top(format!(
                    "snapshot {i}: expected {expected} entries, found {}",
                    rec.h.len()
                )));
            }
            let h = rec
                .h
                .chunks_exact(4)
                .map(|c| {
                    CMat::from_row_slice(
                        2,
                        2,
                        &[
                            Complex64::new(c[0][0], c[0][1]),
                            Complex64::new(c[1][0], c[1][1]),
                            Complex64::new(c[2][0], c[2][1]),
                            Complex64::new(c[3][0], c[3][1]),
                        ],
                    )
                })
                .collect();
            ChannelSnapshot::from_matrices(rec.t, k, nc, h)
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelTrace::new(file.config, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            rng_seed: seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn rejects_invalid_fields_by_name() {
        let bad = [
            (ScenarioConfig { num_subcarriers: 1, ..cfg(0) }, "num_subcarriers"),
            (ScenarioConfig { isolation_db: -1.0, ..cfg(0) }, "isolation_db"),
            (ScenarioConfig { rms_delay_spread_s: 0.5e-6, ..cfg(0) }, "rms_delay_spread_s"),
            (ScenarioConfig { snr_range_db: [40.0, 30.0], ..cfg(0) }, "snr_range_db"),
            (ScenarioConfig { snr_range_db: [10.0, 90.0], ..cfg(0) }, "snr_range_db"),
            (ScenarioConfig { noise_power: 0.0, ..cfg(0) }, "noise_power"),
        ];
        for (c, field) in bad {
            match ChannelGenerator::new(c) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn pdp_matches_requested_rms_spread() {
        for tau in [5e-9, 20e-9, 50e-9, 150e-9] {
            let c = ScenarioConfig { rms_delay_spread_s: tau, ..cfg(0) };
            let p = power_delay_profile(&c);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((rms_spread(&p, c.tap_spacing_s) - tau).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_doppler_freezes_channel() {
        let mut g = generate_scenario(&cfg(4)).unwrap();
        let a = g.snapshot_at(0.0).unwrap();
        let b = g.snapshot_at(1.0).unwrap();
        let c = g.snapshot_at(0.5).unwrap();
        assert_eq!(a.matrices(), b.matrices());
        assert_eq!(a.matrices(), c.matrices());
    }

    #[test]
    fn generator_is_deterministic() {
        let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(11) };
        let mut g1 = generate_scenario(&c).unwrap();
        let mut g2 = generate_scenario(&c).unwrap();
        for t in [0.0, 0.02, 0.0232] {
            assert_eq!(g1.snapshot_at(t).unwrap(), g2.snapshot_at(t).unwrap());
        }
    }

    #[test]
    fn moving_channel_refuses_to_rewind() {
        let c = ScenarioConfig { doppler_hz: 8.0, ..cfg(1) };
        let mut g = generate_scenario(&c).unwrap();
        let first = g.snapshot_at(0.0).unwrap();
        g.snapshot_at(0.02).unwrap();
        assert_eq!(g.snapshot_at(0.0).unwrap(), first);
        assert!(matches!(g.snapshot_at(0.01), Err(Error::Contract(_))));
        assert!(matches!(g.snapshot_at(-1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn aggregate_orders_columns_bs_major() {
        let mut g = generate_scenario(&cfg(2)).unwrap();
        let snap = g.snapshot_at(0.0).unwrap();
        for k in 0..3 {
            for s in [0, 17, 37] {
                let agg = aggregate_comp_channel(&snap, k, s).unwrap();
                assert_eq!(agg.shape(), (2, 6));
                for j in 0..3 {
                    for a in 0..2 {
                        assert_eq!(agg.column(2 * j + a), snap.link(k, j, s).column(a));
                    }
                }
            }
        }
        assert!(aggregate_comp_channel(&snap, 3, 0).is_err());
        assert!(aggregate_comp_channel(&snap, 0, 38).is_err());
    }

    #[test]
    fn aggregate_of_identity_links() {
        let eye = CMat::identity(2, 2);
        let snap = ChannelSnapshot::from_matrices(0.0, 3, 2, vec![eye.clone(); 18]).unwrap();
        let agg = aggregate_comp_channel(&snap, 1, 1).unwrap();
        let expected = CMat::from_fn(2, 6, |r, c| eye[(r, c % 2)]);
        assert_eq!(agg, expected);

        let mut snap = snap;
        for j in 1..3 {
            *snap.link_mut(0, j, 0) = CMat::zeros(2, 2);
        }
        let agg = aggregate_comp_channel(&snap, 0, 0).unwrap();
        assert_eq!(agg.columns(0, 2), eye);
        assert!(agg.columns(2, 4).iter().all(|x| x.norm() == 0.0));
    }
}
