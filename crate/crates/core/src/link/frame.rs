//! Frequency-domain simulation of the training frame and the beamformed
//! frame that follows it.
//!
//! Each subframe carries `blocks` repetitions of: one training symbol per
//! stream (an orthogonal DFT cover across streams), then payload symbols.
//! Two subcarriers around the band centre carry known pilots for phase
//! tracking; the rest are used for SINR measurement.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::beamform::{expand_groups, BeamformerSet, Scheme, TOTAL_TX};
use crate::channel::{ChannelGenerator, ChannelSnapshot};
use crate::impairments::{apply_rx_impairments, apply_tx_impairments, ImpairmentProfile, SymbolGrid};
use crate::linalg::{complex_gaussian, CMat, CVec, ZERO};
use crate::link::mcs::McsTable;
use crate::link::receiver::{common_phase, effective_sinr_db, measured_sinr, mmse_combine, shannon_rate};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePlan {
    pub training_time_s: f64,
    /// Start of the first beamformed subframe.
    pub frame_start_s: f64,
    pub num_subframes: usize,
    pub subframe_stride_s: f64,
    /// Training + payload blocks per subframe.
    pub blocks: usize,
    pub payload_symbols: usize,
    /// Offset of the two pilot subcarriers from the band centre.
    pub pilot_offset: usize,
}

impl Default for FramePlan {
    fn default() -> Self {
        FramePlan {
            training_time_s: 0.0,
            frame_start_s: 20e-3,
            num_subframes: 6,
            subframe_stride_s: 0.533e-3,
            blocks: 2,
            payload_symbols: 20,
            pilot_offset: 7,
        }
    }
}

impl FramePlan {
    pub fn validate(&self, nc: usize) -> Result<()> {
        if self.num_subframes == 0 {
            return Err(Error::config("num_subframes", "must be at least 1"));
        }
        if !(self.frame_start_s > self.training_time_s && self.training_time_s >= 0.0) {
            return Err(Error::config("frame_start_s", "must follow the training frame"));
        }
        if !(self.subframe_stride_s > 0.0) {
            return Err(Error::config("subframe_stride_s", "must be positive"));
        }
        if self.blocks == 0 || self.payload_symbols < 2 {
            return Err(Error::config("payload_symbols", "need >= 1 block and >= 2 payload symbols"));
        }
        let p = self.pilot_subcarriers(nc);
        if self.pilot_offset == 0 || p[1] >= nc || nc / 2 < self.pilot_offset {
            return Err(Error::config("pilot_offset", "pilots must fall inside the band"));
        }
        Ok(())
    }

    pub fn subframe_times(&self) -> Vec<f64> {
        (0..self.num_subframes)
            .map(|i| self.frame_start_s + i as f64 * self.subframe_stride_s)
            .collect()
    }

    /// Centre ± offset; for 38 subcarriers and offset 7 these are 12 and 26.
    pub fn pilot_subcarriers(&self, nc: usize) -> [usize; 2] {
        let c = nc / 2;
        [c.saturating_sub(self.pilot_offset), c + self.pilot_offset]
    }

    pub fn data_subcarriers(&self, nc: usize) -> Vec<usize> {
        let p = self.pilot_subcarriers(nc);
        (0..nc).filter(|s| !p.contains(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkOptions {
    /// Nominal thermal noise power, known to every node.
    pub noise_power: f64,
    /// When false, no thermal noise is added (impairments still apply).
    pub thermal_noise: bool,
    pub mcs: McsTable,
}

impl LinkOptions {
    pub fn new(noise_power: f64) -> Self {
        LinkOptions {
            noise_power,
            thermal_noise: true,
            mcs: McsTable::default_table(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    /// Time slot (non-zero only for time-shared schemes).
    pub slot: usize,
    pub owner: usize,
    pub mcs: Option<usize>,
    pub rate: f64,
    pub effective_sinr_db: f64,
    pub shannon: f64,
    /// Measured post-combining SINR per data subcarrier, dB.
    pub sinr_db: Vec<f64>,
    pub regularized: bool,
}

impl StreamResult {
    pub fn outage(&self) -> bool {
        self.mcs.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubframeResult {
    pub index: usize,
    pub time_s: f64,
    pub streams: Vec<StreamResult>,
    /// Sum of selected rates, averaged over time slots.
    pub sum_rate: f64,
    /// Sum of Shannon rates, averaged over time slots.
    pub sum_shannon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub scheme: Scheme,
    pub subframes: Vec<SubframeResult>,
}

impl ThroughputReport {
    pub fn mean_rate(&self) -> f64 {
        mean(self.subframes.iter().map(|s| s.sum_rate))
    }

    pub fn mean_shannon(&self) -> f64 {
        mean(self.subframes.iter().map(|s| s.sum_shannon))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = it.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Channels at every subframe time of `plan`.
pub fn fetch_frame_channels(gen: &mut ChannelGenerator, plan: &FramePlan) -> Result<Vec<ChannelSnapshot>> {
    plan.subframe_times().into_iter().map(|t| gen.snapshot_at(t)).collect()
}

/// Aggregate 2×6 channels `[ms][subcarrier]` of a snapshot.
pub fn aggregate_all(snap: &ChannelSnapshot) -> Vec<Vec<CMat>> {
    (0..snap.num_links())
        .map(|k| {
            (0..snap.num_subcarriers())
                .map(|s| snap.aggregate(k, s).expect("indices in range"))
                .collect()
        })
        .collect()
}

/// Passes a transmit grid through TX impairments, the channel, thermal
/// noise and RX impairments. The returned grid has one chain per receive
/// antenna (`2k + r`).
fn propagate<R: Rng + ?Sized>(
    mut tx: SymbolGrid,
    h: &[Vec<CMat>],
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
    rng: &mut R,
) -> SymbolGrid {
    apply_tx_impairments(&mut tx, profile, rng);
    let (symbols, nc) = (tx.symbols(), tx.subcarriers());
    let mut rx = SymbolGrid::zeros(2 * h.len(), symbols, nc);
    for (k, hk) in h.iter().enumerate() {
        for t in 0..symbols {
            for (s, hks) in hk.iter().enumerate() {
                for r in 0..2 {
                    let mut acc = ZERO;
                    for c in 0..TOTAL_TX {
                        acc += hks[(r, c)] * tx.get(c, t, s);
                    }
                    if opts.thermal_noise {
                        acc += complex_gaussian(rng, opts.noise_power);
                    }
                    rx.set(2 * k + r, t, s, acc);
                }
            }
        }
    }
    apply_rx_impairments(&mut rx, profile, rng);
    rx
}

/// Channel estimates `[ms][subcarrier]` (2×6) from one training symbol per
/// transmit antenna, each antenna sending a unit value on every subcarrier.
pub fn capture_csi<R: Rng + ?Sized>(
    snap: &ChannelSnapshot,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
    rng: &mut R,
) -> Vec<Vec<CMat>> {
    let nc = snap.num_subcarriers();
    let mut tx = SymbolGrid::zeros(TOTAL_TX, TOTAL_TX, nc);
    for c in 0..TOTAL_TX {
        tx.symbol_mut(c, c).fill(Complex64::new(1.0, 0.0));
    }
    let h = aggregate_all(snap);
    let rx = propagate(tx, &h, profile, opts, rng);
    (0..h.len())
        .map(|k| {
            (0..nc)
                .map(|s| CMat::from_fn(2, TOTAL_TX, |r, c| rx.get(2 * k + r, c, s)))
                .collect()
        })
        .collect()
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(
        if rng.random::<bool>() { a } else { -a },
        if rng.random::<bool>() { a } else { -a },
    )
}

/// Simulates one subframe of a single time slot.
fn simulate_subframe(
    precoders: &[CMat],
    owners: &[usize],
    snap: &ChannelSnapshot,
    plan: &FramePlan,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
    seed: u64,
) -> Result<Vec<StreamResult>> {
    let nc = snap.num_subcarriers();
    let streams = owners.len();
    let per_block = streams + plan.payload_symbols;
    let symbols = plan.blocks * per_block;
    let cover = |i: usize, t: usize| {
        Complex64::from_polar(1.0, -std::f64::consts::TAU * (i * t) as f64 / streams as f64)
    };

    // stream symbols [stream][symbol][subcarrier]
    let mut data_rng = seed::rng(seed, &[seed::label("payload")]);
    let mut sym = vec![vec![vec![ZERO; nc]; symbols]; streams];
    for (i, si) in sym.iter_mut().enumerate() {
        for (t, row) in si.iter_mut().enumerate() {
            let local = t % per_block;
            for v in row.iter_mut() {
                *v = if local < streams { cover(i, local) } else { qpsk(&mut data_rng) };
            }
        }
    }

    let mut tx = SymbolGrid::zeros(TOTAL_TX, symbols, nc);
    for t in 0..symbols {
        for (s, p) in precoders.iter().enumerate() {
            for c in 0..TOTAL_TX {
                let v: Complex64 = (0..streams).map(|i| p[(c, i)] * sym[i][t][s]).sum();
                tx.set(c, t, s, v);
            }
        }
    }
    let mut noise_rng = seed::rng(seed, &[seed::label("noise")]);
    let rx = propagate(tx, &aggregate_all(snap), profile, opts, &mut noise_rng);

    let pilots = plan.pilot_subcarriers(nc);
    let data = plan.data_subcarriers(nc);
    let sigma2 = opts.noise_power;
    let y = |k: usize, t: usize, s: usize| {
        CVec::from_vec(vec![rx.get(2 * k, t, s), rx.get(2 * k + 1, t, s)])
    };

    let mut out = Vec::with_capacity(streams);
    let mut cache: Vec<Option<(Vec<Vec<CVec>>, Vec<CMat>)>> = vec![None; 3];
    for (i, &k) in owners.iter().enumerate() {
        if cache[k].is_none() {
            cache[k] = Some(estimate_streams(&y, k, streams, nc, plan, sigma2, &cover));
        }
        let (g, cov) = cache[k].as_ref().unwrap();

        let mut regularized = false;
        let mut w = Vec::with_capacity(nc);
        for s in 0..nc {
            let c = mmse_combine(&g[s], i, &cov[s], sigma2)?;
            regularized |= c.regularized;
            w.push(c.w);
        }
        // combined payload samples [payload symbol][subcarrier]
        let payload: Vec<usize> = (0..symbols).filter(|t| t % per_block >= streams).collect();
        let mut z: Vec<Vec<Complex64>> = payload
            .iter()
            .map(|&t| (0..nc).map(|s| w[s].dotc(&y(k, t, s))).collect())
            .collect();
        for (zt, &t) in z.iter_mut().zip(&payload) {
            let got: Vec<Complex64> = pilots.iter().map(|&s| zt[s]).collect();
            let want: Vec<Complex64> = pilots
                .iter()
                .map(|&s| w[s].dotc(&g[s][i]) * sym[i][t][s])
                .collect();
            let rot = Complex64::from_polar(1.0, -common_phase(&got, &want));
            zt.iter_mut().for_each(|v| *v *= rot);
        }
        let sinr: Vec<f64> = data
            .iter()
            .map(|&s| {
                let zs: Vec<Complex64> = z.iter().map(|zt| zt[s]).collect();
                let xs: Vec<Complex64> = payload.iter().map(|&t| sym[i][t][s]).collect();
                measured_sinr(&zs, &xs)
            })
            .collect();
        let eff = effective_sinr_db(&sinr);
        let mcs = opts.mcs.select(eff);
        out.push(StreamResult {
            slot: 0,
            owner: k,
            mcs,
            rate: opts.mcs.rate(mcs),
            effective_sinr_db: eff,
            shannon: shannon_rate(&sinr),
            sinr_db: sinr.iter().map(|x| 10.0 * x.log10()).collect(),
            regularized,
        });
    }
    Ok(out)
}

/// Per-subcarrier stream channel estimates at MS `k` and the covariance of
/// everything the training fit does not explain, from the spread of the
/// per-block estimates (smoothed over ±2 subcarriers) plus `σ²I`.
fn estimate_streams(
    y: &dyn Fn(usize, usize, usize) -> CVec,
    k: usize,
    streams: usize,
    nc: usize,
    plan: &FramePlan,
    sigma2: f64,
    cover: &dyn Fn(usize, usize) -> Complex64,
) -> (Vec<Vec<CVec>>, Vec<CMat>) {
    let per_block = streams + plan.payload_symbols;
    let blocks = plan.blocks;
    let mut g = Vec::with_capacity(nc);
    let mut spread = Vec::with_capacity(nc);
    for s in 0..nc {
        let per: Vec<Vec<CVec>> = (0..blocks)
            .map(|b| {
                (0..streams)
                    .map(|j| {
                        let mut acc = CVec::zeros(2);
                        for t in 0..streams {
                            acc += y(k, b * per_block + t, s) * cover(j, t).conj();
                        }
                        acc.unscale(streams as f64)
                    })
                    .collect()
            })
            .collect();
        let avg: Vec<CVec> = (0..streams)
            .map(|j| per.iter().map(|p| &p[j]).sum::<CVec>().unscale(blocks as f64))
            .collect();
        let mut c = CMat::zeros(2, 2);
        if blocks > 1 {
            for p in &per {
                for (pj, aj) in p.iter().zip(&avg) {
                    let d = pj - aj;
                    c += &d * d.adjoint();
                }
            }
            c.unscale_mut((blocks - 1) as f64);
        }
        g.push(avg);
        spread.push(c);
    }
    let cov = (0..nc)
        .map(|s| {
            let lo = s.saturating_sub(2);
            let hi = (s + 2).min(nc - 1);
            let mut c = CMat::identity(2, 2).scale(sigma2);
            let n = (hi - lo + 1) as f64;
            for x in &spread[lo..=hi] {
                c += x.unscale(n);
            }
            c
        })
        .collect();
    (g, cov)
}

/// Simulates the beamformed frame for one scheme. `slots` holds one
/// beamformer set per time slot (three for TDMA-MIMO, one otherwise); the
/// reported sum rate is the mean over slots.
pub fn simulate_frame(
    slots: &[BeamformerSet],
    ng: usize,
    channels: &[ChannelSnapshot],
    plan: &FramePlan,
    profile: &ImpairmentProfile,
    opts: &LinkOptions,
    seed: u64,
) -> Result<ThroughputReport> {
    let scheme = slots
        .first()
        .ok_or_else(|| Error::contract("at least one slot is required"))?
        .scheme;
    if slots.iter().any(|s| s.scheme != scheme) {
        return Err(Error::contract("all slots must belong to one scheme"));
    }
    if channels.len() != plan.num_subframes {
        return Err(Error::contract(format!(
            "{} channel snapshots for {} subframes",
            channels.len(),
            plan.num_subframes
        )));
    }
    let nc = channels[0].num_subcarriers();
    plan.validate(nc)?;
    profile.validate()?;
    let expanded = slots
        .iter()
        .map(|set| {
            if set.scheme.is_reference() {
                Ok(vec![set.precoders[0].clone(); nc])
            } else {
                expand_groups(set, nc, ng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let times = plan.subframe_times();
    let mut subframes = Vec::with_capacity(channels.len());
    for (f, snap) in channels.iter().enumerate() {
        if snap.num_subcarriers() != nc || snap.num_links() != 3 {
            return Err(Error::contract("snapshot dimensions disagree"));
        }
        let mut streams = Vec::new();
        for (slot, (set, pre)) in slots.iter().zip(&expanded).enumerate() {
            let sub_seed = seed::derive(seed, &[f as u64, slot as u64]);
            let mut r = simulate_subframe(pre, &set.stream_owner, snap, plan, profile, opts, sub_seed)?;
            r.iter_mut().for_each(|x| x.slot = slot);
            streams.extend(r);
        }
        let n = slots.len() as f64;
        subframes.push(SubframeResult {
            index: f,
            time_s: times[f],
            sum_rate: streams.iter().map(|s| s.rate).sum::<f64>() / n,
            sum_shannon: streams.iter().map(|s| s.shannon).sum::<f64>() / n,
            streams,
        });
    }
    Ok(ThroughputReport { scheme, subframes })
}
