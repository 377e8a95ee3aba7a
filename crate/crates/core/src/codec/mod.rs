//! Compressed CSI feedback in the style of 802.11ac explicit beamforming.
//!
//! Per reported subcarrier the MS decomposes its `n × m` channel, encodes
//! the right singular vectors as Givens angles and quantizes them. Stream
//! SNRs are sent as one average per stream plus per-point 1 dB deltas at
//! twice the angle reporting density.
//!
//! Payload layout (MSB first):
//! 1. angle indices, group-major, `(φ, ψ)` interleaved per Givens step;
//! 2. one average-SNR code per stream;
//! 3. delta codes, point-major, stream-minor.

mod bits;
mod givens;
mod quant;

pub use bits::{BitReader, BitWriter};
pub use givens::{angle_count, angles_to_v, decompose, v_to_angles, CsiDecomposition, GivensAngles};
pub use quant::{
    average_snr_db, dequantize_angles, dequantize_phi, dequantize_psi, dequantize_snr,
    quantize_angles, quantize_phi, quantize_psi, quantize_snr, QuantizedAngles, QuantizedSnr,
    SnrQuantization,
};

use serde::{Deserialize, Serialize};

use crate::linalg::CMat;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    /// Transmit antennas (columns of the fed-back channel).
    pub m: usize,
    /// Receive antennas (rows), equal to the number of reported streams.
    pub n: usize,
    pub b_phi: u8,
    pub b_psi: u8,
    /// Subcarrier grouping: angles are reported on every `ng`-th subcarrier.
    pub ng: usize,
    pub nc: usize,
    pub snr_avg_bits: u8,
    pub snr_avg_min_db: f64,
    pub snr_avg_step_db: f64,
    pub snr_delta_bits: u8,
    pub snr_delta_min_db: i32,
    /// Report only `floor(nc/ng)` angle groups instead of `ceil(nc/ng)`.
    #[serde(default)]
    pub four_group_compat: bool,
}

impl CodecConfig {
    /// Six BS antennas, two streams, 38 subcarriers in groups of eight, 7/9-bit angles.
    pub fn testbed() -> Self {
        CodecConfig {
            m: 6,
            n: 2,
            b_phi: 7,
            b_psi: 9,
            ng: 8,
            nc: 38,
            snr_avg_bits: 8,
            snr_avg_min_db: -10.0,
            snr_avg_step_db: 0.25,
            snr_delta_bits: 4,
            snr_delta_min_db: -8,
            four_group_compat: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!((self.b_phi, self.b_psi), (5, 7) | (7, 9)) {
            return Err(Error::config("b_phi/b_psi", "only (5,7) and (7,9) are defined"));
        }
        if self.n == 0 || self.n > self.m {
            return Err(Error::config("n", "need 1 <= n <= m"));
        }
        if self.ng == 0 {
            return Err(Error::config("ng", "must be >= 1"));
        }
        if self.nc == 0 {
            return Err(Error::config("nc", "must be >= 1"));
        }
        if self.four_group_compat && self.nc < self.ng {
            return Err(Error::config("four_group_compat", "needs nc >= ng"));
        }
        if !(1..=16).contains(&self.snr_avg_bits) || !(1..=8).contains(&self.snr_delta_bits) {
            return Err(Error::config("snr bits", "field widths out of range"));
        }
        if !(self.snr_avg_step_db > 0.0) {
            return Err(Error::config("snr_avg_step_db", "must be positive"));
        }
        Ok(())
    }

    /// Inclusive delta range in dB, e.g. `(-8, 7)` for 4 bits.
    pub fn delta_range(&self) -> (i32, i32) {
        let lo = self.snr_delta_min_db;
        (lo, lo + (1 << self.snr_delta_bits) - 1)
    }

    pub fn num_groups(&self) -> usize {
        if self.four_group_compat {
            self.nc / self.ng
        } else {
            self.nc.div_ceil(self.ng)
        }
    }

    /// Subcarriers whose V matrix is reported: `0, ng, 2ng, …`.
    pub fn anchors(&self) -> Vec<usize> {
        (0..self.num_groups()).map(|g| g * self.ng).collect()
    }

    /// SNR reporting points, spaced `max(1, ng/2)` apart.
    pub fn snr_points(&self) -> Vec<usize> {
        let step = (self.ng / 2).max(1);
        let limit = if self.four_group_compat {
            (self.num_groups() * self.ng).min(self.nc)
        } else {
            self.nc
        };
        (0..limit).step_by(step).collect()
    }

    pub fn angles_per_group(&self) -> usize {
        angle_count(self.m, self.n)
    }

    pub fn packed_bits(&self) -> usize {
        self.num_groups() * self.angles_per_group() * (usize::from(self.b_phi) + usize::from(self.b_psi))
            + self.n * usize::from(self.snr_avg_bits)
            + self.snr_points().len() * self.n * usize::from(self.snr_delta_bits)
    }
}

/// Every quantized field of one feedback report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsiFields {
    pub angles: Vec<QuantizedAngles>,
    pub snr: QuantizedSnr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedCsi {
    pub fields: CsiFields,
    pub payload: Vec<u8>,
    pub bit_count: usize,
    /// SNR values clamped by the quantizers.
    pub clamped: usize,
}

fn check_fields(fields: &CsiFields, cfg: &CodecConfig) -> Result<()> {
    let per = cfg.angles_per_group();
    let ok_angles = fields.angles.len() == cfg.num_groups()
        && fields.angles.iter().all(|g| {
            g.phi.len() == per
                && g.psi.len() == per
                && g.phi.iter().all(|&k| u32::from(k) < 1 << cfg.b_phi)
                && g.psi.iter().all(|&k| u32::from(k) < 1 << cfg.b_psi)
        });
    let ok_snr = fields.snr.avg_codes.len() == cfg.n
        && fields.snr.avg_codes.iter().all(|&c| u32::from(c) < 1 << cfg.snr_avg_bits)
        && fields.snr.delta_codes.len() == cfg.snr_points().len()
        && fields
            .snr
            .delta_codes
            .iter()
            .all(|p| p.len() == cfg.n && p.iter().all(|&d| u32::from(d) < 1 << cfg.snr_delta_bits));
    if ok_angles && ok_snr {
        Ok(())
    } else {
        Err(Error::contract("feedback fields do not match the codec configuration"))
    }
}

pub fn pack_fields(fields: &CsiFields, cfg: &CodecConfig) -> Result<(Vec<u8>, usize)> {
    cfg.validate()?;
    check_fields(fields, cfg)?;
    let mut w = BitWriter::new();
    for g in &fields.angles {
        for (&p, &q) in g.phi.iter().zip(&g.psi) {
            w.push(u32::from(p), u32::from(cfg.b_phi));
            w.push(u32::from(q), u32::from(cfg.b_psi));
        }
    }
    for &a in &fields.snr.avg_codes {
        w.push(u32::from(a), u32::from(cfg.snr_avg_bits));
    }
    for point in &fields.snr.delta_codes {
        for &d in point {
            w.push(u32::from(d), u32::from(cfg.snr_delta_bits));
        }
    }
    Ok(w.finish())
}

pub fn unpack_fields(payload: &[u8], bit_count: usize, cfg: &CodecConfig) -> Result<CsiFields> {
    cfg.validate()?;
    let expected = cfg.packed_bits();
    if bit_count != expected {
        return Err(Error::Decode(format!(
            "payload carries {bit_count} bits, configuration needs {expected}"
        )));
    }
    let mut r = BitReader::new(payload, bit_count)?;
    let per = cfg.angles_per_group();
    let mut angles = Vec::with_capacity(cfg.num_groups());
    for _ in 0..cfg.num_groups() {
        let mut phi = Vec::with_capacity(per);
        let mut psi = Vec::with_capacity(per);
        for _ in 0..per {
            phi.push(r.read(u32::from(cfg.b_phi))? as u16);
            psi.push(r.read(u32::from(cfg.b_psi))? as u16);
        }
        angles.push(QuantizedAngles { phi, psi });
    }
    let avg_codes = (0..cfg.n)
        .map(|_| r.read(u32::from(cfg.snr_avg_bits)).map(|v| v as u16))
        .collect::<Result<Vec<_>>>()?;
    let delta_codes = (0..cfg.snr_points().len())
        .map(|_| {
            (0..cfg.n)
                .map(|_| r.read(u32::from(cfg.snr_delta_bits)).map(|v| v as u8))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(r.remaining(), 0);
    Ok(CsiFields {
        angles,
        snr: QuantizedSnr {
            avg_codes,
            delta_codes,
        },
    })
}

fn snr_db(sv: f64, noise_power: f64) -> f64 {
    10.0 * ((sv * sv) / noise_power).max(1e-30).log10()
}

/// Compresses the `nc` per-subcarrier `n × m` channels of one MS.
pub fn encode_csi(channels: &[CMat], cfg: &CodecConfig, noise_power: f64) -> Result<CompressedCsi> {
    cfg.validate()?;
    if channels.len() != cfg.nc {
        return Err(Error::contract(format!(
            "expected {} subcarrier channels, got {}",
            cfg.nc,
            channels.len()
        )));
    }
    if let Some(h) = channels.iter().find(|h| h.shape() != (cfg.n, cfg.m)) {
        return Err(Error::contract(format!(
            "channel shape {:?} differs from {}x{}",
            h.shape(),
            cfg.n,
            cfg.m
        )));
    }
    if !(noise_power > 0.0) {
        return Err(Error::contract("noise power must be positive"));
    }
    let angles = cfg
        .anchors()
        .iter()
        .map(|&s| {
            let d = decompose(&channels[s])?;
            Ok(quantize_angles(&v_to_angles(&d.v)?, cfg.b_phi, cfg.b_psi))
        })
        .collect::<Result<Vec<_>>>()?;
    let snrs = cfg
        .snr_points()
        .iter()
        .map(|&s| {
            let d = decompose(&channels[s])?;
            Ok(d.s.iter().map(|&sv| snr_db(sv, noise_power)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let q = quantize_snr(&snrs, cfg);
    let fields = CsiFields {
        angles,
        snr: q.codes,
    };
    let (payload, bit_count) = pack_fields(&fields, cfg)?;
    Ok(CompressedCsi {
        fields,
        payload,
        bit_count,
        clamped: q.clamped,
    })
}

/// Feedback as reconstructed at the BS.
#[derive(Debug, Clone)]
pub struct DecodedCsi {
    pub fields: CsiFields,
    /// `(anchor subcarrier, V̂)` per reported group.
    pub groups: Vec<(usize, CMat)>,
    /// `(subcarrier, per-stream SNR dB)` per reporting point.
    pub snr_points: Vec<(usize, Vec<f64>)>,
}

impl DecodedCsi {
    /// SNRs of the reporting point at or below `s`.
    pub fn snr_at(&self, s: usize) -> &[f64] {
        let idx = self
            .snr_points
            .iter()
            .rposition(|(p, _)| *p <= s)
            .unwrap_or(0);
        &self.snr_points[idx].1
    }

    /// Channel seen by the transmitter for group `g`: `diag(√snr · σ) · V̂^H`.
    /// It equals `U^H H` up to quantization, which is all the beamformers
    /// need.
    pub fn effective_channel(&self, g: usize, noise_power: f64) -> CMat {
        let (anchor, v) = &self.groups[g];
        let snr = self.snr_at(*anchor);
        let mut h = v.adjoint();
        for (r, &db) in snr.iter().enumerate() {
            let gain = (10f64.powf(db / 10.0) * noise_power).sqrt();
            h.row_mut(r).scale_mut(gain);
        }
        h
    }
}

pub fn decode_fields(fields: CsiFields, cfg: &CodecConfig) -> Result<DecodedCsi> {
    check_fields(&fields, cfg)?;
    let groups = cfg
        .anchors()
        .into_iter()
        .zip(&fields.angles)
        .map(|(s, q)| {
            let a = dequantize_angles(q, cfg.b_phi, cfg.b_psi);
            Ok((s, angles_to_v(&a, cfg.m, cfg.n)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let snr_points = cfg
        .snr_points()
        .into_iter()
        .zip(dequantize_snr(&fields.snr, cfg))
        .collect();
    Ok(DecodedCsi {
        fields,
        groups,
        snr_points,
    })
}

pub fn decode_csi(payload: &[u8], bit_count: usize, cfg: &CodecConfig) -> Result<DecodedCsi> {
    decode_fields(unpack_fields(payload, bit_count, cfg)?, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackBitCount {
    /// Closed-form bits per subcarrier,
    /// `((2m−1)n−n²)(b_φ+b_ψ)/(2N_g) + 4/N_g + 16/N_c`.
    pub per_subcarrier: f64,
    /// `per_subcarrier · N_c`, rounded.
    pub analytic_total: usize,
    /// Length of the payload actually produced by [`encode_csi`].
    pub packed_total: usize,
}

pub fn feedback_bit_count(cfg: &CodecConfig) -> Result<FeedbackBitCount> {
    cfg.validate()?;
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    let (ng, nc) = (cfg.ng as f64, cfg.nc as f64);
    let per_matrix = ((2.0 * m - 1.0) * n - n * n) * (f64::from(cfg.b_phi) + f64::from(cfg.b_psi)) / 2.0;
    let per_subcarrier = per_matrix / ng + 4.0 / ng + 16.0 / nc;
    Ok(FeedbackBitCount {
        per_subcarrier,
        analytic_total: (per_subcarrier * nc).round() as usize,
        packed_total: cfg.packed_bits(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signaling {
    /// Full 802.11ac sounding exchange; fixed total of 0.564 ms.
    Standard,
    /// Pre-reserved slots and a 3-symbol header per MS.
    Reduced,
}

/// Timing constants of the feedback exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackTiming {
    pub standard_total_s: f64,
    pub symbol_time_s: f64,
    pub header_symbols: usize,
    /// Feedback modulation rate, bits per symbol per subcarrier.
    pub feedback_rate: f64,
    pub stations: usize,
}

impl Default for FeedbackTiming {
    fn default() -> Self {
        FeedbackTiming {
            standard_total_s: 0.564e-3,
            symbol_time_s: 3.6e-6,
            header_symbols: 3,
            feedback_rate: 2.0,
            stations: 3,
        }
    }
}

impl FeedbackTiming {
    /// OFDM symbols one MS needs to send its report.
    pub fn feedback_symbols(&self, cfg: &CodecConfig) -> Result<usize> {
        let bits = feedback_bit_count(cfg)?.analytic_total as f64;
        Ok((bits / (self.feedback_rate * cfg.nc as f64)).ceil() as usize)
    }

    pub fn feedback_time(&self, cfg: &CodecConfig, signaling: Signaling) -> Result<f64> {
        Ok(match signaling {
            Signaling::Standard => self.standard_total_s,
            Signaling::Reduced => {
                let per_ms = (self.header_symbols + self.feedback_symbols(cfg)?) as f64 * self.symbol_time_s;
                per_ms * self.stations as f64
            }
        })
    }
}

/// Fraction of airtime spent on feedback for a given update interval.
pub fn overhead_fraction(cfg: &CodecConfig, update_interval_s: f64, signaling: Signaling) -> Result<f64> {
    if !(update_interval_s > 0.0 && update_interval_s.is_finite()) {
        return Err(Error::contract("update interval must be positive"));
    }
    Ok(FeedbackTiming::default().feedback_time(cfg, signaling)? / update_interval_s)
}
