//! Angle and SNR quantizers of the compressed feedback.
//!
//! φ uses `2^b_φ` midpoints over `[0, 2π)`, ψ uses `2^b_ψ` midpoints over
//! `[0, π/2]`. Quantization picks the nearest grid point, ties going to the
//! smaller index.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::givens::GivensAngles;
use super::CodecConfig;

fn nearest_midpoint(x: f64, cell: f64, levels: u32) -> u16 {
    let k = (x / cell).ceil() - 1.0;
    k.clamp(0.0, f64::from(levels - 1)) as u16
}

pub fn quantize_phi(phi: f64, bits: u8) -> u16 {
    let levels = 1u32 << bits;
    nearest_midpoint(phi.rem_euclid(TAU), TAU / f64::from(levels), levels)
}

/// `k·π/2^(b−1) + π/2^b`
pub fn dequantize_phi(index: u16, bits: u8) -> f64 {
    f64::from(index) * PI / f64::from(1u32 << (bits - 1)) + PI / f64::from(1u32 << bits)
}

pub fn quantize_psi(psi: f64, bits: u8) -> u16 {
    let levels = 1u32 << bits;
    nearest_midpoint(psi.clamp(0.0, FRAC_PI_2), FRAC_PI_2 / f64::from(levels), levels)
}

/// `k·π/2^(b+1) + π/2^(b+2)`
pub fn dequantize_psi(index: u16, bits: u8) -> f64 {
    f64::from(index) * PI / f64::from(1u32 << (bits + 1)) + PI / f64::from(1u32 << (bits + 2))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedAngles {
    pub phi: Vec<u16>,
    pub psi: Vec<u16>,
}

pub fn quantize_angles(angles: &GivensAngles, b_phi: u8, b_psi: u8) -> QuantizedAngles {
    QuantizedAngles {
        phi: angles.phi.iter().map(|&a| quantize_phi(a, b_phi)).collect(),
        psi: angles.psi.iter().map(|&a| quantize_psi(a, b_psi)).collect(),
    }
}

pub fn dequantize_angles(q: &QuantizedAngles, b_phi: u8, b_psi: u8) -> GivensAngles {
    GivensAngles {
        phi: q.phi.iter().map(|&k| dequantize_phi(k, b_phi)).collect(),
        psi: q.psi.iter().map(|&k| dequantize_psi(k, b_psi)).collect(),
    }
}

/// Two-stage SNR report: one average code per stream plus a delta code per
/// reporting point and stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedSnr {
    pub avg_codes: Vec<u16>,
    /// `[point][stream]`
    pub delta_codes: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrQuantization {
    pub codes: QuantizedSnr,
    /// Number of values that fell outside a quantizer range and were clamped.
    pub clamped: usize,
}

/// Quantizes `snr_db[point][stream]`.
///
/// Deltas are taken against the *dequantized* average so the receiver can
/// reconstruct them, rounded half away from zero, then clamped.
pub fn quantize_snr(snr_db: &[Vec<f64>], cfg: &CodecConfig) -> SnrQuantization {
    let streams = cfg.n;
    let mut clamped = 0;
    let max_avg = (1u32 << cfg.snr_avg_bits) - 1;
    let avg_codes: Vec<u16> = (0..streams)
        .map(|i| {
            let mean = if snr_db.is_empty() {
                cfg.snr_avg_min_db
            } else {
                snr_db.iter().map(|p| p[i]).sum::<f64>() / snr_db.len() as f64
            };
            let raw = ((mean - cfg.snr_avg_min_db) / cfg.snr_avg_step_db).round();
            if !(0.0..=f64::from(max_avg)).contains(&raw) {
                clamped += 1;
            }
            raw.clamp(0.0, f64::from(max_avg)) as u16
        })
        .collect();
    let avg_hat: Vec<f64> = avg_codes.iter().map(|&c| avg_value(c, cfg)).collect();
    let (lo, hi) = cfg.delta_range();
    let delta_codes = snr_db
        .iter()
        .map(|point| {
            point
                .iter()
                .zip(&avg_hat)
                .map(|(&snr, &avg)| {
                    let d = (snr - avg).round();
                    if d < f64::from(lo) || d > f64::from(hi) {
                        clamped += 1;
                    }
                    (d.clamp(f64::from(lo), f64::from(hi)) as i32 - lo) as u8
                })
                .collect()
        })
        .collect();
    SnrQuantization {
        codes: QuantizedSnr {
            avg_codes,
            delta_codes,
        },
        clamped,
    }
}

fn avg_value(code: u16, cfg: &CodecConfig) -> f64 {
    cfg.snr_avg_min_db + f64::from(code) * cfg.snr_avg_step_db
}

/// Reconstructed SNRs in dB, `[point][stream]`.
pub fn dequantize_snr(q: &QuantizedSnr, cfg: &CodecConfig) -> Vec<Vec<f64>> {
    let (lo, _) = cfg.delta_range();
    q.delta_codes
        .iter()
        .map(|point| {
            point
                .iter()
                .zip(&q.avg_codes)
                .map(|(&d, &a)| avg_value(a, cfg) + f64::from(i32::from(d) + lo))
                .collect()
        })
        .collect()
}

/// Dequantized per-stream averages in dB.
pub fn average_snr_db(q: &QuantizedSnr, cfg: &CodecConfig) -> Vec<f64> {
    q.avg_codes.iter().map(|&c| avg_value(c, cfg)).collect()
}
