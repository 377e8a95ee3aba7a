//! Per-stream MMSE combining, SINR evaluation and pilot phase tracking.

use num_complex::Complex64;

use crate::linalg::{normalized, solve_hpd, CMat, CVec};
use crate::{Error, Result};

/// Linear SINR ceiling applied to measured values (120 dB).
pub const SINR_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    pub w: CVec,
    /// Set when `R` was not positive definite and had to be loaded.
    pub regularized: bool,
}

/// MMSE combiner for stream `k`: `w ∝ R⁻¹ g_k` with `R = Σ_j g_j g_jᴴ + C`.
///
/// If `R` fails a Cholesky factorisation (or is badly conditioned), `reg·I`
/// is added and the result is flagged.
pub fn mmse_combine(g: &[CVec], k: usize, cov: &CMat, reg: f64) -> Result<Combiner> {
    if k >= g.len() {
        return Err(Error::contract(format!("stream {k} out of range")));
    }
    let n = g[k].len();
    if cov.shape() != (n, n) || g.iter().any(|x| x.len() != n) {
        return Err(Error::contract("combiner dimensions disagree"));
    }
    let mut r = cov.clone();
    for gj in g {
        r += gj * gj.adjoint();
    }
    let sv = r.singular_values();
    let well_posed = sv.min() > 1e-13 * sv.max();
    if well_posed {
        if let Ok(w) = solve_hpd(&r, &g[k]) {
            return Ok(Combiner { w: normalized(&w), regularized: false });
        }
    }
    let loaded = r + CMat::identity(n, n).scale(reg.max(f64::MIN_POSITIVE));
    let w = solve_hpd(&loaded, &g[k])?;
    Ok(Combiner { w: normalized(&w), regularized: true })
}

/// `|wᴴg_k|² / (Σ_{j≠k} |wᴴg_j|² + wᴴCw)`.
pub fn post_sinr(w: &CVec, g: &[CVec], k: usize, cov: &CMat) -> f64 {
    let sig = w.dotc(&g[k]).norm_sqr();
    let interference: f64 = g
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, gj)| w.dotc(gj).norm_sqr())
        .sum();
    let noise = w.dotc(&(cov * w)).re;
    sig / (interference + noise)
}

/// Mean of per-subcarrier SINRs in dB (geometric mean in the linear domain).
pub fn effective_sinr_db(sinr: &[f64]) -> f64 {
    if sinr.is_empty() {
        return f64::NEG_INFINITY;
    }
    sinr.iter().map(|&x| 10.0 * x.log10()).sum::<f64>() / sinr.len() as f64
}

/// Mean Shannon rate `log2(1 + SINR)` over subcarriers.
pub fn shannon_rate(sinr: &[f64]) -> f64 {
    if sinr.is_empty() {
        return 0.0;
    }
    sinr.iter().map(|&x| (1.0 + x).log2()).sum::<f64>() / sinr.len() as f64
}

/// Phase of `Σ z·conj(expected)`: the common rotation between received
/// pilots and their expected values.
pub fn common_phase(z: &[Complex64], expected: &[Complex64]) -> f64 {
    z.iter()
        .zip(expected)
        .map(|(a, b)| a * b.conj())
        .sum::<Complex64>()
        .arg()
}

/// SINR of combined samples `z` against the known symbols `x`, after a
/// least-squares complex gain fit. Capped at [`SINR_CAP`].
pub fn measured_sinr(z: &[Complex64], x: &[Complex64]) -> f64 {
    let n = z.len();
    debug_assert_eq!(n, x.len());
    let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if n < 2 || ex == 0.0 {
        return 0.0;
    }
    let a = z.iter().zip(x).map(|(zi, xi)| zi * xi.conj()).sum::<Complex64>() / ex;
    let err: f64 = z.iter().zip(x).map(|(zi, xi)| (zi - a * xi).norm_sqr()).sum();
    // one complex degree of freedom is spent on the gain fit
    let noise = err / (n - 1) as f64;
    let sig = a.norm_sqr() * ex / n as f64;
    if noise <= sig / SINR_CAP {
        SINR_CAP
    } else {
        sig / noise
    }
}
