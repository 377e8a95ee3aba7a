//! Modulation and coding table with SINR thresholds derived from
//! modulation-constrained capacity plus an implementation gap.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    pub fn bits(self) -> u32 {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
        }
    }

    /// Capacity in bits per complex symbol of the square QAM constellation
    /// with uniform inputs at linear SNR `snr` (unit symbol energy).
    pub fn capacity(self, snr: f64) -> f64 {
        let pam = 1usize << (self.bits() / 2);
        // each real dimension carries half the symbol energy and half the noise
        2.0 * pam_capacity(pam, 0.5, 0.5 / snr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub modulation: Modulation,
    pub code_rate: f64,
    /// Information bits per symbol per subcarrier.
    pub rate: f64,
    pub sinr_threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
    /// Gap added to the constrained-capacity SINR of every entry.
    pub gap_db: f64,
    /// Frame error rate the gap stands in for.
    pub target_fer: f64,
    pub method: String,
}

/// Rates 1 to 6 bit/symbol/subcarrier spread over QPSK..256-QAM with code
/// rates between 1/2 and 3/4.
pub fn default_skeleton() -> Vec<(Modulation, f64)> {
    use Modulation::*;
    vec![
        (Qpsk, 1.0 / 2.0),
        (Qpsk, 3.0 / 4.0),
        (Qam16, 1.0 / 2.0),
        (Qam16, 9.0 / 16.0),
        (Qam16, 5.0 / 8.0),
        (Qam64, 1.0 / 2.0),
        (Qam64, 7.0 / 12.0),
        (Qam64, 2.0 / 3.0),
        (Qam64, 3.0 / 4.0),
        (Qam256, 3.0 / 4.0),
    ]
}

pub const DEFAULT_GAP_DB: f64 = 3.0;
pub const DEFAULT_TARGET_FER: f64 = 1e-2;

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx`, computed with
/// the Golub–Welsch eigenvalue method.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mu0 = std::f64::consts::PI.sqrt();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

const QUADRATURE_POINTS: usize = 64;

/// Mutual information of uniform `m`-PAM with energy `energy` over real
/// Gaussian noise of variance `noise_var`, in bits per real symbol.
pub fn pam_capacity(m: usize, energy: f64, noise_var: f64) -> f64 {
    // points ±1, ±3, … scaled to the requested energy
    let scale = (3.0 * energy / ((m * m - 1) as f64)).sqrt();
    let points: Vec<f64> = (0..m).map(|i| (2.0 * i as f64 + 1.0 - m as f64) * scale).collect();
    let nodes = gauss_hermite(QUADRATURE_POINTS);
    let sd = (2.0 * noise_var).sqrt();
    let mut loss = 0.0;
    for &xi in &points {
        for &(t, w) in &nodes {
            let n = sd * t;
            // log Σ_j exp(−((xi − xj + n)² − n²) / 2σ²), computed stably
            let exps: Vec<f64> = points
                .iter()
                .map(|&xj| -((xi - xj + n).powi(2) - n * n) / (2.0 * noise_var))
                .collect();
            let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = top + exps.iter().map(|e| (e - top).exp()).sum::<f64>().ln();
            loss += w / std::f64::consts::PI.sqrt() * lse;
        }
    }
    ((m as f64).ln() - loss / m as f64).max(0.0) / std::f64::consts::LN_2
}

/// SNR in dB at which `modulation` reaches `bits` of constrained capacity.
pub fn capacity_inverse_db(modulation: Modulation, bits: f64) -> Result<f64> {
    if !(bits > 0.0 && bits < modulation.bits() as f64) {
        return Err(Error::Calibration(format!(
            "{bits} bits is outside the capacity range of {modulation:?}"
        )));
    }
    let f = |db: f64| modulation.capacity(10f64.powf(db / 10.0)) - bits;
    let (mut lo, mut hi) = (-30.0, 80.0);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return Err(Error::Calibration("capacity target not bracketed".into()));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Thresholds from inverting the constrained capacity at each entry's rate
/// and adding `gap_db`.
pub fn calibrate_mcs_thresholds(
    skeleton: &[(Modulation, f64)],
    gap_db: f64,
    target_fer: f64,
) -> Result<McsTable> {
    if skeleton.is_empty() {
        return Err(Error::Calibration("empty MCS skeleton".into()));
    }
    let mut entries = Vec::with_capacity(skeleton.len());
    for &(modulation, code_rate) in skeleton {
        let rate = modulation.bits() as f64 * code_rate;
        let thr = capacity_inverse_db(modulation, rate)? + gap_db;
        entries.push(McsEntry {
            modulation,
            code_rate,
            rate,
            sinr_threshold_db: thr,
        });
    }
    for w in entries.windows(2) {
        if !(w[1].rate > w[0].rate) || !(w[1].sinr_threshold_db > w[0].sinr_threshold_db) {
            return Err(Error::Calibration(format!(
                "non-monotone table at rate {} -> {}",
                w[0].rate, w[1].rate
            )));
        }
    }
    Ok(McsTable {
        entries,
        gap_db,
        target_fer,
        method: format!(
            "constrained-capacity inverse (Gauss-Hermite, {QUADRATURE_POINTS} nodes) + {gap_db} dB gap"
        ),
    })
}

impl McsTable {
    pub fn default_table() -> Self {
        calibrate_mcs_thresholds(&default_skeleton(), DEFAULT_GAP_DB, DEFAULT_TARGET_FER)
            .expect("default skeleton calibrates")
    }

    /// Index of the highest entry whose threshold does not exceed `sinr_db`.
    pub fn select(&self, sinr_db: f64) -> Option<usize> {
        self.entries
            .iter()
            .rposition(|e| e.sinr_threshold_db <= sinr_db)
    }

    pub fn rate(&self, index: Option<usize>) -> f64 {
        index.map_or(0.0, |i| self.entries[i].rate)
    }

    pub fn max_rate(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.rate)
    }
}

/// Rate of the highest MCS whose threshold is at or below `sinr_db`; 0 if none.
pub fn select_mcs(sinr_db: f64, table: &McsTable) -> (Option<usize>, f64) {
    let i = table.select(sinr_db);
    (i, table.rate(i))
}
