//! Transmit beamformers for interference alignment, CoMP joint
//! transmission and the non-beamformed reference schemes.
//!
//! Every scheme is reduced to a per-subcarrier precoding matrix of size
//! `6 × S` mapping `S` unit-power streams onto the six BS antennas (BS `j`
//! owns rows `2j` and `2j+1`), together with the MS that decodes each
//! stream.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    canonical_phase, condition_number, dominant_eigvec_hermitian, eig2, inverse, normalized,
    solve_hpd, CMat, CVec, ONE, ZERO,
};
use crate::{Error, Result};

pub const NUM_LINKS: usize = 3;
pub const NUM_ANTENNAS: usize = 2;
pub const TOTAL_TX: usize = NUM_LINKS * NUM_ANTENNAS;
/// Max-SINR refinement iterations used by the simulator.
pub const DEFAULT_ITERATIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ia,
    Comp,
    TdmaMimo,
    FrSimo,
    FrMimo,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Ia,
        Scheme::Comp,
        Scheme::TdmaMimo,
        Scheme::FrSimo,
        Scheme::FrMimo,
    ];
    pub const REFERENCES: [Scheme; 3] = [Scheme::TdmaMimo, Scheme::FrSimo, Scheme::FrMimo];

    pub fn is_reference(self) -> bool {
        !matches!(self, Scheme::Ia | Scheme::Comp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ia => "ia",
            Scheme::Comp => "comp",
            Scheme::TdmaMimo => "tdma-mimo",
            Scheme::FrSimo => "fr-simo",
            Scheme::FrMimo => "fr-mimo",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{s}`")))
    }
}

/// `K × K` grid of link matrices; entry `(k, j)` maps transmitter `j`'s
/// precoder onto receiver `k`'s antennas.
#[derive(Debug, Clone)]
pub struct LinkMatrices {
    k: usize,
    mats: Vec<CMat>,
}

impl LinkMatrices {
    pub fn new(k: usize, mats: Vec<CMat>) -> Result<Self> {
        if mats.len() != k * k {
            return Err(Error::contract(format!("expected {} link matrices", k * k)));
        }
        Ok(LinkMatrices { k, mats })
    }

    /// Per-pair 2×2 matrices taken from each MS's aggregate 2×6 channel.
    pub fn interference_channel(aggregate: &[CMat]) -> Result<Self> {
        check_aggregate(aggregate)?;
        let mats = aggregate
            .iter()
            .flat_map(|h| (0..NUM_LINKS).map(move |j| h.columns(2 * j, 2).into_owned()))
            .collect();
        Self::new(NUM_LINKS, mats)
    }

    /// CoMP view: every transmitter reaches MS `k` through the same 2×6 matrix.
    pub fn broadcast_channel(aggregate: &[CMat]) -> Result<Self> {
        check_aggregate(aggregate)?;
        let mats = aggregate
            .iter()
            .flat_map(|h| std::iter::repeat_n(h.clone(), NUM_LINKS))
            .collect();
        Self::new(NUM_LINKS, mats)
    }

    pub fn users(&self) -> usize {
        self.k
    }

    pub fn get(&self, k: usize, j: usize) -> &CMat {
        &self.mats[k * self.k + j]
    }

    pub fn get_mut(&mut self, k: usize, j: usize) -> &mut CMat {
        &mut self.mats[k * self.k + j]
    }
}

fn check_aggregate(aggregate: &[CMat]) -> Result<()> {
    if aggregate.len() != NUM_LINKS || aggregate.iter().any(|h| h.shape() != (2, TOTAL_TX)) {
        return Err(Error::contract("expected three 2x6 aggregate channels"));
    }
    Ok(())
}

/// Closed-form three-user alignment for 2×2 links.
///
/// `v₁` is the dominant eigenvector of `H₃₁⁻¹H₃₂H₁₂⁻¹H₁₃H₂₃⁻¹H₂₁`,
/// `v₂ ∝ H₃₂⁻¹H₃₁v₁` and `v₃ ∝ H₂₃⁻¹H₂₁v₁`.
pub fn ia_closed_form(h: &LinkMatrices) -> Result<Vec<CVec>> {
    if h.users() != 3 || h.mats.iter().any(|m| m.shape() != (2, 2)) {
        return Err(Error::contract("closed-form IA needs a 3-user 2x2 interference channel"));
    }
    for k in 0..3 {
        for j in 0..3 {
            if j != k {
                let c = condition_number(h.get(k, j));
                if !(c < 1e10) {
                    return Err(Error::Degenerate(format!(
                        "cross link ({k},{j}) has condition number {c:e}"
                    )));
                }
            }
        }
    }
    let inv = |k: usize, j: usize| inverse(h.get(k, j));
    let e = inv(2, 0)? * h.get(2, 1) * inv(0, 1)? * h.get(0, 2) * inv(1, 2)? * h.get(1, 0);
    let [(_, v1), _] = eig2(&e);
    let v2 = canonical_phase(&normalized(&(inv(2, 1)? * h.get(2, 0) * &v1)));
    let v3 = canonical_phase(&normalized(&(inv(1, 2)? * h.get(1, 0) * &v1)));
    Ok(vec![v1, v2, v3])
}

/// Per-user SINR `|u_kᴴH_kk v_k|² / (Σ_{j≠k}|u_kᴴH_kj v_j|² + σ²‖u_k‖²)`.
pub fn sinr(h: &LinkMatrices, u: &[CVec], v: &[CVec], k: usize, sigma2: f64) -> f64 {
    let sig = u[k].dotc(&(h.get(k, k) * &v[k])).norm_sqr();
    let interference: f64 = (0..h.users())
        .filter(|&j| j != k)
        .map(|j| u[k].dotc(&(h.get(k, j) * &v[j])).norm_sqr())
        .sum();
    sig / (interference + sigma2 * u[k].norm_squared())
}

/// Interference power leaking into every receiver, `Σ_k Σ_{j≠k} |u_kᴴH_kj v_j|²`.
pub fn total_leakage(h: &LinkMatrices, u: &[CVec], v: &[CVec]) -> f64 {
    let k = h.users();
    (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| u[a].dotc(&(h.get(a, b) * &v[b])).norm_sqr())
        .sum()
}

/// Receive-side max-SINR update: `u_k ∝ B_k⁻¹ H_kk v_k`.
pub fn receive_update(h: &LinkMatrices, v: &[CVec], sigma2: f64) -> Result<Vec<CVec>> {
    (0..h.users())
        .map(|k| {
            let rows = h.get(k, k).nrows();
            let mut b = CMat::identity(rows, rows).scale(sigma2);
            for j in (0..h.users()).filter(|&j| j != k) {
                let x = h.get(k, j) * &v[j];
                b += &x * x.adjoint();
            }
            let u = solve_hpd(&b, &(h.get(k, k) * &v[k]))?;
            Ok(normalized(&u))
        })
        .collect()
}

fn transmit_update(h: &LinkMatrices, u: &[CVec], sigma2: f64) -> Result<Vec<CVec>> {
    (0..h.users())
        .map(|k| {
            let cols = h.get(k, k).ncols();
            let mut b = CMat::identity(cols, cols).scale(sigma2);
            for j in (0..h.users()).filter(|&j| j != k) {
                let x = h.get(j, k).adjoint() * &u[j];
                b += &x * x.adjoint();
            }
            let v = solve_hpd(&b, &(h.get(k, k).adjoint() * &u[k]))?;
            Ok(normalized(&v))
        })
        .collect()
}

/// Alternating max-SINR refinement.
///
/// Each iteration updates the receive vectors on the forward link and then
/// the transmit vectors on the reciprocal link (same `σ²`). A final forward
/// update makes the returned `U` optimal for the returned `V`.
pub fn max_sinr_refine(
    h: &LinkMatrices,
    v_init: &[CVec],
    sigma2: f64,
    iterations: usize,
) -> Result<(Vec<CVec>, Vec<CVec>)> {
    if !(sigma2 > 0.0) {
        return Err(Error::contract("max-SINR needs a positive noise power"));
    }
    if v_init.len() != h.users() {
        return Err(Error::contract("one initial precoder per user is required"));
    }
    for (k, v) in v_init.iter().enumerate() {
        if v.len() != h.get(k, k).ncols() || (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("initial precoder {k} must be a unit vector")));
        }
    }
    let mut v = v_init.to_vec();
    for _ in 0..iterations {
        let u = receive_update(h, &v, sigma2)?;
        v = transmit_update(h, &u, sigma2)?;
    }
    let u = receive_update(h, &v, sigma2)?;
    Ok((u, v))
}

/// Zero-forcing start for CoMP: pseudo-inverse of the users' eigen-mode rows.
pub fn comp_init_pinv(aggregate: &[CMat]) -> Result<Vec<CVec>> {
    if aggregate.is_empty() || aggregate.iter().any(|h| h.nrows() == 0 || h.ncols() != aggregate[0].ncols()) {
        return Err(Error::contract("expected equally sized user channels"));
    }
    let k = aggregate.len();
    let m = aggregate[0].ncols();
    let mut g = CMat::zeros(k, m);
    for (i, h) in aggregate.iter().enumerate() {
        if h.norm() == 0.0 {
            return Err(Error::Degenerate(format!("user {i} has an all-zero channel")));
        }
        let (_, w) = dominant_eigvec_hermitian(&(h * h.adjoint()));
        g.set_row(i, &(w.adjoint() * h));
    }
    let sv = g.singular_values();
    if sv.min() < 1e-10 * sv.max() {
        return Err(Error::Degenerate("eigen-mode rows are linearly dependent".into()));
    }
    let gram = &g * g.adjoint();
    let pinv = g.adjoint() * inverse(&gram)?;
    Ok((0..k).map(|i| normalized(&pinv.column(i).into_owned())).collect())
}

/// Precoders of one subcarrier group and the streams they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub scheme: Scheme,
    /// First subcarrier of each group.
    pub anchors: Vec<usize>,
    /// Per group, a `6 × S` matrix with unit-norm columns.
    pub precoders: Vec<CMat>,
    /// Per group and stream, the receive vector used during design (may be empty).
    pub receivers: Vec<Vec<CVec>>,
    /// MS decoding each stream.
    pub stream_owner: Vec<usize>,
}

impl BeamformerSet {
    pub fn num_streams(&self) -> usize {
        self.stream_owner.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.anchors.len() != self.precoders.len() || self.anchors.first() != Some(&0) {
            return Err(Error::contract("anchors must start at 0, one per precoder group"));
        }
        if self.anchors.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::contract("anchors must be strictly increasing"));
        }
        for p in &self.precoders {
            if p.shape() != (TOTAL_TX, self.num_streams()) {
                return Err(Error::contract(format!("precoder shape {:?}", p.shape())));
            }
            for c in p.column_iter() {
                if (c.norm() - 1.0).abs() > 1e-10 {
                    return Err(Error::contract("precoder columns must have unit norm"));
                }
            }
        }
        for rs in &self.receivers {
            if rs.iter().any(|u| (u.norm() - 1.0).abs() > 1e-10) {
                return Err(Error::contract("receive vectors must have unit norm"));
            }
        }
        Ok(())
    }

    /// Streams transmitted by BS `j` (non-zero rows `2j`, `2j+1`).
    pub fn active_bs(&self, group: usize) -> Vec<bool> {
        let p = &self.precoders[group];
        (0..NUM_LINKS)
            .map(|j| p.rows(2 * j, 2).iter().any(|x| x.norm() > 0.0))
            .collect()
    }
}

/// Index of the group whose anchor is the last one at or below `s`.
pub fn group_of(anchors: &[usize], s: usize) -> usize {
    anchors.iter().rposition(|&a| a <= s).unwrap_or(0)
}

/// Per-subcarrier precoders: subcarrier `s` reuses the group anchored at or
/// below it, the last group extending to `nc − 1`.
pub fn expand_groups(set: &BeamformerSet, nc: usize, ng: usize) -> Result<Vec<CMat>> {
    set.check()?;
    if set.anchors.iter().enumerate().any(|(g, &a)| a != g * ng || a >= nc) {
        return Err(Error::contract(format!(
            "anchors {:?} are inconsistent with ng={ng}, nc={nc}",
            set.anchors
        )));
    }
    Ok((0..nc)
        .map(|s| set.precoders[group_of(&set.anchors, s)].clone())
        .collect())
}

fn embed_per_bs(v: &[CVec]) -> CMat {
    let mut p = CMat::zeros(TOTAL_TX, v.len());
    for (k, vk) in v.iter().enumerate() {
        p.view_mut((2 * k, k), (2, 1)).copy_from(vk);
    }
    p
}

fn stack_columns(v: &[CVec]) -> CMat {
    CMat::from_columns(v)
}

/// IA precoders for one group: closed form, then max-SINR refinement. A
/// degenerate closed form falls back to first-antenna initialisation.
pub fn design_ia(aggregate: &[CMat], sigma2: f64, iterations: usize) -> Result<(Vec<CVec>, Vec<CVec>)> {
    let h = LinkMatrices::interference_channel(aggregate)?;
    let init = match ia_closed_form(&h) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => vec![CVec::from_vec(vec![ONE, ZERO]); NUM_LINKS],
        Err(e) => return Err(e),
    };
    max_sinr_refine(&h, &init, sigma2, iterations)
}

/// CoMP precoders for one group: pseudo-inverse start, then max-SINR.
/// A rank-deficient start falls back to the users' matched filters.
pub fn design_comp(aggregate: &[CMat], sigma2: f64, iterations: usize) -> Result<(Vec<CVec>, Vec<CVec>)> {
    let h = LinkMatrices::broadcast_channel(aggregate)?;
    let init = match comp_init_pinv(aggregate) {
        Ok(v) => v,
        Err(Error::Degenerate(_)) => aggregate
            .iter()
            .map(|hk| {
                let (_, w) = dominant_eigvec_hermitian(&(hk * hk.adjoint()));
                normalized(&(hk.adjoint() * w))
            })
            .collect(),
        Err(e) => return Err(e),
    };
    max_sinr_refine(&h, &init, sigma2, iterations)
}

/// Beamformers of a CSI-driven scheme from per-group aggregate channels
/// (`channels[group][ms]`, each 2×6).
pub fn beamformers_from_channels(
    scheme: Scheme,
    anchors: &[usize],
    channels: &[Vec<CMat>],
    sigma2: f64,
    iterations: usize,
) -> Result<BeamformerSet> {
    if anchors.len() != channels.len() {
        return Err(Error::contract("one channel set per anchor is required"));
    }
    let mut precoders = Vec::with_capacity(anchors.len());
    let mut receivers = Vec::with_capacity(anchors.len());
    for group in channels {
        let (u, v) = match scheme {
            Scheme::Ia => {
                let (u, v) = design_ia(group, sigma2, iterations)?;
                (u, embed_per_bs(&v))
            }
            Scheme::Comp => {
                let (u, v) = design_comp(group, sigma2, iterations)?;
                (u, stack_columns(&v))
            }
            _ => {
                return Err(Error::contract(format!("{scheme} does not use channel state")));
            }
        };
        precoders.push(v);
        receivers.push(u);
    }
    let set = BeamformerSet {
        scheme,
        anchors: anchors.to_vec(),
        precoders,
        receivers,
        stream_owner: (0..NUM_LINKS).collect(),
    };
    set.check()?;
    Ok(set)
}

/// Fixed stream-to-antenna mappings of the reference schemes. For
/// TDMA-MIMO `active_link` selects the BS–MS pair served in this slot.
pub fn reference_beamformers(scheme: Scheme, active_link: usize) -> Result<BeamformerSet> {
    let one = Complex64::new(1.0, 0.0);
    let (precoder, owners) = match scheme {
        Scheme::TdmaMimo => {
            if active_link >= NUM_LINKS {
                return Err(Error::contract(format!("no link {active_link}")));
            }
            let mut p = CMat::zeros(TOTAL_TX, 2);
            p[(2 * active_link, 0)] = one;
            p[(2 * active_link + 1, 1)] = one;
            (p, vec![active_link, active_link])
        }
        Scheme::FrSimo => {
            let mut p = CMat::zeros(TOTAL_TX, NUM_LINKS);
            for k in 0..NUM_LINKS {
                p[(2 * k, k)] = one;
            }
            (p, (0..NUM_LINKS).collect())
        }
        Scheme::FrMimo => (
            CMat::identity(TOTAL_TX, TOTAL_TX),
            (0..TOTAL_TX).map(|s| s / NUM_ANTENNAS).collect(),
        ),
        Scheme::Ia | Scheme::Comp => {
            return Err(Error::contract(format!("{scheme} is not a reference scheme")));
        }
    };
    Ok(BeamformerSet {
        scheme,
        anchors: vec![0],
        precoders: vec![precoder],
        receivers: Vec::new(),
        stream_owner: owners,
    })
}
