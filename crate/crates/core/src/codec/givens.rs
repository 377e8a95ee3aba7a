//! SVD of the per-subcarrier channel and the Givens-rotation angle
//! representation of its right singular vectors.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMat;
use crate::{Error, Result};

/// `H = U · diag(S) · V^H` with `S` descending and every column of `V`
/// rotated so that its last entry is real and non-negative.
#[derive(Debug, Clone)]
pub struct CsiDecomposition {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
    /// Set when the smallest singular value is below `1e-12 · ||H||`.
    pub degenerate: bool,
}

impl CsiDecomposition {
    pub fn reconstruct(&self) -> CMat {
        let mut us = self.u.clone();
        for (c, &s) in self.s.iter().enumerate() {
            us.column_mut(c).scale_mut(s);
        }
        us * self.v.adjoint()
    }
}

/// Decomposes an `n × m` channel (`n <= m`).
pub fn decompose(h: &CMat) -> Result<CsiDecomposition> {
    let (n, m) = h.shape();
    if n == 0 || n > m {
        return Err(Error::contract(format!("decompose expects n <= m, got {n}x{m}")));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("channel has non-finite entries"));
    }
    let norm = h.norm();
    let svd = h.clone().svd(true, true);
    let u_raw = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(m, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        s.push(svd.singular_values[src]);
        let vcol = vt.row(src).adjoint();
        let last = vcol[m - 1];
        let rot = if last.norm() > 0.0 {
            last.conj() / last.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        v.set_column(dst, &vcol.map(|x| x * rot));
        u.set_column(dst, &u_raw.column(src).map(|x| x * rot));
    }
    let degenerate = norm == 0.0 || s[n - 1] < 1e-12 * norm;
    Ok(CsiDecomposition { u, s, v, degenerate })
}

/// φ and ψ angles, ordered column by column; within column `i` the pairs
/// `(phi[t], psi[t])` are the `t`-th phase and rotation of that column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GivensAngles {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Number of φ (equivalently ψ) angles for an `m × n` matrix:
/// `mn − n/2 − n²/2`.
pub fn angle_count(m: usize, n: usize) -> usize {
    (0..n.min(m.saturating_sub(1))).map(|i| m - 1 - i).sum()
}

fn check_orthonormal(v: &CMat) -> Result<()> {
    let (m, n) = v.shape();
    if n == 0 || n > m {
        return Err(Error::contract(format!("expected m x n with n <= m, got {m}x{n}")));
    }
    let gram = v.adjoint() * v;
    let err = (gram - CMat::identity(n, n)).norm();
    if !(err < 1e-8) {
        return Err(Error::contract(format!(
            "columns are not orthonormal (||V^H V - I|| = {err:e})"
        )));
    }
    Ok(())
}

/// Extracts the Givens angles of a matrix with orthonormal columns.
pub fn v_to_angles(v: &CMat) -> Result<GivensAngles> {
    check_orthonormal(v)?;
    let (m, n) = v.shape();
    let mut w = v.clone();
    for c in 0..n {
        let last = w[(m - 1, c)];
        if last.norm() > 0.0 {
            let rot = last.conj() / last.norm();
            w.column_mut(c).iter_mut().for_each(|x| *x *= rot);
        }
    }
    let count = angle_count(m, n);
    let mut phi = Vec::with_capacity(count);
    let mut psi = Vec::with_capacity(count);
    for i in 0..n.min(m - 1) {
        for l in i..m - 1 {
            let a = w[(l, i)].arg().rem_euclid(TAU);
            let a = if a >= TAU { 0.0 } else { a };
            phi.push(a);
            let rot = Complex64::from_polar(1.0, -a);
            w.row_mut(l).iter_mut().for_each(|x| *x *= rot);
        }
        for l in i + 1..m {
            let a = w[(i, i)].re;
            let b = w[(l, i)].re;
            let angle = b.atan2(a).clamp(0.0, std::f64::consts::FRAC_PI_2);
            psi.push(angle);
            let (sn, cs) = angle.sin_cos();
            for c in 0..n {
                let (ri, rl) = (w[(i, c)], w[(l, c)]);
                w[(i, c)] = ri * cs + rl * sn;
                w[(l, c)] = rl * cs - ri * sn;
            }
        }
    }
    Ok(GivensAngles { phi, psi })
}

/// Rebuilds the `m × n` matrix `∏ᵢ [Dᵢ ∏ₗ Gₗᵢᵀ] · Ĩ` from its angles.
pub fn angles_to_v(angles: &GivensAngles, m: usize, n: usize) -> Result<CMat> {
    if n == 0 || n > m {
        return Err(Error::contract(format!("expected n <= m, got m={m} n={n}")));
    }
    let count = angle_count(m, n);
    if angles.phi.len() != count || angles.psi.len() != count {
        return Err(Error::contract(format!(
            "expected {count} phi and psi angles for {m}x{n}, got {} and {}",
            angles.phi.len(),
            angles.psi.len()
        )));
    }
    let mut acc = CMat::identity(m, m);
    let mut t = 0;
    for i in 0..n.min(m - 1) {
        for (off, l) in (i..m - 1).enumerate() {
            let ph = Complex64::from_polar(1.0, angles.phi[t + off]);
            acc.column_mut(l).iter_mut().for_each(|x| *x *= ph);
        }
        for (off, l) in (i + 1..m).enumerate() {
            let (sn, cs) = angles.psi[t + off].sin_cos();
            for r in 0..m {
                let (ci, cl) = (acc[(r, i)], acc[(r, l)]);
                acc[(r, i)] = ci * cs + cl * sn;
                acc[(r, l)] = cl * cs - ci * sn;
            }
        }
        t += m - 1 - i;
    }
    Ok(acc.columns(0, n).into_owned())
}
