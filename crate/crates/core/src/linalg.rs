//! Small complex linear-algebra helpers shared by the codec, the
//! beamformers and the receiver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Circularly-symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

/// Uniformly distributed unit vector in `C^n`.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| complex_gaussian(rng, 1.0));
    normalized(&v)
}

/// Matrix with `cols` orthonormal columns drawn from the Haar measure.
pub fn random_semi_unitary<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let qr = random_matrix(rng, rows, cols).qr();
    let q = qr.q();
    let r = qr.r();
    // fix the column phases so the distribution is Haar rather than QR-biased
    let mut out = q.columns(0, cols).into_owned();
    for c in 0..cols {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for x in out.column_mut(c).iter_mut() {
                *x *= ph;
            }
        }
    }
    out
}

pub fn normalized(v: &CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v.unscale(n)
    } else {
        v.clone()
    }
}

/// `a^H b` for column vectors.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

/// Chordal distance between the column spaces of two matrices with
/// orthonormal columns: `||A A^H - B B^H||_F / sqrt(2)`.
pub fn chordal_distance(a: &CMat, b: &CMat) -> f64 {
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    (pa - pb).norm() / std::f64::consts::SQRT_2
}

/// Chordal distance between the lines spanned by two nonzero vectors.
pub fn line_distance(a: &CVec, b: &CVec) -> f64 {
    let a = CMat::from_column_slice(a.len(), 1, normalized(a).as_slice());
    let b = CMat::from_column_slice(b.len(), 1, normalized(b).as_slice());
    chordal_distance(&a, &b)
}

/// Solves `A x = b` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CVec) -> Result<CVec> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("matrix is singular".into()))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMat) -> f64 {
    let s = a.singular_values();
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigen-decomposition of a 2x2 complex matrix. Eigenvalues are returned in
/// descending modulus; an exact modulus tie keeps the `+sqrt` root first.
pub fn eig2(m: &CMat) -> [(Complex64, CVec); 2] {
    debug_assert!(m.nrows() == 2 && m.ncols() == 2);
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - 4.0 * det).sqrt();
    let mut l1 = (tr + disc) / 2.0;
    let mut l2 = (tr - disc) / 2.0;
    if l2.norm() > l1.norm() {
        std::mem::swap(&mut l1, &mut l2);
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let vec_for = |l: Complex64| -> CVec {
        // two candidate null vectors of (M - lI); keep the better conditioned one
        let r1 = CVec::from_vec(vec![b, l - a]);
        let r2 = CVec::from_vec(vec![l - d, c]);
        let v = if r1.norm() >= r2.norm() { r1 } else { r2 };
        if v.norm() <= 1e-14 * scale {
            // M is (numerically) a multiple of the identity
            CVec::from_vec(vec![ONE, ZERO])
        } else {
            canonical_phase(&normalized(&v))
        }
    };
    [(l1, vec_for(l1)), (l2, vec_for(l2))]
}

/// Rotates `v` so that its first entry of non-negligible magnitude is real
/// and positive.
pub fn canonical_phase(v: &CVec) -> CVec {
    let n = v.norm();
    match v.iter().find(|x| x.norm() > 1e-12 * n) {
        Some(x) => {
            let ph = x.conj() / x.norm();
            v.map(|y| y * ph)
        }
        None => v.clone(),
    }
}

/// Dominant eigenvector of a Hermitian matrix (unit norm, canonical phase).
pub fn dominant_eigvec_hermitian(m: &CMat) -> (f64, CVec) {
    let eig = m.clone().symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &l)| {
            if l > best.1 {
                (i, l)
            } else {
                best
            }
        });
    let v = eig.eigenvectors.column(idx).into_owned();
    (eig.eigenvalues[idx], canonical_phase(&v))
}
