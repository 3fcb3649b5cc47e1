//! Dense complex Hermitian helpers shared by the rate functions and the solver.
//!
//! All log-determinants are computed in nats internally; [`nats_to_bits`] is the
//! only place where a natural logarithm is turned into bits per symbol.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::{LN_2, SQRT_2};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// PSD acceptance: smallest eigenvalue ≥ −`PSD_REL_TOL` · largest eigenvalue.
pub const PSD_REL_TOL: f64 = 1e-8;

/// Converts a quantity in nats to bits.
#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn scaled_identity(n: usize, s: f64) -> CMat {
    CMat::from_diagonal_element(n, n, Complex64::new(s, 0.0))
}

/// `(A + A†) / 2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// `K X K†`.
pub fn congruence(k: &CMat, x: &CMat) -> CMat {
    k * x * k.adjoint()
}

/// Maps an m×m complex Hermitian matrix to the 2m×2m real symmetric matrix
/// `[[Re A, −Im A], [Im A, Re A]]`, whose log-determinant is twice that of `A`.
pub fn realify(a: &CMat) -> RMat {
    let m = a.nrows();
    let mut r = RMat::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = a[(i, j)];
            r[(i, j)] = z.re;
            r[(i + m, j + m)] = z.re;
            r[(i, j + m)] = -z.im;
            r[(i + m, j)] = z.im;
        }
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// Natural-log determinant of the complex matrix.
    pub nats: f64,
    /// Diagonal jitter that had to be added before the factorization succeeded.
    pub jitter: f64,
}

impl LogDet {
    pub fn bits(&self) -> f64 {
        nats_to_bits(self.nats)
    }
}

/// Log-determinant of a Hermitian positive definite matrix via a Cholesky
/// factorization of its realification. One jitter retry of `1e-12·tr/m`.
pub fn ln_det_hermitian(a: &CMat) -> Option<LogDet> {
    let m = a.nrows();
    if m == 0 {
        return Some(LogDet { nats: 0.0, jitter: 0.0 });
    }
    let real = realify(&hermitize(a));
    if let Some(nats) = real_ln_det(real.clone()) {
        return Some(LogDet { nats: 0.5 * nats, jitter: 0.0 });
    }
    let tr = trace_re(a);
    if !(tr > 0.0) {
        return None;
    }
    let jitter = 1e-12 * tr / m as f64;
    let mut shifted = real;
    for i in 0..2 * m {
        shifted[(i, i)] += jitter;
    }
    real_ln_det(shifted).map(|nats| LogDet { nats: 0.5 * nats, jitter })
}

fn real_ln_det(a: RMat) -> Option<f64> {
    let chol = a.cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// `log2 det(A)` for Hermitian PD `A`; `None` when `A` is singular or indefinite.
pub fn log2_det(a: &CMat) -> Option<f64> {
    ln_det_hermitian(a).map(|d| d.bits())
}

/// Cholesky factor of a Hermitian matrix, `None` unless it is positive
/// definite. The complex factorization takes square roots of negative pivots
/// without failing, so every pivot is checked to be real and positive.
pub fn hermitian_cholesky(a: &CMat) -> Option<nalgebra::linalg::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let pd = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re
    });
    pd.then_some(chol)
}

/// Inverse of a Hermitian PD matrix.
pub fn hermitian_inverse(a: &CMat) -> Option<CMat> {
    if a.nrows() == 1 {
        let v = a[(0, 0)].re;
        return (v > 0.0).then(|| CMat::from_element(1, 1, Complex64::new(1.0 / v, 0.0)));
    }
    let chol = hermitian_cholesky(&hermitize(a))?;
    Some(hermitize(&chol.inverse()))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// decreasing order; equal eigenvalues keep their original order.
pub fn hermitian_eigen_desc(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    order.sort_by(|&x, &y| vals[y].partial_cmp(&vals[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vecs = CMat::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        sorted.push(vals[src]);
        vecs.set_column(col, &eig.eigenvectors.column(src));
    }
    (sorted, vecs)
}

/// `(λ_min, λ_max)` of a Hermitian matrix.
pub fn eigen_range(a: &CMat) -> (f64, f64) {
    if a.nrows() == 0 {
        return (0.0, 0.0);
    }
    let vals = hermitize(a).symmetric_eigenvalues();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Hermitian PSD test with the relative tolerance [`PSD_REL_TOL`].
pub fn is_psd(a: &CMat) -> bool {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return false;
    }
    let (lo, hi) = eigen_range(a);
    lo >= -PSD_REL_TOL * hi.abs().max(f64::MIN_POSITIVE)
}

/// Hermitian deviation `max |A − A†|`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Orthonormal real basis of the m×m Hermitian matrices under `Re tr(AB)`.
///
/// Parameter order: the m diagonal entries, then for every pair `a < b` the
/// real part followed by the imaginary part of entry `(a, b)`, scaled by √2.
pub mod hermitian_basis {
    use super::*;

    pub fn len(m: usize) -> usize {
        m * m
    }

    /// Position of basis element `j` as `(row, col, kind)`:
    /// kind 0 diagonal, 1 symmetric real, 2 antisymmetric imaginary.
    pub fn element(m: usize, j: usize) -> (usize, usize, u8) {
        if j < m {
            return (j, j, 0);
        }
        let mut idx = j - m;
        for a in 0..m {
            for b in (a + 1)..m {
                if idx < 2 {
                    return (a, b, 1 + idx as u8);
                }
                idx -= 2;
            }
        }
        panic!("basis index {j} out of range for dimension {m}");
    }

    pub fn matrix(m: usize, j: usize) -> CMat {
        let mut out = CMat::zeros(m, m);
        let (a, b, kind) = element(m, j);
        let s = 1.0 / SQRT_2;
        match kind {
            0 => out[(a, a)] = Complex64::new(1.0, 0.0),
            1 => {
                out[(a, b)] = Complex64::new(s, 0.0);
                out[(b, a)] = Complex64::new(s, 0.0);
            }
            _ => {
                out[(a, b)] = Complex64::new(0.0, s);
                out[(b, a)] = Complex64::new(0.0, -s);
            }
        }
        out
    }

    pub fn to_params(x: &CMat) -> Vec<f64> {
        let m = x.nrows();
        let mut p = Vec::with_capacity(len(m));
        for a in 0..m {
            p.push(x[(a, a)].re);
        }
        for a in 0..m {
            for b in (a + 1)..m {
                let z = (x[(a, b)] + x[(b, a)].conj()) * 0.5;
                p.push(SQRT_2 * z.re);
                p.push(SQRT_2 * z.im);
            }
        }
        p
    }

    pub fn from_params(p: &[f64], m: usize) -> CMat {
        debug_assert_eq!(p.len(), len(m));
        let mut x = CMat::zeros(m, m);
        for a in 0..m {
            x[(a, a)] = Complex64::new(p[a], 0.0);
        }
        let mut idx = m;
        let s = 1.0 / SQRT_2;
        for a in 0..m {
            for b in (a + 1)..m {
                let z = Complex64::new(p[idx] * s, p[idx + 1] * s);
                x[(a, b)] = z;
                x[(b, a)] = z.conj();
                idx += 2;
            }
        }
        x
    }

    /// Coordinates of the linear functional `X ↦ Re tr(C X)` for Hermitian `C`.
    pub fn functional(c: &CMat) -> Vec<f64> {
        let m = c.nrows();
        let mut out = Vec::with_capacity(len(m));
        for a in 0..m {
            out.push(c[(a, a)].re);
        }
        for a in 0..m {
            for b in (a + 1)..m {
                // Re tr(C B) for the two off-diagonal basis elements.
                let cab = c[(a, b)];
                let cba = c[(b, a)];
                out.push((cab.re + cba.re) / SQRT_2);
                out.push((cab.im - cba.im) / SQRT_2);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_hermitian() -> CMat {
        CMat::from_row_slice(
            3,
            3,
            &[
                c(3.0, 0.0),
                c(0.5, 0.2),
                c(-0.1, 0.4),
                c(0.5, -0.2),
                c(2.0, 0.0),
                c(0.3, -0.3),
                c(-0.1, -0.4),
                c(0.3, 0.3),
                c(1.5, 0.0),
            ],
        )
    }

    #[test]
    fn realified_log_det_matches_complex_cholesky() {
        let a = sample_hermitian();
        let direct: f64 = a
            .clone()
            .cholesky()
            .unwrap()
            .l()
            .diagonal()
            .iter()
            .map(|z| 2.0 * z.re.ln())
            .sum();
        let via_real = ln_det_hermitian(&a).unwrap();
        assert_relative_eq!(via_real.nats, direct, epsilon = 1e-12);
        assert_eq!(via_real.jitter, 0.0);
        let real_full: f64 = real_ln_det(realify(&a)).unwrap();
        assert_relative_eq!(real_full, 2.0 * direct, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite_matrices() {
        let a = sample_hermitian();
        assert!(hermitian_cholesky(&a).is_some());
        let (_, u) = hermitian_eigen_desc(&a);
        for d in [[1.0, 2.0, -1.0], [5.0, -1e-3, 0.5], [-622.0, 0.3, 614.0]] {
            let m = hermitize(&(&u * CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, d.iter().map(|&v| c(v, 0.0)))) * u.adjoint()));
            assert!(hermitian_cholesky(&m).is_none(), "{d:?}");
            assert!(hermitian_inverse(&m).is_none() || d.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn log2_det_of_scalar() {
        let a = CMat::from_element(1, 1, c(8.0, 0.0));
        assert_relative_eq!(log2_det(&a).unwrap(), 3.0, epsilon = 1e-14);
        assert!(log2_det(&CMat::from_element(1, 1, c(-1.0, 0.0))).is_none());
    }

    #[test]
    fn basis_round_trip_and_functional() {
        let a = sample_hermitian();
        let p = hermitian_basis::to_params(&a);
        let back = hermitian_basis::from_params(&p, 3);
        assert!((back - &a).iter().all(|z| z.norm() < 1e-14));

        let cmat = hermitize(&CMat::from_fn(3, 3, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64))));
        let f = hermitian_basis::functional(&cmat);
        let direct = trace_re(&(&cmat * &a));
        let via: f64 = f.iter().zip(&p).map(|(x, y)| x * y).sum();
        assert_relative_eq!(via, direct, epsilon = 1e-12);

        for j in 0..9 {
            let b = hermitian_basis::matrix(3, j);
            assert!(hermitian_defect(&b) == 0.0);
            let coord = hermitian_basis::to_params(&b);
            for (t, v) in coord.iter().enumerate() {
                assert_relative_eq!(*v, if t == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn eigen_desc_breaks_ties_by_index() {
        let (vals, vecs) = hermitian_eigen_desc(&identity(2));
        assert_eq!(vals, vec![1.0, 1.0]);
        assert_relative_eq!(vecs.column(0).norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn psd_check_uses_relative_tolerance() {
        let mut a = scaled_identity(2, 1.0);
        a[(1, 1)] = c(-1e-10, 0.0);
        assert!(is_psd(&a));
        a[(1, 1)] = c(-1e-6, 0.0);
        assert!(!is_psd(&a));
    }
}
