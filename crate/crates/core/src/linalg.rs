//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

pub fn zeros(r: usize, c: usize) -> Mat {
    Mat::zeros(r, c)
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// `a ⊗ I_p`.
pub fn kron_eye(a: &Mat, p: usize) -> Mat {
    a.kronecker(&eye(p))
}

pub fn blkdiag(blocks: &[&Mat]) -> Mat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, c);
    let (mut i, mut j) = (0, 0);
    for b in blocks {
        out.view_mut((i, j), (b.nrows(), b.ncols())).copy_from(*b);
        i += b.nrows();
        j += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share the row count.
pub fn hcat(blocks: &[&Mat]) -> Mat {
    let r = blocks.first().map_or(0, |b| b.nrows());
    let c: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, c);
    let mut j = 0;
    for b in blocks {
        assert_eq!(b.nrows(), r, "hcat row mismatch");
        out.view_mut((0, j), (r, b.ncols())).copy_from(*b);
        j += b.ncols();
    }
    out
}

/// Vertical concatenation; all blocks must share the column count.
pub fn vcat(blocks: &[&Mat]) -> Mat {
    let c = blocks.first().map_or(0, |b| b.ncols());
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(r, c);
    let mut i = 0;
    for b in blocks {
        assert_eq!(b.ncols(), c, "vcat column mismatch");
        out.view_mut((i, 0), (b.nrows(), c)).copy_from(*b);
        i += b.nrows();
    }
    out
}

/// Ones on the first superdiagonal.
pub fn upshift(n: usize) -> Mat {
    let mut a = zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    a
}

/// Anti-identity (row reversal).
pub fn flip(n: usize) -> Mat {
    let mut a = zeros(n, n);
    for i in 0..n {
        a[(i, n - 1 - i)] = 1.0;
    }
    a
}

/// Unit column vector `e_i` of length `n`.
pub fn unit(n: usize, i: usize) -> Mat {
    let mut e = zeros(n, 1);
    e[(i, 0)] = 1.0;
    e
}

pub fn to_complex(a: &Mat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Largest eigenvalue modulus of a general square matrix.
/// Eigenvalues via a Schur decomposition with an iteration cap; the unbounded
/// QR iteration behind `complex_eigenvalues` can cycle on some matrices.
pub fn eigenvalues(a: &Mat) -> Option<Vec<Complex64>> {
    const MAX_SWEEPS: usize = 10_000;
    for m in [a.clone(), a.transpose()] {
        if let Some(s) = nalgebra::Schur::try_new(m, f64::EPSILON, MAX_SWEEPS) {
            return Some(s.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

/// `lim ‖A^k‖^{1/k}` along `k = 2^j` with rescaling. Rounding at squaring `j`
/// enters the result damped by `2^-j`, so 60 squarings reach working precision
/// even for defective or repeated dominant eigenvalues.
fn gelfand_radius(a: &Mat) -> f64 {
    const SQUARINGS: u32 = 60;
    let mut b = a.clone();
    let mut log_scale = 0.0;
    for _ in 0..SQUARINGS {
        let n = b.norm();
        if n == 0.0 || !n.is_finite() {
            return if n == 0.0 { 0.0 } else { f64::INFINITY };
        }
        b /= n;
        log_scale = 2.0 * (log_scale + n.ln());
        b = &b * &b;
    }
    let n = b.norm();
    if n == 0.0 {
        return 0.0;
    }
    ((log_scale + n.ln()) / (1u64 << SQUARINGS) as f64).exp()
}

pub fn spectral_radius(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    match eigenvalues(a) {
        Some(ev) => ev.iter().map(|z| z.norm()).fold(0.0, f64::max),
        None => gelfand_radius(a),
    }
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(a: &Mat) -> DVector<f64> {
    if a.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut ev = symmetrize(a).symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn max_sym_eig(a: &Mat) -> f64 {
    sym_eigenvalues(a).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_sym_eig(a: &Mat) -> f64 {
    sym_eigenvalues(a).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the Hermitian part of a complex matrix.
pub fn max_herm_eig(a: &CMat) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    // Embed H = X + iY as the real symmetric [[X, -Y], [Y, X]]; eigenvalues double up.
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut r = zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    max_sym_eig(&r)
}

/// If `a = ā ⊗ I_p` exactly (to `tol`), returns `ā`.
pub fn kron_reduce(a: &Mat, p: usize, tol: f64) -> Option<Mat> {
    if p == 0 || a.nrows() % p != 0 || a.ncols() % p != 0 {
        return None;
    }
    let (r, c) = (a.nrows() / p, a.ncols() / p);
    let bar = Mat::from_fn(r, c, |i, j| a[(i * p, j * p)]);
    let scale = 1.0 + a.amax();
    if (kron_eye(&bar, p) - a).amax() <= tol * scale {
        Some(bar)
    } else {
        None
    }
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn to_rows(a: &Mat) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelfand_matches_eigenvalues() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = from_rows(&[vec![0.9 * c, -0.9 * s, 0.0], vec![0.9 * s, 0.9 * c, 0.0], vec![0.0, 0.0, -0.5]]);
        assert!((gelfand_radius(&rot) - 0.9).abs() < 1e-13);
        assert!((spectral_radius(&rot) - 0.9).abs() < 1e-12);
        // Defective: Jordan block at 0.7.
        let j = from_rows(&[vec![0.7, 1.0], vec![0.0, 0.7]]);
        assert!((gelfand_radius(&j) - 0.7).abs() < 1e-13);
        assert_eq!(gelfand_radius(&zeros(2, 2)), 0.0);
    }

    #[test]
    fn shift_and_flip() {
        let a = upshift(3);
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 2)], 1.0);
        assert_eq!(a.sum(), 2.0);
        let f = flip(3);
        assert_eq!(f[(0, 2)], 1.0);
        assert_eq!(f[(2, 0)], 1.0);
    }

    #[test]
    fn kron_roundtrip() {
        let a = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let big = kron_eye(&a, 3);
        assert_eq!(kron_reduce(&big, 3, 1e-12), Some(a));
        let mut broken = big.clone();
        broken[(0, 1)] = 0.5;
        assert!(kron_reduce(&broken, 3, 1e-12).is_none());
    }

    #[test]
    fn hermitian_eig_of_rotation_generator() {
        // [[0, i], [-i, 0]] is Hermitian with eigenvalues ±1.
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        let a = CMat::from_row_slice(2, 2, &[z, i, -i, z]);
        assert!((max_herm_eig(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let a = from_rows(&[vec![0.0, -0.5], vec![0.5, 0.0]]);
        assert!((spectral_radius(&a) - 0.5).abs() < 1e-12);
    }
}
