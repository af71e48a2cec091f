//! Discrete-time state-space realizations `G(z) = C (zI − A)⁻¹ B + D`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IqcError, Result};
use crate::linalg::{hcat, kron_eye, to_complex, vcat, zeros, CMat, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

/// Frequency-response sample `G(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub z: Complex64,
    pub value: CMat,
}

impl StateSpace {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(IqcError::Dimension(format!("A is {}x{}", nx, a.ncols())));
        }
        if b.nrows() != nx || c.ncols() != nx {
            return Err(IqcError::Dimension(format!(
                "B has {} rows and C has {} columns, expected {nx}",
                b.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(IqcError::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Memoryless system `y = D u`.
    pub fn static_gain(d: Mat) -> Self {
        let (ny, nu) = d.shape();
        Self { a: zeros(0, 0), b: zeros(0, nu), c: zeros(ny, 0), d }
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b.ncols()
    }
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// `G(z)`; errors when `zI − A` is numerically singular.
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        let nx = self.nx();
        let d = to_complex(&self.d);
        if nx == 0 {
            return Ok(d);
        }
        let za = CMat::identity(nx, nx) * z - to_complex(&self.a);
        let smin = za.clone().svd(false, false).singular_values.min();
        let thresh = 1e-12 * (1.0 + z.norm() + self.a.norm());
        if smin < thresh {
            return Err(IqcError::Singularity(format!("zI - A nearly singular at z = {z}")));
        }
        let x = za
            .lu()
            .solve(&to_complex(&self.b))
            .ok_or_else(|| IqcError::Singularity(format!("zI - A singular at z = {z}")))?;
        Ok(to_complex(&self.c) * x + d)
    }

    pub fn frequency_response(&self, z: Complex64) -> Result<FrequencyResponse> {
        Ok(FrequencyResponse { z, value: self.eval(z)? })
    }
}

/// Series connection `second ∘ first`, transfer function `second(z)·first(z)`.
///
/// States of `second` come first, matching the block-triangular layout used for
/// the augmented plants.
pub fn series(first: &StateSpace, second: &StateSpace) -> Result<StateSpace> {
    if first.ny() != second.nu() {
        return Err(IqcError::Dimension(format!(
            "series: first has {} outputs, second has {} inputs",
            first.ny(),
            second.nu()
        )));
    }
    let (n1, n2) = (first.nx(), second.nx());
    let a = vcat(&[
        &hcat(&[&second.a, &(&second.b * &first.c)]),
        &hcat(&[&zeros(n1, n2), &first.a]),
    ]);
    let b = vcat(&[&(&second.b * &first.d), &first.b]);
    let c = hcat(&[&second.c, &(&second.d * &first.c)]);
    let d = &second.d * &first.d;
    StateSpace::new(a, b, c, d)
}

/// Realization of `G(ρz)`: `(A/ρ, B/ρ, C, D)`.
pub fn rho_scale(sys: &StateSpace, rho: f64) -> Result<StateSpace> {
    if !(rho > 0.0) {
        return Err(IqcError::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(StateSpace { a: &sys.a / rho, b: &sys.b / rho, c: sys.c.clone(), d: sys.d.clone() })
}

/// Replace every matrix `M` by `M ⊗ I_p`.
pub fn kronecker_lift(sys: &StateSpace, p: usize) -> StateSpace {
    StateSpace {
        a: kron_eye(&sys.a, p),
        b: kron_eye(&sys.b, p),
        c: kron_eye(&sys.c, p),
        d: kron_eye(&sys.d, p),
    }
}

/// Stack two systems sharing an input: `[G1; G2]`.
pub fn stack_outputs(g1: &StateSpace, g2: &StateSpace) -> Result<StateSpace> {
    if g1.nu() != g2.nu() {
        return Err(IqcError::Dimension("stack_outputs: input sizes differ".into()));
    }
    let a = crate::linalg::blkdiag(&[&g1.a, &g2.a]);
    let b = vcat(&[&g1.b, &g2.b]);
    let c = crate::linalg::blkdiag(&[&g1.c, &g2.c]);
    StateSpace::new(a, b, c, vcat(&[&g1.d, &g2.d]))
}

/// Convenience for scalar test systems.
pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpace {
    StateSpace {
        a: DMatrix::from_element(1, 1, a),
        b: DMatrix::from_element(1, 1, b),
        c: DMatrix::from_element(1, 1, c),
        d: DMatrix::from_element(1, 1, d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn static_gains_multiply() {
        let g1 = StateSpace::static_gain(DMatrix::from_element(1, 1, 2.0));
        let g2 = StateSpace::static_gain(DMatrix::from_element(1, 1, 3.0));
        let s = series(&g1, &g2).unwrap();
        assert_eq!(s.nx(), 0);
        assert_eq!(s.d[(0, 0)], 6.0);
    }

    #[test]
    fn series_with_identity() {
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        let id = StateSpace::static_gain(DMatrix::identity(1, 1));
        let s = series(&g, &id).unwrap();
        let v = s.eval(c(2.0, 0.0)).unwrap()[(0, 0)];
        assert!((v.re - 1.0 / 1.5).abs() < 1e-12 && v.im.abs() < 1e-12);
    }

    #[test]
    fn series_dimension_error() {
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        let h = StateSpace::static_gain(DMatrix::zeros(1, 2));
        assert!(matches!(series(&g, &h), Err(IqcError::Dimension(_))));
    }

    #[test]
    fn rho_scale_examples() {
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        assert_eq!(rho_scale(&g, 1.0).unwrap(), g);
        let h = rho_scale(&g, 0.5).unwrap();
        assert_eq!(h.a[(0, 0)], 1.0);
        assert_eq!(h.b[(0, 0)], 2.0);
        let v = h.eval(c(3.0, 0.0)).unwrap()[(0, 0)];
        assert!((v.re - 1.0).abs() < 1e-12);
        assert!(matches!(rho_scale(&g, 0.0), Err(IqcError::Domain(_))));
    }

    #[test]
    fn eval_examples() {
        let d = StateSpace::static_gain(DMatrix::from_element(1, 1, 4.0));
        assert_eq!(d.eval(c(0.3, 0.1)).unwrap()[(0, 0)], c(4.0, 0.0));
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        assert!((g.eval(c(1.0, 0.0)).unwrap()[(0, 0)] - c(2.0, 0.0)).norm() < 1e-12);
        let v = g.eval(c(0.0, 1.0)).unwrap()[(0, 0)];
        assert!((v - c(-0.4, -0.8)).norm() < 1e-12);
        assert!(matches!(g.eval(c(0.5, 0.0)), Err(IqcError::Singularity(_))));
    }

    #[test]
    fn lift_scalar() {
        let g = scalar(0.9, 1.0, 1.0, 0.0);
        assert_eq!(kronecker_lift(&g, 1), g);
        let l = kronecker_lift(&g, 3);
        assert_eq!(l.a, DMatrix::identity(3, 3) * 0.9);
    }

    #[test]
    fn new_rejects_bad_shapes() {
        let r = StateSpace::new(zeros(2, 2), zeros(3, 1), zeros(1, 2), zeros(1, 1));
        assert!(matches!(r, Err(IqcError::Dimension(_))));
    }
}
