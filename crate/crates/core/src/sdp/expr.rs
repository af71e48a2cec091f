//! Affine matrix expressions `F(x) = F0 + Σ x_i F_i` over a flat decision vector.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::{eye, kron_eye, zeros, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub constant: Mat,
    pub terms: BTreeMap<usize, Mat>,
}

impl Affine {
    pub fn constant(m: Mat) -> Self {
        Self { constant: m, terms: BTreeMap::new() }
    }

    pub fn zeros(r: usize, c: usize) -> Self {
        Self::constant(zeros(r, c))
    }

    pub fn eye(n: usize) -> Self {
        Self::constant(eye(n))
    }

    /// The scalar variable `x_idx` as a 1×1 expression.
    pub fn var(idx: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(idx, Mat::from_element(1, 1, 1.0));
        Self { constant: zeros(1, 1), terms }
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }
    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }
    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.values().all(|m| m.iter().all(|&v| v == 0.0))
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        let mut out = self.constant.clone();
        for (&i, f) in &self.terms {
            out += f * x[i];
        }
        out
    }

    fn map(&self, f: impl Fn(&Mat) -> Mat) -> Self {
        Self { constant: f(&self.constant), terms: self.terms.iter().map(|(&i, m)| (i, f(m))).collect() }
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m * s)
    }

    /// `M · self`.
    pub fn lmul(&self, m: &Mat) -> Self {
        self.map(|x| m * x)
    }

    /// `self · M`.
    pub fn rmul(&self, m: &Mat) -> Self {
        self.map(|x| x * m)
    }

    /// `Mᵀ · self · M`.
    pub fn congruence(&self, m: &Mat) -> Self {
        self.map(|x| m.transpose() * x * m)
    }

    pub fn kron_eye(&self, p: usize) -> Self {
        self.map(|x| kron_eye(x, p))
    }

    /// `(self + selfᵀ) / 2`.
    pub fn sym(&self) -> Self {
        self.map(|x| (x + x.transpose()) * 0.5)
    }

    /// Scalar expression times a constant matrix.
    pub fn scalar_times(&self, m: &Mat) -> Self {
        assert_eq!(self.shape(), (1, 1), "scalar_times needs a 1x1 expression");
        self.map(|x| m * x[(0, 0)])
    }

    pub fn entry(&self, i: usize, j: usize) -> Self {
        self.map(|x| Mat::from_element(1, 1, x[(i, j)]))
    }

    pub fn view(&self, r0: usize, c0: usize, r: usize, c: usize) -> Self {
        self.map(|x| x.view((r0, c0), (r, c)).into_owned())
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Self {
        self.map(|x| Mat::from_element(1, 1, x.trace()))
    }

    /// Block matrix from a grid of expressions. Rows must agree in height and columns in width.
    pub fn blocks(grid: &[Vec<Affine>]) -> Self {
        let heights: Vec<usize> = grid.iter().map(|row| row[0].nrows()).collect();
        let widths: Vec<usize> = grid[0].iter().map(Affine::ncols).collect();
        let (h, w) = (heights.iter().sum(), widths.iter().sum());
        let mut out = Affine::zeros(h, w);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            assert_eq!(row.len(), widths.len(), "ragged block grid");
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                assert_eq!(blk.shape(), (heights[bi], widths[bj]), "block ({bi},{bj}) has the wrong shape");
                out.constant.view_mut((r0, c0), blk.shape()).copy_from(&blk.constant);
                for (&i, f) in &blk.terms {
                    out.terms.entry(i).or_insert_with(|| zeros(h, w)).view_mut((r0, c0), blk.shape()).copy_from(f);
                }
                c0 += widths[bj];
            }
            r0 += heights[bi];
        }
        out
    }

    pub fn blkdiag(items: &[Affine]) -> Self {
        let n = items.len();
        let grid: Vec<Vec<Affine>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { items[i].clone() } else { Affine::zeros(items[i].nrows(), items[j].ncols()) })
                    .collect()
            })
            .collect();
        Self::blocks(&grid)
    }

    pub fn hcat(items: &[Affine]) -> Self {
        Self::blocks(&[items.to_vec()])
    }

    pub fn vcat(items: &[Affine]) -> Self {
        let grid: Vec<Vec<Affine>> = items.iter().map(|x| vec![x.clone()]).collect();
        Self::blocks(&grid)
    }

    /// Largest coefficient magnitude, for scaling decisions.
    pub fn constant_norm(&self) -> f64 {
        self.constant.norm()
    }
}

impl Add for &Affine {
    type Output = Affine;
    fn add(self, rhs: &Affine) -> Affine {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in addition");
        let mut out = self.clone();
        out.constant += &rhs.constant;
        for (&i, f) in &rhs.terms {
            match out.terms.get_mut(&i) {
                Some(g) => *g += f,
                None => {
                    out.terms.insert(i, f.clone());
                }
            }
        }
        out
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(self, rhs: Affine) -> Affine {
        &self + &rhs
    }
}

impl Neg for &Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scale(-1.0)
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self.scale(-1.0)
    }
}

impl Sub for &Affine {
    type Output = Affine;
    fn sub(self, rhs: &Affine) -> Affine {
        self + &(-rhs)
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        &self - &rhs
    }
}

/// Product of two expressions; at least one factor must be constant.
impl Mul for &Affine {
    type Output = Affine;
    fn mul(self, rhs: &Affine) -> Affine {
        if rhs.is_constant() {
            self.rmul(&rhs.constant)
        } else if self.is_constant() {
            rhs.lmul(&self.constant)
        } else {
            panic!("product of two non-constant affine expressions is not affine")
        }
    }
}

impl Mul for Affine {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        &self * &rhs
    }
}

impl From<Mat> for Affine {
    fn from(m: Mat) -> Self {
        Affine::constant(m)
    }
}

impl From<&Mat> for Affine {
    fn from(m: &Mat) -> Self {
        Affine::constant(m.clone())
    }
}
