//! ρ-weighted Zames-Falb multipliers and their factorization `Π = ψ_Δ* M_Δ ψ_Δ`.
//!
//! Coefficients are stored in lag order `M_{−ℓc}, …, M_0, …, M_{ℓa}`; the
//! multiplier kernel is `E(z) = Σ_j M_j z^j` and
//! `Π(z) = Ŵᵀ [[0, E(z)*], [E(z), 0]] Ŵ` with `Ŵ = [[(L−m)I, −I], [0, I]]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IqcError, Result};
use crate::linalg::{blkdiag, eye, flip, hcat, kron_eye, to_complex, unit, upshift, vcat, zeros, CMat, Mat};
use crate::sdp::{Affine, SdpProblem, VarBlock};
use crate::statespace::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierClass {
    /// `M_i = m_i I_p`.
    Unstructured,
    /// Full `M_i`, entrywise sign conditions.
    Repeated,
    /// Diagonal `M_i`.
    Nonrepeated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZamesFalbStructure {
    pub ell_causal: usize,
    pub ell_anticausal: usize,
    pub p: usize,
    pub class: MultiplierClass,
    pub rho: f64,
}

impl ZamesFalbStructure {
    pub fn new(ell_causal: usize, ell_anticausal: usize, p: usize, class: MultiplierClass, rho: f64) -> Result<Self> {
        if p == 0 {
            return Err(IqcError::Argument("p must be positive".into()));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(IqcError::Domain(format!("rho must lie in (0, 1], got {rho}")));
        }
        Ok(Self { ell_causal, ell_anticausal, p, class, rho })
    }

    pub fn unstructured(ell_causal: usize, ell_anticausal: usize, p: usize, rho: f64) -> Result<Self> {
        Self::new(ell_causal, ell_anticausal, p, MultiplierClass::Unstructured, rho)
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }

    /// Number of coefficient matrices `ℓc + 1 + ℓa`.
    pub fn len(&self) -> usize {
        self.ell_causal + 1 + self.ell_anticausal
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lag of the `k`-th stored coefficient.
    pub fn lag(&self, k: usize) -> i64 {
        k as i64 - self.ell_causal as i64
    }

    /// State dimension of `ψ_Δ`.
    pub fn n_states(&self) -> usize {
        self.p * (self.ell_causal + self.ell_anticausal)
    }

    /// Output dimension of `ψ_Δ`.
    pub fn n_outputs(&self) -> usize {
        self.p * (4 + self.ell_causal + self.ell_anticausal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZamesFalbParameters {
    pub m: Vec<Mat>,
}

impl ZamesFalbParameters {
    /// Coefficient at `lag` (`−ℓc ≤ lag ≤ ℓa`).
    pub fn at(&self, structure: &ZamesFalbStructure, lag: i64) -> &Mat {
        &self.m[(lag + structure.ell_causal as i64) as usize]
    }

    /// `E(z) = Σ_j M_j z^j`.
    pub fn kernel(&self, structure: &ZamesFalbStructure, z: Complex64) -> CMat {
        let p = structure.p;
        let mut e = CMat::zeros(p, p);
        for (k, mk) in self.m.iter().enumerate() {
            e += to_complex(mk) * z.powi(structure.lag(k) as i32);
        }
        e
    }

    pub fn scaled(&self, tau: f64) -> Self {
        Self { m: self.m.iter().map(|x| x * tau).collect() }
    }
}

/// Sector transform `Ŵ = [[(L−m)I, −I], [0, I]]`.
pub fn w_hat(width: f64, p: usize) -> Mat {
    vcat(&[&hcat(&[&(eye(p) * width), &(-eye(p))]), &hcat(&[&zeros(p, p), &eye(p)])])
}

/// Linear membership constraints, each of the form `expr ≤ 0` entrywise.
///
/// `m` holds the coefficient expressions in lag order. The constant part of
/// each returned expression equals `slack`, so `slack > 0` demands a strict margin
/// on the row and column sums.
pub fn membership_constraints(m: &[Affine], structure: &ZamesFalbStructure, sum_margin: f64) -> Vec<(String, Affine)> {
    let p = structure.p;
    let rho = structure.rho;
    let mut out = Vec::new();
    for (k, mk) in m.iter().enumerate() {
        let lag = structure.lag(k);
        match structure.class {
            MultiplierClass::Unstructured => {
                if lag != 0 {
                    out.push((format!("sign[{lag}]"), mk.entry(0, 0)));
                }
            }
            MultiplierClass::Nonrepeated => {
                if lag != 0 {
                    for i in 0..p {
                        out.push((format!("sign[{lag}]({i})"), mk.entry(i, i)));
                    }
                }
            }
            MultiplierClass::Repeated => {
                for i in 0..p {
                    for j in 0..p {
                        if lag != 0 || i != j {
                            out.push((format!("sign[{lag}]({i},{j})"), mk.entry(i, j)));
                        }
                    }
                }
            }
        }
    }
    let ones = Mat::from_element(p, 1, 1.0);
    let mut row = Affine::zeros(p, p);
    let mut col = Affine::zeros(p, p);
    for (k, mk) in m.iter().enumerate() {
        let lag = structure.lag(k) as i32;
        row = &row + &mk.scale(rho.powi(-lag));
        col = &col + &mk.scale(rho.powi(lag));
    }
    let margin = Affine::constant(Mat::from_element(p, 1, sum_margin));
    let row_sums = &(-&row.rmul(&ones)) + &margin;
    let col_sums = &(-&col.transpose().rmul(&ones)) + &margin;
    for i in 0..p {
        out.push((format!("rowsum({i})"), row_sums.entry(i, 0)));
        out.push((format!("colsum({i})"), col_sums.entry(i, 0)));
    }
    out
}

/// Concrete membership test with absolute tolerance `tol·(1 + max|M|)`.
pub fn verify_membership_tol(params: &ZamesFalbParameters, structure: &ZamesFalbStructure, tol: f64) -> bool {
    if params.m.len() != structure.len() || params.m.iter().any(|x| x.shape() != (structure.p, structure.p)) {
        return false;
    }
    let p = structure.p;
    let shape_ok = params.m.iter().all(|x| match structure.class {
        MultiplierClass::Unstructured => (x - eye(p) * x[(0, 0)]).amax() <= tol,
        MultiplierClass::Nonrepeated => (0..p).all(|i| (0..p).all(|j| i == j || x[(i, j)].abs() <= tol)),
        MultiplierClass::Repeated => true,
    });
    if !shape_ok {
        return false;
    }
    let scale = 1.0 + params.m.iter().map(|x| x.amax()).fold(0.0, f64::max);
    let consts: Vec<Affine> = params.m.iter().map(|x| Affine::constant(x.clone())).collect();
    membership_constraints(&consts, structure, 0.0)
        .iter()
        .all(|(_, e)| e.constant[(0, 0)] <= tol * scale)
}

pub fn verify_membership(params: &ZamesFalbParameters, structure: &ZamesFalbStructure) -> bool {
    verify_membership_tol(params, structure, 1e-10)
}

/// Decision variables for one multiplier, created inside an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct MultiplierVars {
    pub structure: ZamesFalbStructure,
    pub vars: Vec<VarBlock>,
    pub m: Vec<Affine>,
}

impl MultiplierVars {
    /// Creates the coefficient variables and adds the membership constraints.
    pub fn create(problem: &mut SdpProblem, prefix: &str, structure: &ZamesFalbStructure, sum_margin: f64) -> Self {
        let p = structure.p;
        let mut vars = Vec::new();
        let mut m = Vec::new();
        for k in 0..structure.len() {
            let lag = structure.lag(k);
            let name = format!("{prefix}.M[{lag}]");
            let (v, e) = match structure.class {
                MultiplierClass::Unstructured => {
                    let v = problem.scalar(&name);
                    let e = v.expr().scalar_times(&eye(p));
                    (v, e)
                }
                MultiplierClass::Nonrepeated => {
                    let v = problem.full(&name, p, 1);
                    let mut e = Affine::zeros(p, p);
                    let col = v.expr();
                    for i in 0..p {
                        let mut sel = zeros(p, p);
                        sel[(i, i)] = 1.0;
                        e = &e + &col.entry(i, 0).scalar_times(&sel);
                    }
                    (v, e)
                }
                MultiplierClass::Repeated => {
                    let v = problem.full(&name, p, p);
                    let e = v.expr();
                    (v, e)
                }
            };
            vars.push(v);
            m.push(e);
        }
        for (name, expr) in membership_constraints(&m, structure, sum_margin) {
            problem.le_zero(&format!("{prefix}.{name}"), &expr);
        }
        Self { structure: *structure, vars, m }
    }

    pub fn m_delta(&self) -> Affine {
        m_delta_expr(&self.m, &self.structure)
    }

    /// Concrete coefficients with sign conditions projected exactly.
    pub fn extract(&self, x: &[f64]) -> ZamesFalbParameters {
        let mut params = ZamesFalbParameters { m: self.m.iter().map(|e| e.eval(x)).collect() };
        project_signs(&mut params, &self.structure);
        params
    }
}

/// Clears sign-violating entries left by solver round-off.
pub fn project_signs(params: &mut ZamesFalbParameters, structure: &ZamesFalbStructure) {
    let p = structure.p;
    for (k, mk) in params.m.iter_mut().enumerate() {
        let lag = structure.lag(k);
        for i in 0..p {
            for j in 0..p {
                let constrained = match structure.class {
                    MultiplierClass::Unstructured | MultiplierClass::Nonrepeated => lag != 0 && i == j,
                    MultiplierClass::Repeated => lag != 0 || i != j,
                };
                if constrained && mk[(i, j)] > 0.0 {
                    mk[(i, j)] = 0.0;
                }
            }
        }
    }
}

/// `M_Δ` in the six-block layout with block sizes `(p, p, ℓc p, p, p, ℓa p)`.
pub fn m_delta_expr(m: &[Affine], structure: &ZamesFalbStructure) -> Affine {
    let p = structure.p;
    let (lc, la) = (structure.ell_causal, structure.ell_anticausal);
    let m0 = &m[lc];
    let m_minus = if lc == 0 { Affine::zeros(p, 0) } else { Affine::hcat(&m[..lc]) };
    let m_plus = if la == 0 {
        Affine::zeros(p, 0)
    } else {
        Affine::hcat(&m[lc + 1..].iter().map(Affine::transpose).collect::<Vec<_>>())
    };
    let pair = |off: &Affine, r: usize, c: usize| {
        Affine::blocks(&[
            vec![Affine::zeros(r, r), off.clone()],
            vec![off.transpose(), Affine::zeros(c, c)],
        ])
    };
    Affine::blkdiag(&[
        pair(&m0.transpose(), p, p),
        pair(&m_minus.transpose(), lc * p, p),
        pair(&m_plus, p, la * p),
    ])
}

pub fn m_delta(params: &ZamesFalbParameters, structure: &ZamesFalbStructure) -> Mat {
    let consts: Vec<Affine> = params.m.iter().map(|x| Affine::constant(x.clone())).collect();
    m_delta_expr(&consts, structure).constant
}

/// State-space realization of `ψ_Δ`, including `Ŵ` at the input.
pub fn psi_delta(structure: &ZamesFalbStructure, width: f64) -> StateSpace {
    let p = structure.p;
    let (lc, la) = (structure.ell_causal, structure.ell_anticausal);
    let ip = eye(p);
    let basis = |l: usize| -> (Mat, Mat) {
        if l == 0 {
            (zeros(0, 0), zeros(0, 1))
        } else {
            (upshift(l), unit(l, l - 1))
        }
    };
    let (ac, bc) = basis(lc);
    let (aa, ba) = basis(la);
    let cc = eye(lc);
    let ca = flip(la);
    let w = w_hat(width, p);

    let a = kron_eye(&blkdiag(&[&ac, &aa]), p);
    let b = blkdiag(&[&kron_eye(&bc, p), &kron_eye(&ba, p)]) * &w;

    let ns = (lc + la) * p;
    let zr = |r: usize| zeros(r, ns);
    let c = vcat(&[
        &zr(p),
        &zr(p),
        &hcat(&[&kron_eye(&cc, p), &zeros(lc * p, la * p)]),
        &zr(p),
        &zr(p),
        &hcat(&[&zeros(la * p, lc * p), &kron_eye(&ca, p)]),
    ]);
    let o = zeros(p, p);
    let d_raw = vcat(&[
        &hcat(&[&ip, &o]),
        &hcat(&[&o, &ip]),
        &zeros(lc * p, 2 * p),
        &hcat(&[&o, &ip]),
        &hcat(&[&ip, &o]),
        &zeros(la * p, 2 * p),
    ]);
    let d = d_raw * &w;
    StateSpace { a, b, c, d }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierFactorization {
    pub m_delta: Mat,
    pub psi_delta: StateSpace,
    pub w_hat: Mat,
}

pub fn factorize(params: &ZamesFalbParameters, structure: &ZamesFalbStructure, width: f64) -> Result<MultiplierFactorization> {
    if params.m.len() != structure.len() || params.m.iter().any(|x| x.shape() != (structure.p, structure.p)) {
        return Err(IqcError::Dimension("multiplier coefficients do not match the structure".into()));
    }
    Ok(MultiplierFactorization {
        m_delta: m_delta(params, structure),
        psi_delta: psi_delta(structure, width),
        w_hat: w_hat(width, structure.p),
    })
}

/// Direct evaluation of `Π(z) = Ŵᵀ [[0, E*], [E, 0]] Ŵ`.
pub fn pi_direct(params: &ZamesFalbParameters, structure: &ZamesFalbStructure, width: f64, z: Complex64) -> CMat {
    let p = structure.p;
    let e = params.kernel(structure, z);
    let mut mid = CMat::zeros(2 * p, 2 * p);
    mid.view_mut((0, p), (p, p)).copy_from(&e.adjoint());
    mid.view_mut((p, 0), (p, p)).copy_from(&e);
    let w = to_complex(&w_hat(width, p));
    w.transpose() * mid * w
}

/// `ψ_Δ(z)* M_Δ ψ_Δ(z)`.
pub fn pi_factored(f: &MultiplierFactorization, z: Complex64) -> Result<CMat> {
    let psi = f.psi_delta.eval(z)?;
    Ok(psi.adjoint() * to_complex(&f.m_delta) * psi)
}
