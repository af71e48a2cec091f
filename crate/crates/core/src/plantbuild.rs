//! Augmented plants `ψ_Δ [G(ρ·); I]` for the rate and H2 inequalities.
//!
//! States are ordered (causal basis, anticausal basis, algorithm). The algorithm
//! states are kept in the scaled coordinates of the closed-form realization, so
//! `Ac(ρ)` carries `ρ⁻¹(A + mBC)` in its lower block while `Bc` keeps `B` unscaled.

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmRealization, SectorBounds};
use crate::error::{IqcError, Result};
use crate::linalg::{hcat, max_sym_eig, min_sym_eig, spectral_radius, symmetrize, vcat, zeros, Mat};
use crate::multipliers::{psi_delta, ZamesFalbStructure};
use crate::statespace::StateSpace;

/// The Lur'e loop seen by the multiplier: `x⁺ = A_nom x + B w`, `y = C x`, with
/// `w` slope-restricted in `[0, width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopData {
    pub a_nom: Mat,
    pub b: Mat,
    pub c: Mat,
    pub width: f64,
}

impl LoopData {
    /// Loop-transformed algorithm: `A + mBC`, `B`, `C`, width `L − m`.
    pub fn from_algorithm(algo: &AlgorithmRealization, bounds: &SectorBounds) -> Self {
        Self { a_nom: algo.nominal(bounds.m), b: algo.b.clone(), c: algo.c.clone(), width: bounds.width() }
    }

    /// Loop for gradients `H1 z + Tᵀ ∇H2(T z)` with `H2 ∈ S(m2, L2)`.
    pub fn structured(algo: &AlgorithmRealization, h1: &Mat, t: &Mat, m2: f64, l2: f64) -> Result<Self> {
        let p = algo.p;
        if h1.shape() != (p, p) || t.ncols() != p || t.nrows() == 0 {
            return Err(IqcError::Dimension(format!("H1 must be {p}x{p} and T must have {p} columns")));
        }
        if !(m2 >= 0.0 && l2 >= m2 && l2.is_finite()) {
            return Err(IqcError::Argument(format!("need 0 <= m2 <= L2, got m2 = {m2}, L2 = {l2}")));
        }
        let tt = t.transpose() * t;
        let a_nom = &algo.a + &algo.b * (h1 + &tt * m2) * &algo.c;
        Ok(Self { a_nom, b: &algo.b * t.transpose(), c: t * &algo.c, width: l2 - m2 })
    }

    pub fn nx(&self) -> usize {
        self.a_nom.nrows()
    }

    /// Dimension of the nonlinearity channel.
    pub fn q(&self) -> usize {
        self.b.ncols()
    }

    pub fn nominal_radius(&self) -> f64 {
        spectral_radius(&self.a_nom)
    }

    /// `G_{ỹw̃} = (A_nom, B, C, 0)`.
    pub fn transfer(&self) -> StateSpace {
        StateSpace { a: self.a_nom.clone(), b: self.b.clone(), c: self.c.clone(), d: zeros(self.c.nrows(), self.q()) }
    }
}

/// Sector `[λmin(H1), λmax(H1 + L2 TᵀT)]` available to a structure-blind method.
pub fn structured_bounds(h1: &Mat, t: &Mat, l2: f64) -> Result<SectorBounds> {
    let tt = t.transpose() * t;
    let lo = min_sym_eig(&symmetrize(h1));
    let hi = max_sym_eig(&symmetrize(&(h1 + &tt * l2)));
    SectorBounds::new(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPlant {
    pub rho: f64,
    pub ac: Mat,
    pub bc: Mat,
    pub cc: Mat,
    pub dc: Mat,
    /// Number of multiplier states.
    pub n_psi: usize,
    pub width: f64,
}

impl AugmentedPlant {
    pub fn nc(&self) -> usize {
        self.ac.nrows()
    }

    pub fn as_statespace(&self) -> StateSpace {
        StateSpace { a: self.ac.clone(), b: self.bc.clone(), c: self.cc.clone(), d: self.dc.clone() }
    }
}

fn check_structure(q: usize, structure: &ZamesFalbStructure) -> Result<()> {
    if structure.p != q {
        return Err(IqcError::Dimension(format!(
            "multiplier dimension {} does not match channel dimension {q}",
            structure.p
        )));
    }
    Ok(())
}

/// Realization of `ψ_Δ [G(ρ·); I]` for a generic loop.
pub fn build_loop_plant(lp: &LoopData, structure: &ZamesFalbStructure, rho: f64) -> Result<AugmentedPlant> {
    check_structure(lp.q(), structure)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(IqcError::Domain(format!("rho must be positive, got {rho}")));
    }
    let q = lp.q();
    let psi = psi_delta(structure, lp.width);
    let (bd_y, bd_w) = (psi.b.columns(0, q).into_owned(), psi.b.columns(q, q).into_owned());
    let (dd_y, dd_w) = (psi.d.columns(0, q).into_owned(), psi.d.columns(q, q).into_owned());
    let n_psi = psi.nx();
    let nx = lp.nx();
    let r = 1.0 / rho;

    let ac = vcat(&[
        &hcat(&[&psi.a, &(&bd_y * &lp.c * r)]),
        &hcat(&[&zeros(nx, n_psi), &(&lp.a_nom * r)]),
    ]);
    let bc = vcat(&[&bd_w, &lp.b]);
    let cc = hcat(&[&psi.c, &(&dd_y * &lp.c * r)]);
    Ok(AugmentedPlant { rho, ac, bc, cc, dc: dd_w, n_psi, width: lp.width })
}

/// Rate plant for an algorithm and sector bounds.
pub fn build_rate_plant(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<AugmentedPlant> {
    build_loop_plant(&LoopData::from_algorithm(algo, bounds), structure, rho)
}

/// Performance channel `(B_perf, C_perf, D_perf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceChannel {
    pub b_perf: Mat,
    pub c_perf: Mat,
    pub d_perf: Mat,
}

impl PerformanceChannel {
    /// Noise on the gradient, error measured in `z`: `(B, D, 0)`.
    pub fn gradient_noise(algo: &AlgorithmRealization) -> Self {
        Self { b_perf: algo.b.clone(), c_perf: algo.d.clone(), d_perf: zeros(algo.d.nrows(), algo.b.ncols()) }
    }

    /// Channel used in synthesis: `(B, C, 0)`.
    pub fn synthesis(algo: &AlgorithmRealization) -> Self {
        Self { b_perf: algo.b.clone(), c_perf: algo.c.clone(), d_perf: zeros(algo.c.nrows(), algo.b.ncols()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceAugmentedPlant {
    /// Uncertainty channel at `ρ = 1` (`bold Ac = Ac(1)`, `Bc1`, `Cc1`, `Dc11`).
    pub base: AugmentedPlant,
    pub bc2: Mat,
    pub cc2: Mat,
    /// Selector `Nᵀ = [0 I]` onto the algorithm states.
    pub n_t: Mat,
    pub channel: PerformanceChannel,
}

impl PerformanceAugmentedPlant {
    /// `Nᵀ Bc2`.
    pub fn selected_b(&self) -> Mat {
        &self.n_t * &self.bc2
    }
}

pub fn build_loop_perf_plant(
    lp: &LoopData,
    structure: &ZamesFalbStructure,
    channel: &PerformanceChannel,
) -> Result<PerformanceAugmentedPlant> {
    if channel.d_perf.iter().any(|&v| v != 0.0) {
        return Err(IqcError::Unsupported("H2 performance requires D_perf = 0".into()));
    }
    let nx = lp.nx();
    if channel.b_perf.nrows() != nx || channel.c_perf.ncols() != nx {
        return Err(IqcError::Dimension("performance channel does not match the state dimension".into()));
    }
    if channel.d_perf.shape() != (channel.c_perf.nrows(), channel.b_perf.ncols()) {
        return Err(IqcError::Dimension("D_perf has the wrong shape".into()));
    }
    let base = build_loop_plant(lp, structure, 1.0)?;
    let n_psi = base.n_psi;
    let bc2 = vcat(&[&zeros(n_psi, channel.b_perf.ncols()), &channel.b_perf]);
    let cc2 = hcat(&[&zeros(channel.c_perf.nrows(), n_psi), &channel.c_perf]);
    let n_t = hcat(&[&zeros(nx, n_psi), &crate::linalg::eye(nx)]);
    Ok(PerformanceAugmentedPlant { base, bc2, cc2, n_t, channel: channel.clone() })
}

pub fn build_perf_plant(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    channel: &PerformanceChannel,
) -> Result<PerformanceAugmentedPlant> {
    build_loop_perf_plant(&LoopData::from_algorithm(algo, bounds), structure, channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{make_named, NamedKind};
    use crate::linalg::{eye, kron_eye};
    use crate::statespace::{rho_scale, series, stack_outputs};
    use num_complex::Complex64;

    fn gd() -> (AlgorithmRealization, SectorBounds) {
        let b = SectorBounds::new(1.0, 10.0).unwrap();
        (make_named(NamedKind::Gd, &b, 1).unwrap(), b)
    }

    #[test]
    fn dimensions() {
        let (algo, b) = gd();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 0.9).unwrap();
        let pl = build_rate_plant(&algo, &b, &s, 0.9).unwrap();
        let n = algo.nx();
        assert_eq!(pl.nc(), 1 + n);
        assert_eq!(pl.cc.nrows(), 5);
        assert_eq!(pl.bc.ncols(), 1);
    }

    #[test]
    fn no_multiplier_states() {
        let (algo, b) = gd();
        let s = ZamesFalbStructure::unstructured(0, 0, 1, 0.9).unwrap();
        let pl = build_rate_plant(&algo, &b, &s, 0.9).unwrap();
        assert!((pl.ac.clone() - algo.nominal(1.0) / 0.9).amax() < 1e-15);
    }

    #[test]
    fn matches_series_composition() {
        let bnd = SectorBounds::new(1.0, 10.0).unwrap();
        let algo = make_named(NamedKind::Tmm, &bnd, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(2, 1, 1, 0.8).unwrap();
        let rho = 0.8;
        let pl = build_rate_plant(&algo, &bnd, &s, rho).unwrap();
        let lp = LoopData::from_algorithm(&algo, &bnd);
        let g = rho_scale(&lp.transfer(), rho).unwrap();
        let gi = stack_outputs(&g, &StateSpace::static_gain(eye(1))).unwrap();
        let oracle = series(&gi, &psi_delta(&s, bnd.width())).unwrap();
        let sys = pl.as_statespace();
        for k in 0..16 {
            let z = Complex64::from_polar(1.0, 0.1 + 0.39 * k as f64);
            let d = sys.eval(z).unwrap() - oracle.eval(z).unwrap();
            assert!(d.norm() < 1e-9, "{}", d.norm());
        }
    }

    #[test]
    fn perf_plant_blocks() {
        let (algo, b) = gd();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 1.0).unwrap();
        let ch = PerformanceChannel::gradient_noise(&algo);
        let pp = build_perf_plant(&algo, &b, &s, &ch).unwrap();
        assert_eq!(pp.bc2.rows(0, 1).amax(), 0.0);
        assert_eq!(pp.selected_b(), algo.b);
        let rate = build_rate_plant(&algo, &b, &s, 1.0).unwrap();
        assert!((pp.base.ac.clone() - rate.ac).amax() < 1e-14);

        let bad = PerformanceChannel { d_perf: eye(1), ..ch };
        assert!(matches!(build_perf_plant(&algo, &b, &s, &bad), Err(IqcError::Unsupported(_))));
    }

    #[test]
    fn kronecker_commutation() {
        let bnd = SectorBounds::new(1.0, 10.0).unwrap();
        let algo = make_named(NamedKind::Nm, &bnd, 1).unwrap();
        let s1 = ZamesFalbStructure::unstructured(1, 1, 1, 0.9).unwrap();
        let s3 = ZamesFalbStructure::unstructured(1, 1, 3, 0.9).unwrap();
        let p1 = build_rate_plant(&algo, &bnd, &s1, 0.9).unwrap();
        let p3 = build_rate_plant(&algo.lift(3), &bnd, &s3, 0.9).unwrap();
        assert!((kron_eye(&p1.ac, 3) - p3.ac).amax() < 1e-14);
        assert!((kron_eye(&p1.bc, 3) - p3.bc).amax() < 1e-14);
        assert!((kron_eye(&p1.cc, 3) - p3.cc).amax() < 1e-14);
        assert!((kron_eye(&p1.dc, 3) - p3.dc).amax() < 1e-14);
    }

    #[test]
    fn structured_identity_substitution() {
        let (algo, b) = gd();
        let lp = LoopData::structured(&algo, &eye(1), &eye(1), 0.0, 9.0).unwrap();
        let direct = LoopData::from_algorithm(&algo, &b);
        assert!((lp.a_nom - direct.a_nom).amax() < 1e-15);
        assert_eq!(lp.width, direct.width);
    }
}
