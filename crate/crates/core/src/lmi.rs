//! Matrix-inequality systems for analysis and synthesis, assembled as [`SdpProblem`]s.
//!
//! Feasibility problems whose inequalities are homogeneous in the decision
//! variables are decided by maximizing a common margin `t` under a unit box on
//! the certificate entries; the problem is declared feasible only when the
//! re-evaluated certificate clears `ε = 1e-7·(1 + ‖F0‖)`.

use serde::{Deserialize, Serialize};

use crate::algorithms::{canonical_c, from_structured, shift_a1, shift_a2, shift_b1, shift_b2, AlgorithmRealization, SectorBounds, StructuredControllerForm};
use crate::error::{IqcError, Result};
use crate::linalg::{blkdiag, eigenvalues, eye, hcat, kron_reduce, max_sym_eig, min_sym_eig, spectral_radius, symmetrize, vcat, zeros, Mat};
use crate::multipliers::{m_delta, verify_membership_tol, MultiplierClass, MultiplierVars, ZamesFalbParameters, ZamesFalbStructure};
use crate::plantbuild::{build_loop_perf_plant, build_loop_plant, AugmentedPlant, LoopData, PerformanceAugmentedPlant, PerformanceChannel};
use crate::sdp::{solve, Affine, LinearConstraint, LinearKind, SdpProblem, SdpSolution, Sense, SolveOptions, SolveStatus, VarBlock};
use crate::statespace::StateSpace;

/// Relative strictness margin.
pub const EPS_REL: f64 = 1e-7;

/// Relative strictness used for the structured synthesis inequality.
pub const STRUCTURED_EPS_REL: f64 = 1e-10;

/// Margin demanded of the row/column sums inside the solver, so that sign
/// projection afterwards keeps them nonnegative.
const SUM_MARGIN: f64 = 1e-9;

/// Tolerance of the membership re-check on extracted multipliers.
const MEMBERSHIP_TOL: f64 = 1e-9;

pub fn strict_eps(constant: &Mat) -> f64 {
    EPS_REL * (1.0 + constant.norm())
}

/// `[A B; I 0; C D]ᵀ blkdiag(P, −P, M) [A B; I 0; C D]`.
pub fn kyp_expr(a: &Mat, b: &Mat, c: &Mat, d: &Mat, p: &Affine, m: &Affine) -> Affine {
    let n = a.nrows();
    let ab = hcat(&[a, b]);
    let i0 = hcat(&[&eye(n), &zeros(n, b.ncols())]);
    let cd = hcat(&[c, d]);
    &(&p.congruence(&ab) - &p.congruence(&i0)) + &m.congruence(&cd)
}

pub fn kyp_value(a: &Mat, b: &Mat, c: &Mat, d: &Mat, p: &Mat, m: &Mat) -> Mat {
    symmetrize(&kyp_expr(a, b, c, d, &Affine::constant(p.clone()), &Affine::constant(m.clone())).constant)
}

/// Diagonal `d` such that `(D⁻¹AD, D⁻¹B, CD)` has comparable off-diagonal row
/// and column norms per state (Osborne sweeps, clamped to `[1e-6, 1e6]`).
///
/// Multiplier states of wide sectors are scaled by `L − m` relative to the
/// algorithm states; without this the certificate `P` is badly conditioned and
/// margins fall below solver accuracy.
pub fn balance_states(a: &Mat, b: &Mat, c: &Mat) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..30 {
        let mut changed = false;
        for i in 0..n {
            let mut r = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                if j != i {
                    r += (a[(i, j)] * d[j] / d[i]).powi(2);
                    col += (a[(j, i)] * d[i] / d[j]).powi(2);
                }
            }
            r += b.row(i).iter().map(|v| (v / d[i]).powi(2)).sum::<f64>();
            col += c.column(i).iter().map(|v| (v * d[i]).powi(2)).sum::<f64>();
            if r == 0.0 || col == 0.0 {
                continue;
            }
            let f = (r.sqrt() / col.sqrt()).sqrt();
            if (f - 1.0).abs() > 0.05 {
                d[i] = (d[i] * f).clamp(1e-6, 1e6);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Augmented plant in balanced state coordinates `x = D x̃`.
#[derive(Debug, Clone)]
pub struct BalancedPlant {
    pub plant: AugmentedPlant,
    pub d: Vec<f64>,
}

impl BalancedPlant {
    pub fn new(plant: &AugmentedPlant) -> Self {
        Self::with_scaling(plant, balance_states(&plant.ac, &plant.bc, &plant.cc))
    }

    /// Applies a given diagonal scaling `x = D x̃`.
    pub fn with_scaling(plant: &AugmentedPlant, d: Vec<f64>) -> Self {
        let n = d.len();
        assert_eq!(n, plant.nc(), "scaling length");
        let mut out = plant.clone();
        for i in 0..n {
            for j in 0..n {
                out.ac[(i, j)] *= d[j] / d[i];
            }
            out.bc.row_mut(i).scale_mut(1.0 / d[i]);
            out.cc.column_mut(i).scale_mut(d[i]);
        }
        Self { plant: out, d }
    }

    /// `D⁻¹`, mapping balanced certificates back: `P = D⁻¹ P̃ D⁻¹`.
    pub fn d_inv(&self) -> Mat {
        Mat::from_diagonal(&nalgebra::DVector::from_iterator(self.d.len(), self.d.iter().map(|v| 1.0 / v)))
    }

    pub fn unscale(&self, p_tilde: &Mat) -> Mat {
        let di = self.d_inv();
        symmetrize(&(&di * p_tilde * &di))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// `|x_i| ≤ bound` on every original variable.
    Box(f64),
    Free,
}

#[derive(Debug, Clone)]
pub struct MarginSolution {
    pub x: Vec<f64>,
    pub margin: f64,
    pub solution: SdpSolution,
}

/// Maximizes a common margin `t ≤ 1` by which every definite block is strict.
pub fn maximize_margin(problem: &SdpProblem, norm: Normalization, options: &SolveOptions) -> Result<MarginSolution> {
    let n = problem.n_vars;
    let mut pr = problem.clone();
    let t = pr.scalar("margin");
    let te = t.expr();
    for blk in pr.blocks.iter_mut() {
        let d = blk.dim();
        match blk.sense {
            Sense::NegDef => blk.expr = &blk.expr + &te.scalar_times(&eye(d)),
            Sense::PosDef => blk.expr = &blk.expr - &te.scalar_times(&eye(d)),
            Sense::Zero => continue,
        }
        blk.eps = 0.0;
    }
    if let Normalization::Box(bound) = norm {
        for i in 0..n {
            for s in [1.0, -1.0] {
                pr.linear.push(LinearConstraint {
                    name: format!("box[{i}]"),
                    kind: LinearKind::Le,
                    coeffs: vec![(i, s)],
                    constant: -bound,
                });
            }
        }
    }
    pr.le_zero("margin_cap", &(&te - &Affine::eye(1)));
    pr.minimize(&(-&te));
    let sol = solve(&pr, options);
    match sol.status {
        SolveStatus::Error => Err(IqcError::Solver(sol.message.clone())),
        SolveStatus::Infeasible => Ok(MarginSolution { x: vec![0.0; n], margin: f64::NEG_INFINITY, solution: sol }),
        _ => {
            let margin = sol.x[t.offset];
            Ok(MarginSolution { x: sol.x[..n].to_vec(), margin, solution: sol })
        }
    }
}

/// Minimizes the objective, then backs off by a relative `1e-4` and re-centers
/// by maximizing the common margin. Minimizers sit on the boundary of the
/// strict inequalities, where solver inaccuracy can leave them infeasible.
pub fn solve_with_backoff(problem: &SdpProblem, options: &SolveOptions) -> Result<Option<Vec<f64>>> {
    let sol = solve(problem, options);
    match sol.status {
        SolveStatus::Error => return Err(IqcError::Solver(sol.message)),
        SolveStatus::Infeasible => return Ok(None),
        _ => {}
    }
    let f = problem.objective_value(&sol.x);
    let mut pr = problem.clone();
    pr.linear.push(LinearConstraint {
        name: "backoff".into(),
        kind: LinearKind::Le,
        coeffs: problem.objective.clone(),
        constant: -(f + 1e-4 * f.abs() + 1e-9),
    });
    pr.objective.clear();
    match maximize_margin(&pr, Normalization::Free, options) {
        Ok(ms) if ms.margin > 0.0 => Ok(Some(ms.x)),
        _ => Ok(Some(sol.x)),
    }
}

fn unit_circle_eigenvalue(a: &Mat) -> bool {
    if a.nrows() == 0 {
        return false;
    }
    match eigenvalues(a) {
        Some(ev) => ev.iter().any(|l| (l.norm() - 1.0).abs() < 1e-9),
        None => (spectral_radius(a) - 1.0).abs() < 1e-9,
    }
}

/// Stacks `[G; I]` so that a weight can act on input/output pairs.
fn with_identity(g: &StateSpace) -> (Mat, Mat) {
    (vcat(&[&g.c, &zeros(g.nu(), g.nx())]), vcat(&[&g.d, &eye(g.nu())]))
}

/// Generic KYP feasibility problem in a fresh `P`; `M` weights `[y; u]`.
pub fn kyp_block(g: &StateSpace, m: &Mat) -> Result<(SdpProblem, VarBlock)> {
    if unit_circle_eigenvalue(&g.a) {
        return Err(IqcError::Precondition("A has an eigenvalue on the unit circle".into()));
    }
    let q = g.ny() + g.nu();
    if m.shape() != (q, q) {
        return Err(IqcError::Dimension(format!("M must be {q}x{q}")));
    }
    let (c, d) = with_identity(g);
    let mut pr = SdpProblem::new();
    let p = pr.symmetric("P", g.nx());
    let expr = kyp_expr(&g.a, &g.b, &c, &d, &p.expr(), &Affine::constant(m.clone()));
    let eps = strict_eps(&expr.constant);
    pr.neg_def("kyp", expr, eps);
    Ok((pr, p))
}

/// Decides a KYP block; the problem is not homogeneous, so no box is imposed.
pub fn kyp_feasible(g: &StateSpace, m: &Mat, options: &SolveOptions) -> Result<bool> {
    let (pr, p) = kyp_block(g, m)?;
    let eps = pr.blocks[0].eps;
    let ms = maximize_margin(&pr, Normalization::Free, options)?;
    if !(ms.margin >= eps) {
        return Ok(false);
    }
    let pv = p.value(&ms.x);
    let (c, d) = with_identity(g);
    let v = kyp_value(&g.a, &g.b, &c, &d, &pv, m);
    Ok(max_sym_eig(&v) <= -0.5 * eps)
}

// ---------------------------------------------------------------------------
// Rate analysis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub p: Mat,
    pub zf: ZamesFalbParameters,
    pub rho: f64,
    pub structure: ZamesFalbStructure,
    /// `−λmax` of the rate LMI at this certificate.
    pub margin: f64,
}

impl RateCertificate {
    /// Certificate for the `p`-fold Kronecker lift.
    pub fn lift(&self, p: usize) -> Self {
        Self {
            p: crate::linalg::kron_eye(&self.p, p),
            zf: ZamesFalbParameters { m: self.zf.m.iter().map(|x| crate::linalg::kron_eye(x, p)).collect() },
            rho: self.rho,
            structure: ZamesFalbStructure { p: self.structure.p * p, ..self.structure },
            margin: self.margin,
        }
    }
}

/// Rate LMI evaluated at concrete values.
pub fn rate_lmi_value(plant: &AugmentedPlant, p: &Mat, zf: &ZamesFalbParameters, structure: &ZamesFalbStructure) -> Mat {
    kyp_value(&plant.ac, &plant.bc, &plant.cc, &plant.dc, p, &m_delta(zf, structure))
}

#[derive(Debug, Clone)]
pub struct RateLmi {
    pub problem: SdpProblem,
    /// Certificate in balanced coordinates; see [`RateLmi::p_value`].
    pub p: VarBlock,
    pub mult: MultiplierVars,
    pub plant: AugmentedPlant,
    pub balanced: BalancedPlant,
    pub structure: ZamesFalbStructure,
}

impl RateLmi {
    /// `P` in the coordinates of `plant`.
    pub fn p_value(&self, x: &[f64]) -> Mat {
        self.balanced.unscale(&self.p.value(x))
    }
}

/// Rate feasibility problem for an augmented plant.
pub fn assemble_rate(plant: &AugmentedPlant, structure: &ZamesFalbStructure) -> Result<RateLmi> {
    assemble_rate_scaled(plant, structure, None)
}

/// Rate problem in coordinates scaled by `d` (balanced when `None`).
pub fn assemble_rate_scaled(plant: &AugmentedPlant, structure: &ZamesFalbStructure, d: Option<&[f64]>) -> Result<RateLmi> {
    if (structure.rho - plant.rho).abs() > 1e-12 {
        return Err(IqcError::Argument(format!(
            "multiplier rho {} differs from plant rho {}",
            structure.rho, plant.rho
        )));
    }
    let r = spectral_radius(&plant.ac);
    if r >= 1.0 {
        return Err(IqcError::InfeasiblePrecondition(format!(
            "nominal spectral radius {:.6} is not below rho = {}",
            r * plant.rho,
            plant.rho
        )));
    }
    if d.is_some_and(|d| d.len() != plant.nc() || d.iter().any(|v| !(*v > 0.0 && v.is_finite()))) {
        return Err(IqcError::Argument("scaling must be positive with one entry per state".into()));
    }
    let balanced = match d {
        Some(d) => BalancedPlant::with_scaling(plant, d.to_vec()),
        None => BalancedPlant::new(plant),
    };
    let bp = &balanced.plant;
    let mut pr = SdpProblem::new();
    let p = pr.symmetric("P", plant.nc());
    let mult = MultiplierVars::create(&mut pr, "zf", structure, SUM_MARGIN);
    let expr = kyp_expr(&bp.ac, &bp.bc, &bp.cc, &bp.dc, &p.expr(), &mult.m_delta());
    let eps = strict_eps(&expr.constant);
    pr.neg_def("rate", expr, eps);
    Ok(RateLmi { problem: pr, p, mult, plant: plant.clone(), balanced, structure: *structure })
}

/// Solves a rate problem; `None` means infeasible at this `ρ`.
pub fn solve_rate(lmi: &RateLmi, options: &SolveOptions) -> Result<Option<RateCertificate>> {
    let eps = lmi.problem.blocks[0].eps;
    let ms = maximize_margin(&lmi.problem, Normalization::Box(1.0), options)?;
    if !(ms.margin >= eps) {
        return Ok(None);
    }
    let zf = lmi.mult.extract(&ms.x);
    if !verify_membership_tol(&zf, &lmi.structure, MEMBERSHIP_TOL) {
        return Ok(None);
    }
    // Strictness is judged in the balanced coordinates the solver saw.
    let lam = max_sym_eig(&rate_lmi_value(&lmi.balanced.plant, &lmi.p.value(&ms.x), &zf, &lmi.structure));
    if lam > -0.5 * eps {
        return Ok(None);
    }
    let p = lmi.p_value(&ms.x);
    let margin = -max_sym_eig(&rate_lmi_value(&lmi.plant, &p, &zf, &lmi.structure));
    Ok(Some(RateCertificate { p, zf, rho: lmi.plant.rho, structure: lmi.structure, margin }))
}

/// Scalar algorithm `Ā, B̄, C̄, D̄` with `A = Ā ⊗ I_p` etc.
pub fn reduce_algorithm(algo: &AlgorithmRealization, p: usize) -> Result<AlgorithmRealization> {
    let red = |m: &Mat, what: &str| {
        kron_reduce(m, p, 1e-12).ok_or_else(|| IqcError::Structure(format!("{what} is not of the form X ⊗ I_{p}")))
    };
    if algo.p % p != 0 {
        return Err(IqcError::Structure(format!("p = {} is not a multiple of {p}", algo.p)));
    }
    let a = red(&algo.a, "A")?;
    let b = red(&algo.b, "B")?;
    let c = red(&algo.c, "C")?;
    let d = red(&algo.d, "D")?;
    let dd = red(&algo.ddagger, "D†")?;
    AlgorithmRealization::new(a, b, c, d, Some(dd))
}

/// Rate problem on the scalar factor of a Kronecker-structured algorithm.
pub fn assemble_rate_reduced(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<RateLmi> {
    if structure.class != MultiplierClass::Unstructured {
        return Err(IqcError::Structure("reduction requires unstructured multipliers".into()));
    }
    if structure.p != algo.p {
        return Err(IqcError::Dimension("multiplier dimension differs from algorithm p".into()));
    }
    let reduced = reduce_algorithm(algo, algo.p)?;
    let s1 = ZamesFalbStructure { p: 1, rho, ..*structure };
    let plant = build_loop_plant(&LoopData::from_algorithm(&reduced, bounds), &s1, rho)?;
    assemble_rate(&plant, &s1)
}

/// Rate problem after substituting the structured gradient model.
pub fn assemble_structured_rate(
    algo: &AlgorithmRealization,
    h1: &Mat,
    t: &Mat,
    m2: f64,
    l2: f64,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<RateLmi> {
    let lp = LoopData::structured(algo, h1, t, m2, l2)?;
    let plant = build_loop_plant(&lp, structure, rho)?;
    assemble_rate(&plant, structure)
}

// ---------------------------------------------------------------------------
// H2 analysis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Certificate {
    pub pp: Mat,
    pub zf: ZamesFalbParameters,
    pub z: Mat,
    pub gamma: f64,
    pub structure: ZamesFalbStructure,
}

#[derive(Debug, Clone)]
pub struct H2Lmi {
    pub problem: SdpProblem,
    /// Certificate in balanced coordinates; see [`H2Lmi::pp_value`].
    pub pp: VarBlock,
    pub z: VarBlock,
    pub t: VarBlock,
    pub mult: MultiplierVars,
    pub plant: PerformanceAugmentedPlant,
    pub balanced: PerformanceAugmentedPlant,
    pub scaling: BalancedPlant,
    pub structure: ZamesFalbStructure,
}

impl H2Lmi {
    pub fn pp_value(&self, x: &[f64]) -> Mat {
        self.scaling.unscale(&self.pp.value(x))
    }
}

fn balance_perf(plant: &PerformanceAugmentedPlant) -> (PerformanceAugmentedPlant, BalancedPlant) {
    let scaling = BalancedPlant::new(&plant.base);
    let mut out = plant.clone();
    out.base = scaling.plant.clone();
    for (i, &d) in scaling.d.iter().enumerate() {
        out.bc2.row_mut(i).scale_mut(1.0 / d);
        out.cc2.column_mut(i).scale_mut(d);
    }
    (out, scaling)
}

/// H2 LMI (uncertainty and performance outputs) at concrete values.
pub fn h2_lmi_value(plant: &PerformanceAugmentedPlant, pp: &Mat, zf: &ZamesFalbParameters, structure: &ZamesFalbStructure) -> Mat {
    let b = &plant.base;
    let c2 = hcat(&[&plant.cc2, &zeros(plant.cc2.nrows(), b.bc.ncols())]);
    rate_lmi_value(b, pp, zf, structure) + c2.transpose() * c2
}

pub fn assemble_h2(plant: &PerformanceAugmentedPlant, structure: &ZamesFalbStructure) -> Result<H2Lmi> {
    let structure = structure.with_rho(1.0);
    let base = &plant.base;
    let r = spectral_radius(&base.ac);
    if r >= 1.0 {
        return Err(IqcError::InfeasiblePrecondition(format!("nominal spectral radius {r:.6} is not below 1")));
    }
    let (n_psi, nx) = (base.n_psi, plant.n_t.nrows());
    let (bal, scaling) = balance_perf(plant);
    let bb = &bal.base;
    let mut pr = SdpProblem::new();
    let pp = pr.symmetric("Pp", base.nc());
    let mult = MultiplierVars::create(&mut pr, "zf", &structure, SUM_MARGIN);
    let qp = plant.bc2.ncols();
    let z = pr.symmetric("Z", qp);
    let t = pr.scalar("t");

    let c2 = hcat(&[&bal.cc2, &zeros(bal.cc2.nrows(), bb.bc.ncols())]);
    let expr = &kyp_expr(&bb.ac, &bb.bc, &bb.cc, &bb.dc, &pp.expr(), &mult.m_delta())
        + &Affine::constant(c2.transpose() * &c2);
    let eps = strict_eps(&expr.constant);
    pr.neg_def("h2", expr, eps);

    // Bc2 is zero on the multiplier states.
    let s = pp.expr().view(n_psi, n_psi, nx, nx);
    let sb = s.rmul(&bal.bc2.rows(n_psi, nx).into_owned());
    let schur = Affine::blocks(&[vec![s.clone(), sb.clone()], vec![sb.transpose(), z.expr()]]);
    pr.pos_def("schur", schur, EPS_REL);
    pr.pos_def("Pp", pp.expr(), EPS_REL);
    pr.le_zero("trace", &(&z.expr().trace() - &t.expr()));
    pr.minimize(&t.expr());
    Ok(H2Lmi { problem: pr, pp, z, t, mult, plant: plant.clone(), balanced: bal, scaling, structure })
}

/// Minimizes the H2 bound; `None` when the problem is infeasible.
pub fn solve_h2(lmi: &H2Lmi, options: &SolveOptions) -> Result<Option<H2Certificate>> {
    let Some(x) = solve_with_backoff(&lmi.problem, options)? else {
        return Ok(None);
    };
    let x = &x;
    let pt = symmetrize(&lmi.pp.value(x));
    let zf = lmi.mult.extract(x);
    let z = lmi.z.value(x);
    let eps = lmi.problem.blocks[0].eps;
    if !verify_membership_tol(&zf, &lmi.structure, MEMBERSHIP_TOL) {
        return Ok(None);
    }
    if max_sym_eig(&h2_lmi_value(&lmi.balanced, &pt, &zf, &lmi.structure)) > -0.1 * eps || min_sym_eig(&pt) <= 0.0 {
        return Ok(None);
    }
    let pp = lmi.pp_value(x);
    let gamma = h2_bound(&lmi.plant, &pp);
    Ok(Some(H2Certificate { pp, zf, z, gamma, structure: lmi.structure }))
}

/// `√tr(Bc2ᵀ Pp Bc2)`, the bound certified by a valid `Pp`.
pub fn h2_bound(plant: &PerformanceAugmentedPlant, pp: &Mat) -> f64 {
    (plant.bc2.transpose() * pp * &plant.bc2).trace().max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// Convex synthesis

/// Constant multiplier-side data of the synthesis inequalities for canonical `C`.
struct SynthTemplate {
    /// `[A_Δ, ρ⁻¹ B_Δ,y C, B_Δ,w]`.
    x1: Mat,
    /// `[Cc Dc]`.
    cd: Mat,
    n_psi: usize,
}

fn synth_template(n: usize, p: usize, width: f64, structure: &ZamesFalbStructure, rho: f64) -> Result<SynthTemplate> {
    let np = n * p;
    let lp = LoopData { a_nom: zeros(np, np), b: zeros(np, p), c: canonical_c(n, p), width };
    let pl = build_loop_plant(&lp, structure, rho)?;
    let n_psi = pl.n_psi;
    let x1 = hcat(&[&pl.ac.rows(0, n_psi).into_owned(), &pl.bc.rows(0, n_psi).into_owned()]);
    let cd = hcat(&[&pl.cc, &pl.dc]);
    Ok(SynthTemplate { x1, cd, n_psi })
}

/// `[0, ρ⁻¹(A + m B C), B]` for affine `A`, `B` (or `QA`, `QB`).
fn x2_expr(a: &Affine, b: &Affine, c: &Mat, m: f64, n_psi: usize, rho: f64) -> Affine {
    let np = a.nrows();
    let abc = &(a + &b.rmul(c).scale(m)).scale(1.0 / rho);
    Affine::hcat(&[Affine::zeros(np, n_psi), abc.clone(), b.clone()])
}

/// First block column `[I; 0; …]` fixed by `(A − I)D† = 0`.
fn first_block_column(n: usize, p: usize) -> Mat {
    canonical_c(n, p).transpose()
}

#[derive(Debug, Clone)]
struct PerfSynthVars {
    z: VarBlock,
}

#[derive(Debug, Clone)]
pub struct ConvexSynthLmi {
    pub problem: SdpProblem,
    pub n: usize,
    pub p: usize,
    pub bounds: SectorBounds,
    pub rho: f64,
    pub structure: ZamesFalbStructure,
    pub p11: VarBlock,
    pub p22: VarBlock,
    pub qa: Affine,
    pub qb: VarBlock,
    pub mult: MultiplierVars,
    perf: Option<PerfSynthVars>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub algorithm: AlgorithmRealization,
    pub rho: f64,
    pub p11: Mat,
    pub p22: Mat,
    pub qa: Mat,
    pub qb: Mat,
    pub zf: ZamesFalbParameters,
    pub structure: ZamesFalbStructure,
    pub gamma: Option<f64>,
}

impl SynthesisResult {
    /// `P = blkdiag(P11, P22)` with the synthesized multiplier.
    pub fn rate_certificate(&self) -> RateCertificate {
        RateCertificate {
            p: blkdiag(&[&self.p11, &self.p22]),
            zf: self.zf.clone(),
            rho: self.rho,
            structure: self.structure,
            margin: 0.0,
        }
    }
}

fn check_synth_args(n: usize, p: usize, rho: f64) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(IqcError::Argument("n and p must be positive".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(IqcError::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(())
}

fn assemble_convex_common(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<ConvexSynthLmi> {
    check_synth_args(n, p, rho)?;
    let structure = structure.with_rho(rho);
    if structure.p != p {
        return Err(IqcError::Dimension("multiplier dimension differs from p".into()));
    }
    let np = n * p;
    let tpl = synth_template(n, p, bounds.width(), &structure, rho)?;
    let c = canonical_c(n, p);

    let mut pr = SdpProblem::new();
    let p11 = pr.symmetric("P11", tpl.n_psi);
    let p22 = pr.symmetric("P22", np);
    let qa_rest = if n > 1 { Some(pr.full("QA", np, np - p)) } else { None };
    let qb = pr.full("QB", np, p);
    let mult = MultiplierVars::create(&mut pr, "zf", &structure, SUM_MARGIN);

    let p22e = p22.expr();
    let qa = match &qa_rest {
        Some(v) => Affine::hcat(&[p22e.view(0, 0, np, p), v.expr()]),
        None => p22e.view(0, 0, np, p),
    };
    let y = p22_schur_rows(&qa, &qb.expr(), &c, bounds.m, tpl.n_psi, rho);
    let u = &(&p11.expr().congruence(&tpl.x1)
        - &Affine::blkdiag(&[p11.expr(), p22e.clone(), Affine::zeros(p, p)]))
        + &mult.m_delta().congruence(&tpl.cd);
    let lmi = Affine::blocks(&[vec![-&p22e, y.clone()], vec![y.transpose(), u]]);
    pr.neg_def("rate", lmi, EPS_REL);

    Ok(ConvexSynthLmi {
        problem: pr,
        n,
        p,
        bounds: *bounds,
        rho,
        structure,
        p11,
        p22,
        qa,
        qb,
        mult,
        perf: None,
    })
}

fn p22_schur_rows(qa: &Affine, qb: &Affine, c: &Mat, m: f64, n_psi: usize, rho: f64) -> Affine {
    x2_expr(qa, qb, c, m, n_psi, rho)
}

/// Rate-only convex synthesis (`P12 = 0`).
pub fn assemble_convex_synth(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<ConvexSynthLmi> {
    assemble_convex_common(n, p, bounds, structure, rho)
}

/// Convex synthesis with the H2 channel `(B, C, 0)` and shared `P22`.
pub fn assemble_convex_synth_perf(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<ConvexSynthLmi> {
    let mut lmi = assemble_convex_common(n, p, bounds, structure, rho)?;
    let sp = structure.with_rho(1.0);
    let tpl = synth_template(n, p, bounds.width(), &sp, 1.0)?;
    let c = canonical_c(n, p);
    let pr = &mut lmi.problem;
    let pp11 = pr.symmetric("Pp11", tpl.n_psi);
    let mult = MultiplierVars::create(pr, "zfp", &sp, SUM_MARGIN);
    let z = pr.symmetric("Z", p);
    let t = pr.scalar("t");

    let p22e = lmi.p22.expr();
    let qbe = lmi.qb.expr();
    let y = x2_expr(&lmi.qa, &qbe, &c, bounds.m, tpl.n_psi, 1.0);
    let c2 = hcat(&[&zeros(p, tpl.n_psi), &c, &zeros(p, p)]);
    let u = &(&(&pp11.expr().congruence(&tpl.x1)
        - &Affine::blkdiag(&[pp11.expr(), p22e.clone(), Affine::zeros(p, p)]))
        + &mult.m_delta().congruence(&tpl.cd))
        + &Affine::constant(c2.transpose() * &c2);
    let perf = Affine::blocks(&[vec![-&p22e, y.clone()], vec![y.transpose(), u]]);
    let eps = strict_eps(&perf.constant);
    pr.neg_def("h2", perf, eps);
    pr.pos_def("Pp11", pp11.expr(), EPS_REL);
    pr.pos_def("P22", p22e.clone(), EPS_REL);
    let schur = Affine::blocks(&[vec![p22e, qbe.clone()], vec![qbe.transpose(), z.expr()]]);
    pr.pos_def("schur", schur, EPS_REL);
    pr.le_zero("trace", &(&z.expr().trace() - &t.expr()));
    pr.minimize(&t.expr());
    lmi.perf = Some(PerfSynthVars { z });
    Ok(lmi)
}

/// `A = P22⁻¹ QA`, `B = P22⁻¹ QB` with canonical `C = D`.
pub fn recover_algorithm(p22: &Mat, qa: &Mat, qb: &Mat, n: usize, p: usize) -> Result<AlgorithmRealization> {
    let chol = p22
        .clone()
        .cholesky()
        .ok_or_else(|| IqcError::Solver("recovered P22 is not positive definite".into()))?;
    let mut a = chol.solve(qa);
    let b = chol.solve(qb);
    a.view_mut((0, 0), (n * p, p)).copy_from(&first_block_column(n, p));
    let c = canonical_c(n, p);
    AlgorithmRealization::new(a, b, c.clone(), c.clone(), Some(c.transpose()))
}

/// Solves a convex synthesis problem; `None` means infeasible.
pub fn solve_convex_synth(lmi: &ConvexSynthLmi, options: &SolveOptions) -> Result<Option<SynthesisResult>> {
    let x = match &lmi.perf {
        None => {
            let ms = maximize_margin(&lmi.problem, Normalization::Box(1.0), options)?;
            if !(ms.margin >= EPS_REL) {
                return Ok(None);
            }
            ms.x
        }
        Some(_) => {
            let sol = solve(&lmi.problem, options);
            match sol.status {
                SolveStatus::Error => return Err(IqcError::Solver(sol.message)),
                SolveStatus::Infeasible => return Ok(None),
                _ => sol.x,
            }
        }
    };
    let p22 = symmetrize(&lmi.p22.value(&x));
    if min_sym_eig(&p22) <= 0.0 {
        return Ok(None);
    }
    let qa = lmi.qa.eval(&x);
    let qb = lmi.qb.value(&x);
    let algorithm = match recover_algorithm(&p22, &qa, &qb, lmi.n, lmi.p) {
        Ok(a) => a,
        Err(IqcError::Solver(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let gamma = lmi.perf.as_ref().map(|pv| pv.z.value(&x).trace().max(0.0).sqrt());
    Ok(Some(SynthesisResult {
        algorithm,
        rho: lmi.rho,
        p11: symmetrize(&lmi.p11.value(&x)),
        p22,
        qa,
        qb,
        zf: lmi.mult.extract(&x),
        structure: lmi.structure,
        gamma,
    }))
}

// ---------------------------------------------------------------------------
// BMI half-steps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmiObjective {
    Rate,
    H2,
}

#[derive(Debug, Clone)]
pub struct BmiFixedPLmi {
    pub problem: SdpProblem,
    pub n: usize,
    pub p: usize,
    pub a_free: Option<VarBlock>,
    pub b: VarBlock,
    pub mult: MultiplierVars,
    pub mult_p: Option<MultiplierVars>,
    pub objective: BmiObjective,
    /// Margin variable of the rate step.
    pub margin: Option<VarBlock>,
}

fn split_p(p: &Mat, n_psi: usize) -> (Mat, Mat, Mat) {
    let nc = p.nrows();
    let nx = nc - n_psi;
    (
        p.view((0, 0), (n_psi, n_psi)).into_owned(),
        p.view((0, n_psi), (n_psi, nx)).into_owned(),
        p.view((n_psi, n_psi), (nx, nx)).into_owned(),
    )
}

/// Schur-form synthesis inequality with `P` fixed; affine in `A`, `B`, `M`.
#[allow(clippy::too_many_arguments)]
fn fixed_p_block(
    tpl: &SynthTemplate,
    p_full: &Mat,
    a: &Affine,
    b: &Affine,
    c: &Mat,
    m: f64,
    rho: f64,
    m_delta: &Affine,
    perf_c: Option<&Mat>,
) -> Affine {
    let (p11, p12, p22) = split_p(p_full, tpl.n_psi);
    let q = b.ncols();
    let x2 = x2_expr(a, b, c, m, tpl.n_psi, rho);
    let x1 = &tpl.x1;
    let cross = x2.lmul(&(x1.transpose() * &p12));
    let mut u = &(&(&Affine::constant(x1.transpose() * &p11 * x1) + &cross) + &cross.transpose())
        - &Affine::constant(blkdiag(&[p_full, &zeros(q, q)]));
    u = &u + &m_delta.congruence(&tpl.cd);
    if let Some(c2) = perf_c {
        let c2f = hcat(&[&zeros(c2.nrows(), tpl.n_psi), c2, &zeros(c2.nrows(), q)]);
        u = &u + &Affine::constant(c2f.transpose() * &c2f);
    }
    let y = x2.lmul(&p22);
    Affine::blocks(&[vec![Affine::constant(-&p22), y.clone()], vec![y.transpose(), u]])
}

/// Fixed-`P` step over `(A, B, M[, M_p, Z])` with canonical `C = D`.
///
/// With `objective = Rate` the common margin of the rate inequality is maximized
/// (`p_perf` is ignored); with `H2` the trace bound is minimized subject to both
/// inequalities.
#[allow(clippy::too_many_arguments)]
pub fn assemble_bmi_fixed_p(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
    p_rate: &Mat,
    p_perf: Option<&Mat>,
    objective: BmiObjective,
) -> Result<BmiFixedPLmi> {
    check_synth_args(n, p, rho)?;
    let structure = structure.with_rho(rho);
    let np = n * p;
    let tpl = synth_template(n, p, bounds.width(), &structure, rho)?;
    if p_rate.shape() != (tpl.n_psi + np, tpl.n_psi + np) {
        return Err(IqcError::Dimension("fixed P has the wrong size".into()));
    }
    let (_, _, p22) = split_p(p_rate, tpl.n_psi);
    if min_sym_eig(&symmetrize(&p22)) <= 0.0 {
        return Err(IqcError::Precondition("P22 is not positive definite".into()));
    }
    let c = canonical_c(n, p);

    let mut pr = SdpProblem::new();
    let a_free = if n > 1 { Some(pr.full("A", np, np - p)) } else { None };
    let b = pr.full("B", np, p);
    let mult = MultiplierVars::create(&mut pr, "zf", &structure, SUM_MARGIN);
    let first = Affine::constant(first_block_column(n, p));
    let a = match &a_free {
        Some(v) => Affine::hcat(&[first, v.expr()]),
        None => first,
    };
    let be = b.expr();
    let rate = fixed_p_block(&tpl, p_rate, &a, &be, &c, bounds.m, rho, &mult.m_delta(), None);

    let mult_p;
    match objective {
        BmiObjective::Rate => {
            return assemble_bmi_fixed_p_scaled(n, p, bounds, &structure, rho, p_rate, &vec![1.0; p_rate.nrows()]);
        }
        BmiObjective::H2 => {
            pr.neg_def("rate", rate, 2.0 * EPS_REL);
            let pp = p_perf.ok_or_else(|| IqcError::Argument("H2 step needs a fixed Pp".into()))?;
            let sp = structure.with_rho(1.0);
            let tplp = synth_template(n, p, bounds.width(), &sp, 1.0)?;
            if pp.shape() != (tplp.n_psi + np, tplp.n_psi + np) {
                return Err(IqcError::Dimension("fixed Pp has the wrong size".into()));
            }
            let (_, _, pp22) = split_p(pp, tplp.n_psi);
            if min_sym_eig(&symmetrize(&pp22)) <= 0.0 {
                return Err(IqcError::Precondition("Pp22 is not positive definite".into()));
            }
            let mp = MultiplierVars::create(&mut pr, "zfp", &sp, SUM_MARGIN);
            let z = pr.symmetric("Z", p);
            let t = pr.scalar("t");
            let perf = fixed_p_block(&tplp, pp, &a, &be, &c, bounds.m, 1.0, &mp.m_delta(), Some(&c));
            pr.neg_def("h2", perf, 0.0);
            let sb = be.lmul(&pp22);
            let schur = Affine::blocks(&[vec![Affine::constant(pp22.clone()), sb.clone()], vec![sb.transpose(), z.expr()]]);
            pr.pos_def("schur", schur, 0.0);
            pr.le_zero("trace", &(&z.expr().trace() - &t.expr()));
            pr.minimize(&t.expr());
            mult_p = Some(mp);
        }
    }
    Ok(BmiFixedPLmi { problem: pr, n, p, a_free, b, mult, mult_p, objective, margin: None })
}

/// Fixed-`P` rate step maximizing `t` subject to `T F T ≼ −t I`, where `F` is
/// the rate inequality, `T = blkdiag(D, I)` and `|M_ij| ≤ 1`.
///
/// With `P = D⁻¹ P̃ D⁻¹` this is the objective of the box-normalized analysis
/// problem in the same scaled coordinates, so alternating the two steps
/// cannot decrease `t`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_bmi_fixed_p_scaled(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
    p_rate: &Mat,
    d: &[f64],
) -> Result<BmiFixedPLmi> {
    check_synth_args(n, p, rho)?;
    let structure = structure.with_rho(rho);
    let np = n * p;
    let tpl = synth_template(n, p, bounds.width(), &structure, rho)?;
    let nc = tpl.n_psi + np;
    if p_rate.shape() != (nc, nc) || d.len() != nc {
        return Err(IqcError::Dimension("fixed P or scaling has the wrong size".into()));
    }
    let (_, _, p22) = split_p(p_rate, tpl.n_psi);
    if min_sym_eig(&symmetrize(&p22)) <= 0.0 {
        return Err(IqcError::Precondition("P22 is not positive definite".into()));
    }
    let c = canonical_c(n, p);

    let mut pr = SdpProblem::new();
    let a_free = if n > 1 { Some(pr.full("A", np, np - p)) } else { None };
    let b = pr.full("B", np, p);
    let mult = MultiplierVars::create(&mut pr, "zf", &structure, SUM_MARGIN);
    for v in &mult.vars {
        for i in v.offset..v.offset + v.len() {
            for s in [1.0, -1.0] {
                pr.linear.push(LinearConstraint { name: format!("box[{i}]"), kind: LinearKind::Le, coeffs: vec![(i, s)], constant: -1.0 });
            }
        }
    }
    let t = pr.scalar("t");
    let first = Affine::constant(first_block_column(n, p));
    let a = match &a_free {
        Some(v) => Affine::hcat(&[first, v.expr()]),
        None => first,
    };
    let block = fixed_p_block(&tpl, p_rate, &a, &b.expr(), &c, bounds.m, rho, &mult.m_delta(), None);
    let q = block.nrows() - np - nc;
    let mut scale = vec![1.0; np];
    scale.extend_from_slice(d);
    scale.extend(std::iter::repeat(1.0).take(q));
    let sd = Mat::from_diagonal(&nalgebra::DVector::from_vec(scale));
    let mut corner = zeros(block.nrows(), block.nrows());
    corner.view_mut((np, np), (nc + q, nc + q)).fill_with_identity();
    let block = &block.congruence(&sd) + &t.expr().scalar_times(&corner);
    pr.neg_def("rate", block, 0.0);
    pr.le_zero("margin_cap", &(&t.expr() - &Affine::eye(1)));
    pr.minimize(&(-&t.expr()));
    Ok(BmiFixedPLmi { problem: pr, n, p, a_free, b, mult, mult_p: None, objective: BmiObjective::Rate, margin: Some(t) })
}

/// Candidate `(A, B)` of a rate step with its margin `t`, which may be negative.
pub fn solve_bmi_fixed_p_margin(lmi: &BmiFixedPLmi, options: &SolveOptions) -> Result<Option<(AlgorithmRealization, f64)>> {
    let t = lmi.margin.as_ref().ok_or_else(|| IqcError::Argument("not a margin step".into()))?;
    let sol = solve(&lmi.problem, options);
    match sol.status {
        SolveStatus::Error => return Err(IqcError::Solver(sol.message)),
        SolveStatus::Infeasible => return Ok(None),
        _ => {}
    }
    Ok(algorithm_from(lmi, &sol.x).map(|a| (a, sol.x[t.offset])))
}

fn algorithm_from(lmi: &BmiFixedPLmi, x: &[f64]) -> Option<AlgorithmRealization> {
    let (n, p) = (lmi.n, lmi.p);
    let mut a = zeros(n * p, n * p);
    a.view_mut((0, 0), (n * p, p)).copy_from(&first_block_column(n, p));
    if let Some(v) = &lmi.a_free {
        a.view_mut((0, p), (n * p, n * p - p)).copy_from(&v.value(x));
    }
    let b = lmi.b.value(x);
    let c = canonical_c(n, p);
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    AlgorithmRealization::new(a, b, c.clone(), c.clone(), Some(c.transpose())).ok()
}

/// Candidate `(A, B)` from a fixed-`P` step, or `None` if the step failed.
pub fn solve_bmi_fixed_p(lmi: &BmiFixedPLmi, options: &SolveOptions) -> Result<Option<AlgorithmRealization>> {
    let x = match lmi.objective {
        BmiObjective::Rate => match solve_bmi_fixed_p_margin(lmi, options)? {
            Some((algo, t)) if t > 0.0 => return Ok(Some(algo)),
            _ => return Ok(None),
        },
        BmiObjective::H2 => {
            let sol = solve(&lmi.problem, options);
            match sol.status {
                SolveStatus::Error => return Err(IqcError::Solver(sol.message)),
                SolveStatus::Infeasible => return Ok(None),
                _ => sol.x,
            }
        }
    };
    Ok(algorithm_from(lmi, &x))
}

/// Fixed-`(A, B)` step: the rate problem for a frozen algorithm.
pub fn assemble_bmi_fixed_ab(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
) -> Result<RateLmi> {
    let s = structure.with_rho(rho);
    let plant = build_loop_plant(&LoopData::from_algorithm(algo, bounds), &s, rho)?;
    assemble_rate(&plant, &s)
}

/// Fixed-`(A, B)` H2 step with the channel `(B, C, 0)`.
pub fn assemble_bmi_fixed_ab_h2(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
) -> Result<H2Lmi> {
    let s = structure.with_rho(1.0);
    let plant = build_loop_perf_plant(&LoopData::from_algorithm(algo, bounds), &s, &PerformanceChannel::synthesis(algo))?;
    assemble_h2(&plant, &s)
}

// ---------------------------------------------------------------------------
// Structured state-feedback synthesis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredSynthesis {
    pub algorithm: AlgorithmRealization,
    pub k: Mat,
    pub q: Mat,
    pub m: Mat,
    pub rho: f64,
    /// `λmin` of the synthesis LMI at the returned `(Q, M)`.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct StructuredSynthLmi {
    pub problem: SdpProblem,
    pub q: VarBlock,
    pub m: VarBlock,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
}

/// S-procedure synthesis for gradients `H1 z + Tᵀ∇H2(T z)`, `H2 ∈ S(m2, L2)`.
pub fn assemble_structured_synth(h1: &Mat, t: &Mat, m2: f64, l2: f64, n: usize, rho: f64) -> Result<StructuredSynthLmi> {
    let p = h1.nrows();
    check_synth_args(n, p, rho)?;
    if h1.shape() != (p, p) || t.ncols() != p || t.nrows() == 0 {
        return Err(IqcError::Dimension("H1 must be square and T must have p columns".into()));
    }
    if min_sym_eig(&symmetrize(h1)) < -1e-12 {
        return Err(IqcError::Argument("H1 must be positive semidefinite".into()));
    }
    if !(m2 > 0.0 && l2 >= m2 && l2.is_finite()) {
        return Err(IqcError::Argument(format!("need 0 < m2 <= L2, got m2 = {m2}, L2 = {l2}")));
    }
    let q = t.nrows();
    let np = n * p;
    let (a1, b1, a2, b2) = (shift_a1(n, p), shift_b1(n, p), shift_a2(n, p), shift_b2(n, p));
    let c = canonical_c(n, p);
    let beta = 0.5 * (l2 + m2);
    let tt = t.transpose() * t;
    let abar = &a2 + &b2 * h1 * &c * &a1 + &b2 * &tt * &c * &a1 * beta;
    let bbar = &b1 + &b2 * h1 * &c * &b1 + &b2 * &tt * &c * &b1 * beta;
    let gbar = &b2 * t.transpose() * (0.5 * (l2 - m2));

    // The S-procedure multiplier λ is kept as a variable (the printed form fixes
    // λ = 1); this makes the inequality homogeneous so it can be box-normalized.
    let mut pr = SdpProblem::new();
    let qv = pr.symmetric("Q", np);
    let mv = pr.full("M", p, np);
    let lam = pr.scalar("lambda").expr();
    let (qe, me) = (qv.expr(), mv.expr());
    let r13 = &qe.lmul(&abar) + &me.lmul(&bbar);
    let r23 = &qe.lmul(&(t * &c * &a1)) + &me.lmul(&(t * &c * &b1));
    let z = |r: usize, c: usize| Affine::zeros(r, c);
    let lg = lam.scalar_times(&gbar);
    let li = lam.scalar_times(&eye(q));
    let lmi = Affine::blocks(&[
        vec![qe.clone(), z(np, q), r13.clone(), lg.clone()],
        vec![z(q, np), li.clone(), r23.clone(), z(q, q)],
        vec![r13.transpose(), r23.transpose(), qe.scale(rho * rho), z(np, q)],
        vec![lg.transpose(), z(q, q), z(q, np), li],
    ]);
    pr.pos_def("structured", lmi, 0.0);
    Ok(StructuredSynthLmi { problem: pr, q: qv, m: mv, n, p, rho })
}

pub fn solve_structured_synth(lmi: &StructuredSynthLmi, options: &SolveOptions) -> Result<Option<StructuredSynthesis>> {
    let ms = maximize_margin(&lmi.problem, Normalization::Box(1.0), options)?;
    if !(ms.margin > 0.0) {
        return Ok(None);
    }
    let q = symmetrize(&lmi.q.value(&ms.x));
    let m = lmi.m.value(&ms.x);
    let check = symmetrize(&lmi.problem.blocks[0].expr.eval(&ms.x));
    let lam = min_sym_eig(&check);
    // Homogeneous and badly scaled at small ρ: strictness is judged relative
    // to the size of the evaluated inequality.
    if lam < STRUCTURED_EPS_REL * (1.0 + check.norm()) {
        return Ok(None);
    }
    let chol = match q.clone().cholesky() {
        Some(c) => c,
        None => return Ok(None),
    };
    let k = chol.solve(&m.transpose()).transpose();
    let form = StructuredControllerForm::from_gain(&k, lmi.n, lmi.p)?;
    let algorithm = from_structured(&form, lmi.p, lmi.n)?;
    Ok(Some(StructuredSynthesis { algorithm, k, q, m, rho: lmi.rho, margin: lam }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{gd_rate, make_named, NamedKind};
    use crate::linalg::from_rows;
    use crate::plantbuild::build_rate_plant;
    use crate::statespace::scalar;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    fn rate_feasible(kind: NamedKind, m: f64, l: f64, lc: usize, rho: f64) -> bool {
        let b = SectorBounds::new(m, l).unwrap();
        let algo = make_named(kind, &b, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(lc, 0, 1, rho).unwrap();
        let plant = build_rate_plant(&algo, &b, &s, rho).unwrap();
        match assemble_rate(&plant, &s) {
            Ok(lmi) => solve_rate(&lmi, &opts()).unwrap().is_some(),
            Err(IqcError::InfeasiblePrecondition(_)) => false,
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn kyp_small_gain() {
        let g = scalar(0.5, 1.0, 1.0, 0.0);
        assert!(kyp_feasible(&g, &from_rows(&[vec![1.0, 0.0], vec![0.0, -4.41]]), &opts()).unwrap());
        assert!(!kyp_feasible(&g, &from_rows(&[vec![1.0, 0.0], vec![0.0, -3.61]]), &opts()).unwrap());
        assert!(!kyp_feasible(&g, &zeros(2, 2), &opts()).unwrap());
        assert!(kyp_feasible(&g, &from_rows(&[vec![0.0, 0.0], vec![0.0, -1.0]]), &opts()).unwrap());
    }

    #[test]
    fn kyp_rejects_unit_circle() {
        let g = scalar(1.0, 1.0, 1.0, 0.0);
        assert!(matches!(kyp_block(&g, &eye(2)), Err(IqcError::Precondition(_))));
    }

    #[test]
    fn gd_rate_bracket() {
        assert!(rate_feasible(NamedKind::Gd, 1.0, 10.0, 1, 0.83));
        assert!(!rate_feasible(NamedKind::Gd, 1.0, 10.0, 1, 0.80));
        assert!(gd_rate(10.0) < 0.83);
    }

    #[test]
    fn heavy_ball_infeasible_at_large_kappa() {
        assert!(!rate_feasible(NamedKind::Hb, 1.0, 100.0, 1, 1.0));
    }

    #[test]
    fn reduced_counts() {
        let b = SectorBounds::new(1.0, 10.0).unwrap();
        let algo = make_named(NamedKind::Gd, &b, 3).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 3, 0.83).unwrap();
        let lmi = assemble_rate_reduced(&algo, &b, &s, 0.83).unwrap();
        assert_eq!(lmi.p.rows, 3);
        assert_eq!(lmi.problem.n_vars, 6 + 2);
        let mut bad = algo.clone();
        bad.a[(0, 1)] = 0.3;
        assert!(matches!(reduce_algorithm(&bad, 3), Err(IqcError::Structure(_))));
    }

    #[test]
    fn convex_synthesis_round_trip() {
        let b = SectorBounds::new(1.0, 10.0).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 0.95).unwrap();
        let lmi = assemble_convex_synth(2, 1, &b, &s, 0.95).unwrap();
        let res = solve_convex_synth(&lmi, &opts()).unwrap().expect("feasible");
        let cert = res.rate_certificate();
        let plant = build_rate_plant(&res.algorithm, &b, &s, 0.95).unwrap();
        let v = rate_lmi_value(&plant, &cert.p, &cert.zf, &cert.structure);
        assert!(max_sym_eig(&v) < 0.0);

        let s = s.with_rho(0.5);
        let lmi = assemble_convex_synth(2, 1, &b, &s, 0.5).unwrap();
        assert!(solve_convex_synth(&lmi, &opts()).unwrap().is_none());
    }

    #[test]
    fn structured_linear_plant_is_fast() {
        let h1 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 10.0, 4.0]));
        let t = from_rows(&[vec![2.0, -7.0, 0.0, 5.0], vec![-1.0, 4.0, -3.0, 2.0], vec![0.0, -2.0, 1.0, 0.0]]);
        let lmi = assemble_structured_synth(&h1, &t, 1.0, 1.0, 2, 0.1).unwrap();
        let res = solve_structured_synth(&lmi, &opts()).unwrap().expect("feasible");
        let lp = LoopData::structured(&res.algorithm, &h1, &t, 1.0, 1.0).unwrap();
        assert!(lp.nominal_radius() < 0.1 + 1e-6);
    }

    #[test]
    fn h2_linear_limit() {
        let b = SectorBounds::new(1.0, 1.0).unwrap();
        let algo = make_named(NamedKind::Gd, &b, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 1.0).unwrap();
        let plant = crate::plantbuild::build_perf_plant(&algo, &b, &s, &PerformanceChannel::gradient_noise(&algo)).unwrap();
        let lmi = assemble_h2(&plant, &s).unwrap();
        let cert = solve_h2(&lmi, &opts()).unwrap().expect("feasible");
        assert!((cert.gamma - 1.0).abs() < 1e-2, "gamma = {}", cert.gamma);
    }
}
