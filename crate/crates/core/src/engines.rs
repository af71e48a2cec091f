//! Drivers: rate bisection, H2 bounds, convex and BMI synthesis, and FDI checks.

use std::cell::Cell;
use std::time::Instant;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algorithms::{lower_bound_rate, AlgorithmRealization, SectorBounds};
use crate::error::{IqcError, Result};
use crate::linalg::{blkdiag, eye, kron_eye, max_herm_eig, spectral_radius, to_complex, vcat, zeros, CMat, Mat};
use crate::lmi::{
    assemble_bmi_fixed_p, assemble_convex_synth, assemble_convex_synth_perf, assemble_h2, assemble_rate,
    assemble_structured_synth, rate_lmi_value, reduce_algorithm, solve_bmi_fixed_p, solve_convex_synth, solve_h2, solve_rate,
    solve_structured_synth, strict_eps, BmiObjective, H2Certificate, RateCertificate, StructuredSynthesis, SynthesisResult,
};
use crate::multipliers::{m_delta, verify_membership_tol, ZamesFalbStructure};
use crate::plantbuild::{build_loop_perf_plant, build_loop_plant, AugmentedPlant, LoopData, PerformanceAugmentedPlant, PerformanceChannel};
use crate::sdp::SolveOptions;
use crate::statespace::StateSpace;

pub const FDI_SAMPLES: usize = 64;
const SIMPLEX_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    /// Defaults to the nominal spectral radius plus `1e-6`.
    pub rho_lo: Option<f64>,
    pub rho_hi: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        Self { rho_lo: None, rho_hi: 1.0, tol: 1e-4, max_iters: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdiReport {
    pub ok: bool,
    pub worst_eig: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub rho: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub best_rho: f64,
    pub certificate: RateCertificate,
    pub plant: AugmentedPlant,
    pub fdi: FdiReport,
    pub solves: usize,
    pub seconds: f64,
    pub log: Vec<BisectionStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Result {
    pub gamma: f64,
    pub certificate: H2Certificate,
    pub plant: PerformanceAugmentedPlant,
    pub fdi: FdiReport,
    pub solves: usize,
    pub seconds: f64,
}

fn unit_point(k: usize, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

fn herm_weighted(g: &CMat, w: &CMat) -> f64 {
    let h = g.adjoint() * w * g;
    max_herm_eig(&((&h + h.adjoint()) * Complex64::new(0.5, 0.0)))
}

fn fdi_scan(sys: &StateSpace, weight: &Mat, n_samples: usize) -> FdiReport {
    let w = to_complex(weight);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..n_samples {
        match sys.eval(unit_point(k, n_samples)) {
            Ok(g) => worst = worst.max(herm_weighted(&g, &w)),
            Err(_) => return FdiReport { ok: false, worst_eig: f64::INFINITY },
        }
    }
    FdiReport { ok: worst < 0.0, worst_eig: worst }
}

/// `Ψ(z)* M_Δ Ψ(z)` on equispaced points of the unit circle.
pub fn verify_fdi(certificate: &RateCertificate, plant: &AugmentedPlant, n_samples: usize) -> FdiReport {
    if certificate.p.nrows() != plant.nc() {
        return FdiReport { ok: false, worst_eig: f64::INFINITY };
    }
    fdi_scan(&plant.as_statespace(), &m_delta(&certificate.zf, &certificate.structure), n_samples)
}

/// FDI of the H2 inequality: uncertainty outputs weighted by `M_Δ`, performance output by `I`.
pub fn verify_fdi_h2(certificate: &H2Certificate, plant: &PerformanceAugmentedPlant, n_samples: usize) -> FdiReport {
    let b = &plant.base;
    let np = plant.cc2.nrows();
    let sys = StateSpace {
        a: b.ac.clone(),
        b: b.bc.clone(),
        c: vcat(&[&b.cc, &plant.cc2]),
        d: vcat(&[&b.dc, &zeros(np, b.bc.ncols())]),
    };
    let w = blkdiag(&[&m_delta(&certificate.zf, &certificate.structure), &eye(np)]);
    fdi_scan(&sys, &w, n_samples)
}

fn rate_at(lp: &LoopData, structure: &ZamesFalbStructure, rho: f64, options: &SolveOptions) -> Result<Option<(RateCertificate, AugmentedPlant)>> {
    let s = structure.with_rho(rho.min(1.0));
    let plant = build_loop_plant(lp, &s, rho)?;
    let lmi = match assemble_rate(&plant, &s) {
        Ok(l) => l,
        Err(IqcError::InfeasiblePrecondition(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(solve_rate(&lmi, options)?.map(|c| (c, plant)))
}

/// Smallest certifiable `ρ` for a loop, by bisection.
pub fn certify_loop_rate(
    lp: &LoopData,
    structure: &ZamesFalbStructure,
    config: &BisectionConfig,
    options: &SolveOptions,
) -> Result<RateResult> {
    let start = Instant::now();
    if structure.p != lp.q() {
        return Err(IqcError::Dimension("multiplier dimension does not match the loop".into()));
    }
    let mut lo = config.rho_lo.unwrap_or(lp.nominal_radius() + 1e-6);
    let mut hi = config.rho_hi;
    if !(hi > 0.0 && hi <= 1.0) {
        return Err(IqcError::Domain(format!("rho_hi must lie in (0, 1], got {hi}")));
    }
    let mut solves = 0;
    let mut log = Vec::new();

    solves += 1;
    let (mut cert, mut plant) = match rate_at(lp, structure, hi, options)? {
        Some(c) => c,
        None => {
            return Err(IqcError::NotCertifiable(format!("rate LMI infeasible at rho = {hi}")));
        }
    };
    log.push(BisectionStep { rho: hi, feasible: true });

    if lo < hi {
        solves += 1;
        if let Some(c) = rate_at(lp, structure, lo, options)? {
            log.push(BisectionStep { rho: lo, feasible: true });
            hi = lo;
            (cert, plant) = c;
        } else {
            log.push(BisectionStep { rho: lo, feasible: false });
        }
    } else {
        lo = hi;
    }
    let mut iters = 0;
    while hi - lo > config.tol && iters < config.max_iters {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        iters += 1;
        match rate_at(lp, structure, mid, options)? {
            Some(c) => {
                hi = mid;
                (cert, plant) = c;
                log.push(BisectionStep { rho: mid, feasible: true });
            }
            None => {
                lo = mid;
                log.push(BisectionStep { rho: mid, feasible: false });
            }
        }
    }
    let fdi = verify_fdi(&cert, &plant, FDI_SAMPLES);
    if !fdi.ok {
        return Err(IqcError::Solver(format!("certificate failed FDI verification (worst eigenvalue {:.3e})", fdi.worst_eig)));
    }
    Ok(RateResult { best_rho: hi, certificate: cert, plant, fdi, solves, seconds: start.elapsed().as_secs_f64(), log })
}

/// Smallest certifiable convergence rate of `algo` on `S(m, L)`.
pub fn certify_rate(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    config: &BisectionConfig,
    options: &SolveOptions,
) -> Result<RateResult> {
    certify_loop_rate(&LoopData::from_algorithm(algo, bounds), structure, config, options)
}

/// Feasibility of the rate LMI at a single `ρ`.
pub fn rate_feasible(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
    options: &SolveOptions,
) -> Result<Option<RateCertificate>> {
    Ok(rate_at(&LoopData::from_algorithm(algo, bounds), structure, rho, options)?.map(|(c, _)| c))
}

pub fn certify_loop_h2(
    lp: &LoopData,
    structure: &ZamesFalbStructure,
    channel: &PerformanceChannel,
    options: &SolveOptions,
) -> Result<H2Result> {
    let start = Instant::now();
    if lp.nominal_radius() >= 1.0 {
        return Err(IqcError::NotCertifiable("nominal loop is not stable".into()));
    }
    let s = structure.with_rho(1.0);
    let plant = build_loop_perf_plant(lp, &s, channel)?;
    let lmi = assemble_h2(&plant, &s).map_err(|e| match e {
        IqcError::InfeasiblePrecondition(m) => IqcError::NotCertifiable(m),
        other => other,
    })?;
    let cert = solve_h2(&lmi, options)?.ok_or_else(|| IqcError::NotCertifiable("H2 LMI infeasible".into()))?;
    let fdi = verify_fdi_h2(&cert, &plant, FDI_SAMPLES);
    if !fdi.ok {
        return Err(IqcError::Solver(format!("H2 certificate failed FDI verification (worst eigenvalue {:.3e})", fdi.worst_eig)));
    }
    Ok(H2Result { gamma: cert.gamma, certificate: cert, plant, fdi, solves: 1, seconds: start.elapsed().as_secs_f64() })
}

/// Robust H2 bound for gradient noise entering through `channel`.
pub fn certify_h2(
    algo: &AlgorithmRealization,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    channel: &PerformanceChannel,
    options: &SolveOptions,
) -> Result<H2Result> {
    certify_loop_h2(&LoopData::from_algorithm(algo, bounds), structure, channel, options)
}

// ---------------------------------------------------------------------------
// Synthesis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSynthesisOutcome {
    pub result: SynthesisResult,
    /// Rate certificate of the recovered algorithm at the design `ρ`.
    pub recertified: RateCertificate,
    /// H2 re-analysis of the recovered algorithm with channel `(B, C, 0)`.
    pub h2: Option<H2Certificate>,
    pub solves: usize,
    pub seconds: f64,
}

fn check_synthesis_certificate(res: &SynthesisResult, bounds: &SectorBounds) -> Result<Option<RateCertificate>> {
    let cert = res.rate_certificate();
    let plant = build_loop_plant(&LoopData::from_algorithm(&res.algorithm, bounds), &cert.structure, res.rho)?;
    let v = rate_lmi_value(&plant, &cert.p, &cert.zf, &cert.structure);
    let lam = crate::linalg::max_sym_eig(&v);
    if lam < 0.0 && verify_membership_tol(&cert.zf, &cert.structure, 1e-9) {
        Ok(Some(RateCertificate { margin: -lam, ..cert }))
    } else {
        Ok(None)
    }
}

/// Convex synthesis with mandatory re-certification of the recovered algorithm.
pub fn synthesize_convex(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    rho: f64,
    with_perf: bool,
    options: &SolveOptions,
) -> Result<ConvexSynthesisOutcome> {
    let start = Instant::now();
    let lmi = if with_perf {
        assemble_convex_synth_perf(n, p, bounds, structure, rho)?
    } else {
        assemble_convex_synth(n, p, bounds, structure, rho)?
    };
    let mut solves = 1;
    let res = solve_convex_synth(&lmi, options)?
        .ok_or_else(|| IqcError::NotCertifiable(format!("convex synthesis infeasible at rho = {rho}")))?;
    solves += 1;
    let recertified = match rate_feasible(&res.algorithm, bounds, &res.structure, rho, options)? {
        Some(c) => c,
        None => check_synthesis_certificate(&res, bounds)?
            .ok_or_else(|| IqcError::Solver("synthesized algorithm failed re-certification".into()))?,
    };
    let h2 = if with_perf {
        solves += 1;
        let ch = PerformanceChannel::synthesis(&res.algorithm);
        Some(certify_h2(&res.algorithm, bounds, &res.structure, &ch, options)?.certificate)
    } else {
        None
    };
    Ok(ConvexSynthesisOutcome { result: res, recertified, h2, solves, seconds: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Bisection tolerance for the initializer and rate iterations.
    pub rho_tol: f64,
    /// Iteration cap of the simplex refinement of the rate; 0 disables it.
    pub simplex_iters: u64,
}

impl Default for BmiConfig {
    fn default() -> Self {
        Self { max_iters: 30, rel_tol: 1e-3, rho_tol: 1e-4, simplex_iters: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiIteration {
    pub phase: BmiObjective,
    pub iter: usize,
    /// Objective after the step: `γ` for H2, certified `ρ` for rate.
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmiOutcome {
    pub algorithm: AlgorithmRealization,
    pub rho: f64,
    pub gamma: Option<f64>,
    pub rate: RateCertificate,
    pub h2: Option<H2Certificate>,
    pub initial_rho: f64,
    pub log: Vec<BmiIteration>,
    pub solves: usize,
    pub seconds: f64,
}

/// Best `ρ` of the structured initializer (no structure: `H1 = 0`, `T = I`).
pub fn structured_initializer(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    tol: f64,
    options: &SolveOptions,
) -> Result<(StructuredSynthesis, usize)> {
    bisect_structured(&zeros(p, p), &eye(p), bounds.m, bounds.l, n, lower_bound_rate(bounds.kappa()), tol, options)
}

/// Smallest `ρ` in `(lo, 1)` at which the structured synthesis is feasible.
#[allow(clippy::too_many_arguments)]
pub fn bisect_structured(
    h1: &Mat,
    t: &Mat,
    m2: f64,
    l2: f64,
    n: usize,
    lo: f64,
    tol: f64,
    options: &SolveOptions,
) -> Result<(StructuredSynthesis, usize)> {
    let mut solves = 1;
    let hi_rho = 1.0 - 1e-6;
    let mut best = solve_structured_synth(&assemble_structured_synth(h1, t, m2, l2, n, hi_rho)?, options)?
        .ok_or_else(|| IqcError::NotCertifiable("structured synthesis infeasible at rho = 1".into()))?;
    let (mut lo, mut hi) = (lo.max(1e-6), hi_rho);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        match solve_structured_synth(&assemble_structured_synth(h1, t, m2, l2, n, mid)?, options)? {
            Some(s) => {
                best = s;
                hi = mid;
            }
            None => lo = mid,
        }
    }
    Ok((best, solves))
}

/// BMI alternation from the structured initializer.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_bmi(
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    target_rho: f64,
    objective: BmiObjective,
    config: &BmiConfig,
    options: &SolveOptions,
) -> Result<BmiOutcome> {
    let start = Instant::now();
    let lb = lower_bound_rate(bounds.kappa());
    if !(target_rho > lb && target_rho < 1.0) {
        return Err(IqcError::Domain(format!("target rho must lie in ({lb:.6}, 1), got {target_rho}")));
    }
    let (init, mut solves) = structured_initializer(n, p, bounds, config.rho_tol.max(1e-4), options)?;
    let initial_rho = init.rho;
    let bis = BisectionConfig { tol: config.rho_tol, ..Default::default() };

    let mut algo = init.algorithm.clone();
    let mut current = certify_rate(&algo, bounds, structure, &bis, options)?;
    solves += current.solves;
    let mut log = Vec::new();

    // Rate phase: margin maximization at the current rate, then re-bisection.
    let rate_phase_done = |r: f64| objective == BmiObjective::H2 && r <= target_rho;
    let mut iter = 0;
    while !rate_phase_done(current.best_rho) && iter < config.max_iters {
        iter += 1;
        let fp = assemble_bmi_fixed_p(n, p, bounds, structure, current.best_rho, &current.certificate.p, None, BmiObjective::Rate)?;
        solves += 1;
        let cand = match solve_bmi_fixed_p(&fp, options)? {
            Some(c) => c,
            None => break,
        };
        let res = match certify_rate(&cand, bounds, structure, &bis, options) {
            Ok(r) => r,
            Err(IqcError::NotCertifiable(_)) => break,
            Err(e) => return Err(e),
        };
        solves += res.solves;
        let improved = res.best_rho < current.best_rho - 0.5 * config.rho_tol;
        log.push(BmiIteration { phase: BmiObjective::Rate, iter, objective: if improved { res.best_rho } else { current.best_rho }, accepted: improved });
        if !improved {
            break;
        }
        algo = cand;
        current = res;
    }

    if config.simplex_iters > 0 && !rate_phase_done(current.best_rho) {
        let stop = if objective == BmiObjective::H2 { target_rho } else { 0.0 };
        // The simplex is sensitive to its start, so both the initializer and the
        // alternation iterate are tried, each restarted while it improves.
        let mut best: Option<(f64, AlgorithmRealization)> = None;
        for seed in [&init.algorithm, &algo] {
            let mut from = seed.clone();
            let mut from_cost = f64::INFINITY;
            for _ in 0..SIMPLEX_RESTARTS {
                let (found, evals) = refine_rate_simplex(&from, n, p, bounds, structure, stop, config, options)?;
                solves += evals;
                match found {
                    Some((c, a)) if c < from_cost - 0.5 * config.rho_tol => {
                        from = a;
                        from_cost = c;
                    }
                    _ => break,
                }
                if from_cost <= stop {
                    break;
                }
            }
            if from_cost < best.as_ref().map_or(f64::INFINITY, |b| b.0) {
                best = Some((from_cost, from));
            }
            if from_cost <= stop {
                break;
            }
        }
        if let Some((_, cand)) = best {
            let res = certify_rate(&cand, bounds, structure, &bis, options)?;
            solves += res.solves;
            iter += 1;
            let improved = res.best_rho < current.best_rho;
            log.push(BmiIteration { phase: BmiObjective::Rate, iter, objective: res.best_rho.min(current.best_rho), accepted: improved });
            if improved {
                algo = cand;
                current = res;
            }
        }
    }

    if objective == BmiObjective::Rate {
        return Ok(BmiOutcome {
            rho: current.best_rho,
            gamma: None,
            rate: current.certificate,
            h2: None,
            algorithm: algo,
            initial_rho,
            log,
            solves,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if current.best_rho > target_rho {
        return Err(IqcError::NotCertifiable(format!(
            "could not reach target rho {target_rho:.6}; best certified {:.6}",
            current.best_rho
        )));
    }

    let h2_of = |a: &AlgorithmRealization| certify_h2(a, bounds, structure, &PerformanceChannel::synthesis(a), options);
    let mut rate_cert = rate_feasible(&algo, bounds, structure, target_rho, options)?
        .unwrap_or_else(|| current.certificate.clone());
    let mut h2 = h2_of(&algo)?;
    solves += 2;
    let mut gamma = h2.gamma;
    log.push(BmiIteration { phase: BmiObjective::H2, iter: 0, objective: gamma, accepted: true });

    for k in 1..=config.max_iters {
        let fp = assemble_bmi_fixed_p(
            n,
            p,
            bounds,
            structure,
            target_rho,
            &rate_cert.p,
            Some(&h2.certificate.pp),
            BmiObjective::H2,
        )?;
        solves += 1;
        let cand = match solve_bmi_fixed_p(&fp, options)? {
            Some(c) => c,
            None => break,
        };
        solves += 1;
        let cand_rate = match rate_feasible(&cand, bounds, structure, target_rho, options)? {
            Some(c) => c,
            None => {
                log.push(BmiIteration { phase: BmiObjective::H2, iter: k, objective: gamma, accepted: false });
                break;
            }
        };
        solves += 1;
        let cand_h2 = match h2_of(&cand) {
            Ok(h) => h,
            Err(IqcError::NotCertifiable(_)) | Err(IqcError::Solver(_)) => {
                log.push(BmiIteration { phase: BmiObjective::H2, iter: k, objective: gamma, accepted: false });
                break;
            }
            Err(e) => return Err(e),
        };
        // Ties keep the earlier iterate.
        if cand_h2.gamma < gamma {
            let rel = (gamma - cand_h2.gamma) / gamma;
            algo = cand;
            rate_cert = cand_rate;
            gamma = cand_h2.gamma;
            h2 = cand_h2;
            log.push(BmiIteration { phase: BmiObjective::H2, iter: k, objective: gamma, accepted: true });
            if rel < config.rel_tol {
                break;
            }
        } else {
            log.push(BmiIteration { phase: BmiObjective::H2, iter: k, objective: gamma, accepted: false });
            break;
        }
    }
    Ok(BmiOutcome {
        algorithm: algo,
        rho: target_rho,
        gamma: Some(gamma),
        rate: rate_cert,
        h2: Some(h2.certificate),
        initial_rho,
        log,
        solves,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Certified rate of the scalar canonical algorithm with free parameters `θ`,
/// penalized above 1 when it cannot be certified.
struct SimplexRate<'a> {
    n: usize,
    bounds: &'a SectorBounds,
    structure: ZamesFalbStructure,
    bisection: BisectionConfig,
    options: &'a SolveOptions,
    solves: Cell<usize>,
}

impl CostFunction for SimplexRate<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let Ok(algo) = canonical_from_params(theta, self.n, 1) else {
            return Ok(3.0);
        };
        let r = nominal_radius(&algo, self.bounds);
        if !(r < 1.0) {
            return Ok(1.0 + r.min(1.0));
        }
        Ok(match certify_rate(&algo, self.bounds, &self.structure, &self.bisection, self.options) {
            Ok(res) => {
                self.solves.set(self.solves.get() + res.solves);
                res.best_rho
            }
            Err(_) => 1.0 + 0.5 * r,
        })
    }
}

/// Free entries `(Ā[:, 1..], B̄)` of the scalar canonical form, column-major.
fn canonical_params(algo: &AlgorithmRealization, n: usize, p: usize) -> Result<Vec<f64>> {
    let red = reduce_algorithm(algo, p)?;
    if red.nx() != n {
        return Err(IqcError::Dimension(format!("expected {n} states, got {}", red.nx())));
    }
    Ok(red.a.columns(1, n - 1).iter().chain(red.b.iter()).copied().collect())
}

fn canonical_from_params(theta: &[f64], n: usize, p: usize) -> Result<AlgorithmRealization> {
    let mut a = zeros(n, n);
    a[(0, 0)] = 1.0;
    a.columns_mut(1, n - 1).copy_from_slice(&theta[..n * (n - 1)]);
    let b = Mat::from_column_slice(n, 1, &theta[n * (n - 1)..]);
    let mut c = zeros(1, n);
    c[(0, 0)] = 1.0;
    let (a, b, c) = (kron_eye(&a, p), kron_eye(&b, p), kron_eye(&c, p));
    AlgorithmRealization::new(a, b, c.clone(), c.clone(), Some(c.transpose()))
}

/// Nelder–Mead descent of the certified rate over the canonical parameters,
/// started at `algo`. Rates are invariant under the `⊗ I_p` lifting, so the
/// search runs on the scalar algorithm. Stops early once `stop` is reached.
#[allow(clippy::too_many_arguments)]
fn refine_rate_simplex(
    algo: &AlgorithmRealization,
    n: usize,
    p: usize,
    bounds: &SectorBounds,
    structure: &ZamesFalbStructure,
    stop: f64,
    config: &BmiConfig,
    options: &SolveOptions,
) -> Result<(Option<(f64, AlgorithmRealization)>, usize)> {
    let x0 = canonical_params(algo, n, p)?;
    let mut simplex = vec![x0.clone()];
    for i in 0..x0.len() {
        let mut v = x0.clone();
        v[i] += 0.1 * x0[i].abs().max(0.1);
        simplex.push(v);
    }
    let cost = SimplexRate {
        n,
        bounds,
        structure: ZamesFalbStructure::new(structure.ell_causal, structure.ell_anticausal, 1, structure.class, 1.0)?,
        bisection: BisectionConfig { tol: config.rho_tol, ..Default::default() },
        options,
        solves: Cell::new(0),
    };
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-7)
        .map_err(|e| IqcError::Argument(e.to_string()))?;
    let res = Executor::new(cost, solver)
        .configure(|st| st.max_iters(config.simplex_iters).target_cost(stop))
        .run()
        .map_err(|e| IqcError::Solver(e.to_string()))?;
    let evals = res.problem.problem.as_ref().map_or(0, |c| c.solves.get());
    let best = match &res.state.best_param {
        Some(theta) if res.state.best_cost < 1.0 => canonical_from_params(theta, n, p).ok().map(|a| (res.state.best_cost, a)),
        _ => None,
    };
    Ok((best, evals))
}

/// Nominal spectral radius of `A + mBC`.
pub fn nominal_radius(algo: &AlgorithmRealization, bounds: &SectorBounds) -> f64 {
    spectral_radius(&algo.nominal(bounds.m))
}

/// Strictness used by the rate problem of a plant (exposed for reports).
pub fn rate_eps(plant: &AugmentedPlant) -> f64 {
    strict_eps(&zeros(plant.nc() + plant.bc.ncols(), plant.nc() + plant.bc.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{gd_rate, make_named, NamedKind};

    #[test]
    fn gd_bisection() {
        let b = SectorBounds::new(1.0, 10.0).unwrap();
        let algo = make_named(NamedKind::Gd, &b, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 1.0).unwrap();
        let r = certify_rate(&algo, &b, &s, &BisectionConfig::default(), &SolveOptions::default()).unwrap();
        assert!((r.best_rho - gd_rate(10.0)).abs() < 1e-3, "{}", r.best_rho);
        assert!(r.fdi.ok);
        let infeasible_below = r.log.iter().filter(|s| !s.feasible).all(|s| s.rho < r.best_rho);
        assert!(infeasible_below);
    }

    #[test]
    fn perturbed_certificate_is_detected() {
        let b = SectorBounds::new(1.0, 10.0).unwrap();
        let algo = make_named(NamedKind::Gd, &b, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 1.0).unwrap();
        let r = certify_rate(&algo, &b, &s, &BisectionConfig::default(), &SolveOptions::default()).unwrap();
        let mut bad = r.certificate.clone();
        bad.zf = bad.zf.scaled(-1.0);
        assert!(!verify_fdi(&bad, &r.plant, FDI_SAMPLES).ok);
    }

    #[test]
    fn heavy_ball_not_certifiable() {
        let b = SectorBounds::new(1.0, 100.0).unwrap();
        let algo = make_named(NamedKind::Hb, &b, 1).unwrap();
        let s = ZamesFalbStructure::unstructured(1, 0, 1, 1.0).unwrap();
        let r = certify_rate(&algo, &b, &s, &BisectionConfig::default(), &SolveOptions::default());
        assert!(matches!(r, Err(IqcError::NotCertifiable(_))));
    }
}
