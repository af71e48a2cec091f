//! Acceptance gate. Runs every criterion and prints one PASS/FAIL line each.

use std::time::Instant;

use iqc_core::algorithms::{gd_rate, lower_bound_rate, make_named, nm_modified_rate, tmm_rate, AlgorithmRealization, NamedKind, SectorBounds};
use iqc_core::engines::{
    bisect_structured, certify_h2, certify_loop_rate, certify_rate, synthesize_bmi, synthesize_convex, verify_fdi, verify_fdi_h2, BisectionConfig,
    BmiConfig, H2Result, RateResult, FDI_SAMPLES,
};
use iqc_core::linalg::{from_rows, Mat};
use iqc_core::lmi::{assemble_rate, assemble_rate_reduced, solve_rate, BmiObjective};
use iqc_core::multipliers::ZamesFalbStructure;
use iqc_core::plantbuild::{build_loop_plant, structured_bounds, LoopData, PerformanceChannel};
use iqc_core::sampling::{sample_function, simulate_h2, FunctionKind};
use iqc_core::sdp::SolveOptions;
use iqc_core::IqcError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Default)]
struct Ledger {
    rates: Vec<(String, f64, f64)>,
    rate_certs: Vec<RateResult>,
    h2_certs: Vec<H2Result>,
    fdi_extra: Vec<(String, bool, f64)>,
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

fn zf(lc: usize, la: usize) -> ZamesFalbStructure {
    ZamesFalbStructure::unstructured(lc, la, 1, 1.0).unwrap()
}

fn named(kind: NamedKind, m: f64, l: f64) -> (AlgorithmRealization, SectorBounds) {
    let b = SectorBounds::new(m, l).unwrap();
    (make_named(kind, &b, 1).unwrap(), b)
}

fn rate(ledger: &mut Ledger, label: &str, kind: NamedKind, kappa: f64, lc: usize) -> Result<f64, IqcError> {
    let (a, b) = named(kind, 1.0, kappa);
    let r = certify_rate(&a, &b, &zf(lc, 0), &BisectionConfig::default(), &opts())?;
    let rho = r.best_rho;
    ledger.rates.push((label.to_string(), kappa, rho));
    ledger.rate_certs.push(r);
    Ok(rho)
}

type Outcome = (bool, String);

fn c1(l: &mut Ledger) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for kappa in [2.0, 10.0, 100.0] {
        let t = Instant::now();
        match rate(l, "gd", NamedKind::Gd, kappa, 1) {
            Ok(rho) => {
                let err = (rho - gd_rate(kappa)).abs();
                let secs = t.elapsed().as_secs_f64();
                ok &= err < 1e-3;
                detail.push(format!("κ={kappa}: ρ={rho:.5} err={err:.1e} ({secs:.2}s)"));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("κ={kappa}: {e}"));
            }
        }
    }
    (ok, detail.join("; "))
}

fn c2(l: &mut Ledger) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for kappa in [10.0, 100.0] {
        match rate(l, "tmm", NamedKind::Tmm, kappa, 1) {
            Ok(rho) => {
                let err = (rho - tmm_rate(kappa)).abs();
                ok &= err < 5e-3;
                detail.push(format!("κ={kappa}: ρ={rho:.5} err={err:.1e}"));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("κ={kappa}: {e}"));
            }
        }
    }
    (ok, detail.join("; "))
}

fn c3(l: &mut Ledger) -> Outcome {
    match rate(l, "nm-mod", NamedKind::NmMod, 10.0, 1) {
        Ok(rho) => {
            let err = (rho - nm_modified_rate(10.0)).abs();
            (err < 5e-3, format!("κ=10: ρ={rho:.5} expected {:.5} err={err:.1e}", nm_modified_rate(10.0)))
        }
        Err(e) => (false, e.to_string()),
    }
}

fn c4(l: &mut Ledger) -> Outcome {
    let big = rate(l, "hb", NamedKind::Hb, 100.0, 1);
    let small = rate(l, "hb", NamedKind::Hb, 2.0, 1);
    let big_ok = matches!(big, Err(IqcError::NotCertifiable(_)));
    let small_ok = matches!(small, Ok(r) if r < 1.0);
    (big_ok && small_ok, format!("κ=100: {:?}; κ=2: {:?}", big.map(|r| format!("{r:.4}")), small.map(|r| format!("{r:.4}"))))
}

/// Runs a small rate sweep so the lower-bound check also covers grid points.
fn c5(l: &mut Ledger) -> Outcome {
    let grid: Vec<f64> = (0..6).map(|i| 10f64.powf(0.1 + 2.9 * i as f64 / 5.0)).collect();
    for &k in &grid {
        for (name, kind) in [("gd", NamedKind::Gd), ("nm", NamedKind::Nm), ("tmm", NamedKind::Tmm)] {
            let _ = rate(l, name, kind, k, 1);
        }
    }
    let bad: Vec<_> = l
        .rates
        .iter()
        .filter(|(_, k, r)| *r < lower_bound_rate(*k) - 1e-3)
        .map(|(n, k, r)| format!("{n}@{k:.2}={r:.4}"))
        .collect();
    (bad.is_empty(), format!("{} rates checked; violations: {:?}", l.rates.len(), bad))
}

fn lyapunov_h2(a: &Mat, b: &Mat, c: &Mat) -> f64 {
    // Gramian by repeated squaring: W = Σ (Aᵀ)^k CᵀC A^k.
    let mut w = c.transpose() * c;
    let mut ak = a.clone();
    for _ in 0..60 {
        w = &w + ak.transpose() * &w * &ak;
        ak = &ak * &ak;
    }
    (b.transpose() * w * b).trace().sqrt()
}

fn c6(l: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut fails = Vec::new();
    for kind in [NamedKind::Gd, NamedKind::Nm, NamedKind::Tmm, NamedKind::Hb] {
        for _ in 0..3 {
            let design = SectorBounds::new(1.0, 10.0).unwrap();
            let algo = make_named(kind, &design, 1).unwrap();
            let c = rng.gen_range(1.0..10.0);
            let b = SectorBounds::new(c, c).unwrap();
            let a_nom = algo.nominal(c);
            let oracle = lyapunov_h2(&a_nom, &algo.b, &algo.d);
            match certify_h2(&algo, &b, &zf(1, 0), &PerformanceChannel::gradient_noise(&algo), &opts()) {
                Ok(r) => {
                    let rel = (r.gamma - oracle).abs() / oracle;
                    worst = worst.max(rel);
                    n += 1;
                    l.h2_certs.push(r);
                }
                Err(e) => fails.push(format!("{}@{c:.2}: {e}", kind.name())),
            }
        }
    }
    (fails.is_empty() && worst < 0.01, format!("{n} instances, worst relative error {worst:.2e}; failures {fails:?}"))
}

fn h2_at(l: &mut Ledger, kind: NamedKind, kappa: f64, lc: usize) -> Result<f64, IqcError> {
    let (a, b) = named(kind, 1.0, kappa);
    let r = certify_h2(&a, &b, &zf(lc, 0), &PerformanceChannel::gradient_noise(&a), &opts())?;
    let g = r.gamma;
    l.h2_certs.push(r);
    Ok(g)
}

fn c7(l: &mut Ledger) -> (Outcome, Option<[f64; 3]>) {
    let gd = h2_at(l, NamedKind::Gd, 100.0, 4);
    let nm = h2_at(l, NamedKind::Nm, 100.0, 4);
    let tmm = h2_at(l, NamedKind::Tmm, 100.0, 4);
    match (gd, nm, tmm) {
        (Ok(g), Ok(n), Ok(t)) => ((g < n && n < t, format!("γ_GD={g:.4} γ_NM={n:.4} γ_TMM={t:.4}")), Some([g, n, t])),
        (g, n, t) => ((false, format!("{g:?} {n:?} {t:?}")), None),
    }
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kinds = [NamedKind::Gd, NamedKind::Nm, NamedKind::Tmm, NamedKind::NmMod, NamedKind::Hb];
    let mut disagree = 0;
    let mut feasible = 0;
    for i in 0..20 {
        let kind = kinds[i % kinds.len()];
        let kappa = 10f64.powf(rng.gen_range(0.2..2.0));
        let b = SectorBounds::new(1.0, kappa).unwrap();
        let scalar = make_named(kind, &b, 1).unwrap();
        let p = if i % 2 == 0 { 2 } else { 3 };
        let lifted = scalar.lift(p);
        let rho = rng.gen_range(lower_bound_rate(kappa)..1.0);
        let s = ZamesFalbStructure::unstructured(1, 0, p, rho).unwrap();
        let full = build_loop_plant(&LoopData::from_algorithm(&lifted, &b), &s, rho)
            .and_then(|pl| assemble_rate(&pl, &s))
            .and_then(|lmi| solve_rate(&lmi, &opts()))
            .map(|c| c.is_some())
            .unwrap_or(false);
        let reduced = assemble_rate_reduced(&lifted, &b, &s, rho)
            .and_then(|lmi| solve_rate(&lmi, &opts()))
            .map(|c| c.is_some())
            .unwrap_or(false);
        if full != reduced {
            disagree += 1;
        }
        feasible += full as usize;
    }
    (disagree == 0, format!("20 instances ({feasible} feasible), {disagree} disagreements"))
}

fn c9(l: &mut Ledger) -> Outcome {
    let b = SectorBounds::new(1.0, 10.0).unwrap();
    let s = zf(1, 0);
    let hi = gd_rate(10.0) + 0.01;
    let lo = lower_bound_rate(10.0) - 0.01;
    let feas = synthesize_convex(2, 1, &b, &s, hi, false, &opts());
    let infeas = synthesize_convex(2, 1, &b, &s, lo, false, &opts());
    let ok_hi = feas.is_ok();
    if let Ok(o) = &feas {
        l.rates.push(("convex".into(), 10.0, o.result.rho));
        if let Ok(r) = certify_rate(&o.result.algorithm, &b, &s, &BisectionConfig::default(), &opts()) {
            l.rates.push(("convex-recert".into(), 10.0, r.best_rho));
            l.rate_certs.push(r);
        }
    }
    let ok_lo = matches!(infeas, Err(IqcError::NotCertifiable(_)));
    (ok_hi && ok_lo, format!("ρ={hi:.4}: feasible={ok_hi}; ρ={lo:.4}: infeasible={ok_lo}"))
}

fn c10(l: &mut Ledger) -> Outcome {
    let kappa: f64 = 50.0;
    let b = SectorBounds::new(1.0, kappa).unwrap();
    let s = zf(1, 0);
    let target = 1.0 - 1.0 / kappa.sqrt() + 0.02;
    let t = Instant::now();
    let tmm = make_named(NamedKind::Tmm, &b, 1).unwrap();
    let g_tmm = match certify_h2(&tmm, &b, &s, &PerformanceChannel::gradient_noise(&tmm), &opts()) {
        Ok(r) => {
            let g = r.gamma;
            l.h2_certs.push(r);
            g
        }
        Err(e) => return (false, format!("TMM analysis failed: {e}")),
    };
    match synthesize_bmi(2, 1, &b, &s, target, BmiObjective::H2, &BmiConfig::default(), &opts()) {
        Ok(out) => {
            let g = out.gamma.unwrap_or(f64::INFINITY);
            let accepted: Vec<f64> = out.log.iter().filter(|i| i.accepted && i.phase == BmiObjective::H2).map(|i| i.objective).collect();
            let monotone = accepted.windows(2).all(|w| w[1] <= w[0]);
            l.rates.push(("bmi-init".into(), kappa, out.initial_rho));
            if let Ok(r) = certify_rate(&out.algorithm, &b, &s, &BisectionConfig::default(), &opts()) {
                l.rates.push(("bmi".into(), kappa, r.best_rho));
                l.rate_certs.push(r);
            }
            if let Ok(r) = certify_h2(&out.algorithm, &b, &s, &PerformanceChannel::synthesis(&out.algorithm), &opts()) {
                l.h2_certs.push(r);
            }
            (
                g <= g_tmm && monotone,
                format!(
                    "target ρ={target:.4}: γ_BMI={g:.4} γ_TMM={g_tmm:.4}, ρ0={:.4}, {} accepted H2 steps, monotone={monotone} ({:.1}s)",
                    out.initial_rho,
                    accepted.len(),
                    t.elapsed().as_secs_f64()
                ),
            )
        }
        Err(e) => (false, format!("BMI failed: {e}")),
    }
}

fn c11(l: &mut Ledger) -> Outcome {
    let h1 = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 10.0, 4.0]));
    let t = from_rows(&[vec![2.0, -7.0, 0.0, 5.0], vec![-1.0, 4.0, -3.0, 2.0], vec![0.0, -2.0, 1.0, 0.0]]);
    let mut ok = true;
    let mut detail = Vec::new();
    for l2 in [1.0, 5.0, 10.0, 20.0] {
        let bounds = structured_bounds(&h1, &t, l2).unwrap();
        let tmm = tmm_rate(bounds.kappa());
        match bisect_structured(&h1, &t, 1.0, l2, 2, 0.0, 1e-3, &opts()) {
            Ok((res, _)) => {
                let lp = LoopData::structured(&res.algorithm, &h1, &t, 1.0, l2).unwrap();
                let s = ZamesFalbStructure::unstructured(1, 0, t.nrows(), 1.0).unwrap();
                let fdi = certify_loop_rate(&lp, &s, &BisectionConfig { rho_hi: 1.0, ..Default::default() }, &opts());
                if let Ok(r) = fdi {
                    l.fdi_extra.push((format!("structured L2={l2}"), r.fdi.ok, r.fdi.worst_eig));
                }
                let beat = res.rho < tmm;
                ok &= beat;
                if l2 == 1.0 {
                    ok &= res.rho <= 0.1;
                }
                detail.push(format!("L2={l2}: ρ={:.4} vs TMM {tmm:.4}", res.rho));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("L2={l2}: {e}"));
            }
        }
    }
    (ok, detail.join("; "))
}

fn c12(l: &Ledger) -> Outcome {
    let mut total = 0;
    let mut pass = 0;
    let mut worst = f64::NEG_INFINITY;
    for r in &l.rate_certs {
        let f = verify_fdi(&r.certificate, &r.plant, FDI_SAMPLES);
        total += 1;
        pass += (f.ok && f.worst_eig < 0.0) as usize;
        worst = worst.max(f.worst_eig);
    }
    for r in &l.h2_certs {
        let f = verify_fdi_h2(&r.certificate, &r.plant, FDI_SAMPLES);
        total += 1;
        pass += (f.ok && f.worst_eig < 0.0) as usize;
        worst = worst.max(f.worst_eig);
    }
    for (_, ok, w) in &l.fdi_extra {
        total += 1;
        pass += *ok as usize;
        worst = worst.max(*w);
    }
    (total > 0 && pass == total, format!("{pass}/{total} certificates pass, worst eigenvalue {worst:.3e}"))
}

fn c13(gammas: Option<[f64; 3]>) -> Outcome {
    let Some(gammas) = gammas else {
        return (false, "no certified γ available".into());
    };
    let b = SectorBounds::new(1.0, 100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let specs: Vec<_> = (0..200)
        .map(|i| sample_function(&b, 1, if i % 2 == 0 { FunctionKind::Cosine } else { FunctionKind::Quadratic }, &mut rng))
        .collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for (kind, gamma) in [NamedKind::Gd, NamedKind::Nm, NamedKind::Tmm].into_iter().zip(gammas) {
        let algo = make_named(kind, &b, 1).unwrap();
        let mut worst: f64 = 0.0;
        for (i, f) in specs.iter().enumerate() {
            match simulate_h2(&algo, f, 2000, 20, 1000 + i as u64) {
                Ok(e) => worst = worst.max(e),
                Err(e) => {
                    ok = false;
                    detail.push(format!("{}: {e}", kind.name()));
                }
            }
        }
        ok &= worst <= gamma * 1.05;
        detail.push(format!("{}: max estimate {worst:.4} ≤ γ {gamma:.4}", kind.name()));
    }
    (ok, detail.join("; "))
}

fn main() {
    let start = Instant::now();
    let mut l = Ledger::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("C1 gradient descent rate", c1(&mut l)));
    results.push(("C2 triple momentum rate", c2(&mut l)));
    results.push(("C3 modified Nesterov rate", c3(&mut l)));
    results.push(("C4 heavy ball certifiability", c4(&mut l)));
    results.push(("C6 linear-limit H2 oracle", c6(&mut l)));
    let (o7, gammas) = c7(&mut l);
    results.push(("C7 H2 ordering", o7));
    results.push(("C8 lossless reduction", c8()));
    results.push(("C9 convex synthesis bracketing", c9(&mut l)));
    results.push(("C10 BMI synthesis vs TMM", c10(&mut l)));
    results.push(("C11 structured synthesis", c11(&mut l)));
    results.push(("C5 lower-bound sanity", c5(&mut l)));
    results.push(("C12 FDI soundness", c12(&l)));
    results.push(("C13 empirical vs certified H2", c13(gammas)));
    results.sort_by_key(|(name, _)| name[1..].split(' ').next().unwrap().parse::<u32>().unwrap());

    let mut failed = 0;
    for (name, (ok, detail)) in &results {
        println!("{} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += !ok as usize;
    }
    println!("acceptance: {}/{} passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
