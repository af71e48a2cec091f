//! Interior-point backend (Clarabel) for [`SdpProblem`].

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{NonnegativeConeT, PSDTriangleConeT, ZeroConeT},
};
use serde::{Deserialize, Serialize};

use super::{LinearKind, Sense, SdpProblem};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_abs: 1e-9, tol_rel: 1e-9, max_iters: 200_000 }
    }
}

impl SolveOptions {
    /// Defaults, with the tolerance overridden by `IQC_SOLVER_TOL` when set.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(t) = std::env::var("IQC_SOLVER_TOL").ok().and_then(|s| s.parse::<f64>().ok()) {
            if t > 0.0 && t.is_finite() {
                o.tol_abs = t;
                o.tol_rel = t;
            }
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Inaccurate,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Worst constraint violation measured by eigenvalue re-check.
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
    pub message: String,
}

impl SdpSolution {
    /// Optimal, feasible or inaccurate-but-usable.
    pub fn has_point(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Feasible | SolveStatus::Inaccurate)
    }

    fn error(n: usize, msg: impl Into<String>) -> Self {
        Self {
            status: SolveStatus::Error,
            x: vec![0.0; n],
            objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: 0,
            message: msg.into(),
        }
    }
}

/// Upper triangle, column by column, off-diagonals scaled by √2.
fn svec(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Solves `problem`; never panics on well-formed input.
pub fn solve(problem: &SdpProblem, options: &SolveOptions) -> SdpSolution {
    let n = problem.n_vars;
    if let Err(e) = problem.validate() {
        return SdpSolution::error(n, e.to_string());
    }

    // Rows of A (column-major triplets), b and cones.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    let mut push_row = |coeffs: &mut dyn Iterator<Item = (usize, f64)>, rhs: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for (k, a) in coeffs {
            if a != 0.0 {
                cols[k].push((r, a));
            }
        }
        b.push(rhs);
    };

    let eqs: Vec<_> = problem.linear.iter().filter(|c| c.kind == LinearKind::Eq).collect();
    let les: Vec<_> = problem.linear.iter().filter(|c| c.kind == LinearKind::Le).collect();
    let zero_blocks: Vec<_> = problem.blocks.iter().filter(|blk| blk.sense == Sense::Zero).collect();

    let mut n_zero = 0;
    for c in &eqs {
        push_row(&mut c.coeffs.iter().copied(), -c.constant, &mut b);
        n_zero += 1;
    }
    for blk in &zero_blocks {
        let d = blk.dim();
        for j in 0..d {
            for i in 0..=j {
                let mut it = blk.expr.terms.iter().map(|(&k, f)| (k, f[(i, j)]));
                push_row(&mut it, -blk.expr.constant[(i, j)], &mut b);
                n_zero += 1;
            }
        }
    }
    if n_zero > 0 {
        cones.push(ZeroConeT(n_zero));
    }
    for c in &les {
        push_row(&mut c.coeffs.iter().copied(), -c.constant, &mut b);
    }
    if !les.is_empty() {
        cones.push(NonnegativeConeT(les.len()));
    }
    for blk in problem.blocks.iter().filter(|blk| blk.sense != Sense::Zero) {
        let d = blk.dim();
        if d == 0 {
            continue;
        }
        // PosDef: s = svec(F(x) − εI) = b − A x  with  b = svec(F0 − εI), A = −svec(Fi).
        // NegDef: s = svec(−F(x) − εI)           with  b = svec(−F0 − εI), A = svec(Fi).
        let sign = if blk.sense == Sense::PosDef { 1.0 } else { -1.0 };
        let shift = Mat::identity(d, d) * blk.eps;
        let rhs = svec(&(&blk.expr.constant * sign - shift));
        let coeffs: Vec<(usize, Vec<f64>)> = blk.expr.terms.iter().map(|(&k, f)| (k, svec(f))).collect();
        for (row, &rv) in rhs.iter().enumerate() {
            let mut it = coeffs.iter().map(|(k, s)| (*k, -sign * s[row]));
            push_row(&mut it, rv, &mut b);
        }
        cones.push(PSDTriangleConeT(d));
    }

    let m = b.len();
    let mut q = vec![0.0; n];
    for &(k, c) in &problem.objective {
        q[k] += c;
    }
    if m == 0 {
        if q.iter().any(|&c| c != 0.0) {
            return SdpSolution::error(n, "objective is unbounded without constraints");
        }
        return SdpSolution {
            status: SolveStatus::Optimal,
            x: vec![0.0; n],
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            message: "no constraints".into(),
        };
    }
    if n == 0 {
        // Only constant constraints: decide directly.
        let viol = problem.max_violation(&[]);
        let ok = viol <= 10.0 * options.tol_abs;
        return SdpSolution {
            status: if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            x: vec![],
            objective: 0.0,
            primal_residual: viol.max(0.0),
            dual_residual: 0.0,
            iterations: 0,
            message: "no variables".into(),
        };
    }

    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in cols.iter_mut() {
        col.sort_by_key(|&(r, _)| r);
        for &(r, v) in col.iter() {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);
    let p = CscMatrix::zeros((n, n));

    let settings = match DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(options.max_iters)
        .tol_gap_abs(options.tol_abs)
        .tol_gap_rel(options.tol_rel)
        .tol_feas(options.tol_abs.max(1e-12))
        .tol_infeas_abs(options.tol_abs.max(1e-12))
        .tol_infeas_rel(options.tol_rel.max(1e-12))
        .tol_ktratio(1e-7)
        .reduced_tol_gap_abs(options.tol_abs.sqrt() * 1e-1)
        .reduced_tol_gap_rel(options.tol_rel.sqrt() * 1e-1)
        .reduced_tol_feas(options.tol_abs.sqrt() * 1e-1)
        .build()
    {
        Ok(s) => s,
        Err(e) => return SdpSolution::error(n, format!("settings: {e:?}")),
    };
    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        Err(e) => return SdpSolution::error(n, format!("setup: {e:?}")),
    };
    solver.solve();
    let sol = &solver.solution;
    let x = sol.x.clone();
    let raw_status = sol.status;
    let iterations = sol.iterations;
    let objective = problem.objective_value(&x);
    let dual_residual = sol.r_dual;
    let violation = problem.max_violation(&x).max(0.0);
    let feasibility_only = problem.objective.is_empty();

    let scale = 1.0
        + problem
            .blocks
            .iter()
            .map(|b| b.expr.constant.amax())
            .chain(problem.linear.iter().map(|c| c.constant.abs()))
            .fold(0.0, f64::max);
    let verified = violation <= 10.0 * options.tol_abs * scale;

    let status = match raw_status {
        SolverStatus::Solved if verified => {
            if feasibility_only {
                SolveStatus::Feasible
            } else {
                SolveStatus::Optimal
            }
        }
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Inaccurate,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        _ => SolveStatus::Error,
    };
    SdpSolution {
        status,
        x,
        objective,
        primal_residual: violation,
        dual_residual,
        iterations,
        message: format!("{raw_status:?}"),
    }
}
