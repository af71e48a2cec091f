//! Random objectives in `S(m, L)` and simulation-based averaged-H2 estimates.
//!
//! Simulated estimates are lower bounds on the worst-case averaged H2 level and
//! should never exceed a certified bound beyond statistical error.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmRealization, SectorBounds};
use crate::error::{IqcError, Result};
use crate::linalg::{min_sym_eig, max_sym_eig, Mat};

pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Quadratic,
    Cosine,
}

impl FunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Quadratic => "quadratic",
            FunctionKind::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = IqcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "cosine" => Ok(Self::Cosine),
            _ => Err(IqcError::Parse(format!("unknown function kind '{s}'"))),
        }
    }
}

/// An objective with minimizer `z* = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RandomFunctionSpec {
    /// `H(z) = ½ zᵀ Q z`.
    Quadratic { q: Mat },
    /// Per coordinate, `∇H(z)_i = c1_i z_i + (c2_i/ω_i) sin(ω_i z_i)`.
    Cosine { c1: Vec<f64>, c2: Vec<f64>, omega: Vec<f64> },
}

impl RandomFunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { q } => q.nrows(),
            Self::Cosine { c1, .. } => c1.len(),
        }
    }

    pub fn kind(&self) -> FunctionKind {
        match self {
            Self::Quadratic { .. } => FunctionKind::Quadratic,
            Self::Cosine { .. } => FunctionKind::Cosine,
        }
    }

    pub fn gradient_into(&self, z: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Self::Quadratic { q } => out.gemv(1.0, q, z, 0.0),
            Self::Cosine { c1, c2, omega } => {
                for i in 0..c1.len() {
                    out[i] = c1[i] * z[i] + c2[i] / omega[i] * (omega[i] * z[i]).sin();
                }
            }
        }
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.gradient_into(z, &mut out);
        out
    }

    /// Range of the Hessian over all `z`.
    pub fn hessian_range(&self) -> (f64, f64) {
        match self {
            Self::Quadratic { q } => (min_sym_eig(q), max_sym_eig(q)),
            Self::Cosine { c1, c2, .. } => {
                let lo = c1.iter().zip(c2).map(|(a, b)| a - b.abs()).fold(f64::INFINITY, f64::min);
                let hi = c1.iter().zip(c2).map(|(a, b)| a + b.abs()).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Whether the objective lies in `S(m, L)` up to `tol`.
    pub fn is_member(&self, bounds: &SectorBounds, tol: f64) -> bool {
        if let Self::Cosine { omega, .. } = self {
            if omega.iter().any(|w| !(*w > 0.0)) {
                return false;
            }
        }
        let (lo, hi) = self.hessian_range();
        lo >= bounds.m - tol && hi <= bounds.l + tol
    }
}

fn random_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Mat {
    let g = Mat::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // Sign fix makes the distribution Haar.
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Draws a random member of `S(m, L)` with minimizer at the origin.
pub fn sample_function<R: Rng + ?Sized>(bounds: &SectorBounds, p: usize, kind: FunctionKind, rng: &mut R) -> RandomFunctionSpec {
    let (m, l) = (bounds.m, bounds.l);
    match kind {
        FunctionKind::Quadratic => {
            let eig: Vec<f64> = (0..p).map(|_| if l > m { rng.gen_range(m..=l) } else { m }).collect();
            let u = random_orthogonal(p, rng);
            let q = &u * Mat::from_diagonal(&DVector::from_vec(eig)) * u.transpose();
            RandomFunctionSpec::Quadratic { q: crate::linalg::symmetrize(&q) }
        }
        FunctionKind::Cosine => {
            let mut c1 = Vec::with_capacity(p);
            let mut c2 = Vec::with_capacity(p);
            let mut omega = Vec::with_capacity(p);
            for _ in 0..p {
                let a = if l > m { rng.gen_range(m..=l) } else { m };
                let amp = (a - m).min(l - a).max(0.0);
                let b = if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
                c1.push(a);
                c2.push(b);
                omega.push(rng.gen_range(0.1..10.0));
            }
            RandomFunctionSpec::Cosine { c1, c2, omega }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub k_max: usize,
    pub runs: usize,
    pub seed: u64,
    /// Standard deviation of the additive gradient noise.
    pub noise_scale: f64,
}

impl SimulationConfig {
    pub fn new(k_max: usize, runs: usize, seed: u64) -> Self {
        Self { k_max, runs, seed, noise_scale: 1.0 }
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Sum over steps of `‖y_k‖²` for one noise realization.
fn run_once(algo: &AlgorithmRealization, spec: &RandomFunctionSpec, cfg: &SimulationConfig, stream: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let p = algo.p;
    let nx = algo.nx();
    // x0 = D† z* with z* = 0.
    let mut x = DVector::<f64>::zeros(nx);
    let mut xn = DVector::<f64>::zeros(nx);
    let mut w = DVector::<f64>::zeros(p);
    let mut g = DVector::<f64>::zeros(p);
    let mut y = DVector::<f64>::zeros(p);
    let mut acc = 0.0;
    for k in 0..cfg.k_max {
        w.gemv(1.0, &algo.c, &x, 0.0);
        spec.gradient_into(&w, &mut g);
        for i in 0..p {
            g[i] += cfg.noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        xn.gemv(1.0, &algo.a, &x, 0.0);
        xn.gemv(1.0, &algo.b, &g, 1.0);
        std::mem::swap(&mut x, &mut xn);
        let norm = x.norm();
        if !norm.is_finite() || norm > DIVERGENCE_THRESHOLD {
            return Err(IqcError::Divergence { step: k + 1 });
        }
        y.gemv(1.0, &algo.d, &x, 0.0);
        acc += y.norm_squared();
    }
    Ok(acc)
}

/// `√((1/k_max) Σ_k mean_N ‖z_k − z*‖²)` under unit white gradient noise.
///
/// Realization `r` draws from stream `r` of a ChaCha generator seeded with
/// `cfg.seed`, and partial sums are reduced in a fixed pairwise order, so the
/// estimate is bit-for-bit reproducible regardless of thread count.
pub fn simulate_h2_with(algo: &AlgorithmRealization, spec: &RandomFunctionSpec, cfg: &SimulationConfig) -> Result<f64> {
    if spec.dim() != algo.p {
        return Err(IqcError::Dimension(format!("function dimension {} != algorithm p {}", spec.dim(), algo.p)));
    }
    if cfg.k_max == 0 || cfg.runs == 0 {
        return Err(IqcError::Argument("k_max and runs must be positive".into()));
    }
    let sums: Vec<f64> = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|r| run_once(algo, spec, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((pairwise_sum(&sums) / (cfg.runs as f64 * cfg.k_max as f64)).sqrt())
}

pub fn simulate_h2(algo: &AlgorithmRealization, spec: &RandomFunctionSpec, k_max: usize, runs: usize, seed: u64) -> Result<f64> {
    simulate_h2_with(algo, spec, &SimulationConfig::new(k_max, runs, seed))
}
