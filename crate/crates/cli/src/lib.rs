//! Command-line front end for `iqc-core`.
//!
//! Every command writes one result document (JSON, or CSV with `#` header
//! lines) that embeds a [`RunManifest`] describing how it was produced.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use iqc_core::algorithms::{
    algorithm_to_json, gd_rate, make_named, nm_modified_rate, parse_algorithm_json, tmm_rate, AlgorithmRealization,
    NamedKind, SectorBounds,
};
use iqc_core::engines::{certify_h2, certify_rate, synthesize_bmi, synthesize_convex, BisectionConfig, BmiConfig};
use iqc_core::lmi::BmiObjective;
use iqc_core::multipliers::ZamesFalbStructure;
use iqc_core::plantbuild::PerformanceChannel;
use iqc_core::sampling::{sample_function, simulate_h2, FunctionKind};
use iqc_core::sdp::SolveOptions;
use iqc_core::IqcError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CERTIFIABLE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "iqc", version, about = "Certify and design first-order optimization algorithms with Zames-Falb IQCs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smallest certified convergence rate.
    AnalyzeRate(AnalyzeArgs),
    /// Certified bound on the averaged H2 level under gradient noise.
    AnalyzeH2(AnalyzeArgs),
    /// Convex synthesis for a prescribed rate.
    SynthConvex(SynthConvexArgs),
    /// Alternating (BMI) synthesis from the structured initializer.
    SynthBmi(SynthBmiArgs),
    /// Simulated H2 estimates on random objectives (CSV).
    SampleH2(SampleArgs),
    /// Certified rates or H2 levels over a grid of condition ratios (CSV).
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SectorArgs {
    #[arg(long)]
    pub m: f64,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MultiplierArgs {
    /// Causal Zames-Falb lags.
    #[arg(long, default_value_t = 1)]
    pub lc: usize,
    /// Anticausal Zames-Falb lags.
    #[arg(long, default_value_t = 0)]
    pub la: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// gd, nm, nm-mod, tmm, hb or file:<path>.
    #[arg(long)]
    pub algo: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub mult: MultiplierArgs,
    /// Dimension of the decision variable.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Bisection tolerance on ρ.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthConvexArgs {
    #[arg(long)]
    pub rho: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub mult: MultiplierArgs,
    /// Algorithm order.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Also minimize the H2 bound.
    #[arg(long)]
    pub perf: bool,
    /// Where the synthesized algorithm is written.
    #[arg(long, default_value = "algorithm.json")]
    pub algo_out: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Rate,
    H2,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthBmiArgs {
    /// Target rate (the H2 objective is minimized subject to it).
    #[arg(long)]
    pub rho: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub sector: SectorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub mult: MultiplierArgs,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::H2)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    #[arg(long, default_value = "algorithm.json")]
    pub algo_out: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Quadratic,
    Cosine,
    /// Alternate between the two.
    Mixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub algo: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub sector: SectorArgs,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Noise realizations per function.
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random objectives.
    #[arg(long, default_value_t = 1)]
    pub functions: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Mixed)]
    pub kind: KindArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Rate,
    H2,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    /// Comma-separated named algorithms.
    #[arg(long, default_value = "gd,nm,tmm")]
    pub algos: String,
    /// `log:a:b:n`, `lin:a:b:n` or a comma-separated list.
    #[arg(long, default_value = "log:1.02:1000:25")]
    pub kappa_grid: String,
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub mult: MultiplierArgs,
    #[arg(long, value_enum, default_value_t = MetricArg::Rate)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reproducibility header embedded in every result.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub tool_version: String,
    pub solver: SolveOptions,
    /// Omitted from CSV headers so that seeded runs are byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl RunManifest {
    fn new<T: Serialize>(command: &str, parameters: &T, solver: &SolveOptions) -> Self {
        Self {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters).unwrap_or(Value::Null),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            solver: *solver,
            seconds: None,
        }
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<IqcError> for CliError {
    fn from(e: IqcError) -> Self {
        let code = match e {
            IqcError::NotCertifiable(_) | IqcError::InfeasiblePrecondition(_) | IqcError::Divergence { .. } => {
                EXIT_NOT_CERTIFIABLE
            }
            IqcError::Solver(_) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Value of `--algo`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlgoSource {
    Named(NamedKind),
    File(PathBuf),
}

impl FromStr for AlgoSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("file: needs a path".into());
            }
            return Ok(Self::File(PathBuf::from(path)));
        }
        s.parse::<NamedKind>()
            .map(Self::Named)
            .map_err(|_| format!("unknown algorithm '{s}' (expected gd, nm, nm-mod, tmm, hb or file:<path>)"))
    }
}

impl AlgoSource {
    fn label(&self) -> String {
        match self {
            Self::Named(k) => k.name().to_string(),
            Self::File(p) => format!("file:{}", p.display()),
        }
    }

    /// Realization for the given sector; named files keep their own design bounds.
    pub fn load(&self, bounds: &SectorBounds, p: usize) -> CliResult<AlgorithmRealization> {
        match self {
            Self::Named(k) => Ok(make_named(*k, bounds, p)?),
            Self::File(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
                Ok(parse_algorithm_json(&text)?.realize()?)
            }
        }
    }
}

/// Parses a condition-ratio grid.
pub fn parse_kappa_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    const MAX_POINTS: usize = 100_000;
    let check = |k: f64| {
        if k.is_finite() && k >= 1.0 {
            Ok(k)
        } else {
            Err(format!("condition ratio must be finite and at least 1, got {k}"))
        }
    };
    let range = |rest: &str| -> std::result::Result<(f64, f64, usize), String> {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err("expected <start>:<stop>:<count>".into());
        }
        let a = check(parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?)?;
        let b = check(parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?)?;
        let n = parts[2].trim().parse::<usize>().map_err(|e| e.to_string())?;
        if n == 0 || n > MAX_POINTS {
            return Err(format!("count must lie in 1..={MAX_POINTS}"));
        }
        if b < a {
            return Err("stop must not be below start".into());
        }
        Ok((a, b, n))
    };
    let step = |n: usize, i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    if let Some(rest) = s.strip_prefix("log:") {
        let (a, b, n) = range(rest)?;
        let (la, lb) = (a.ln(), b.ln());
        // Endpoints are exact rather than exp(ln(x)).
        return Ok((0..n)
            .map(|i| match i {
                0 => a,
                _ if i == n - 1 => b,
                _ => (la + step(n, i) * (lb - la)).exp(),
            })
            .collect());
    }
    if let Some(rest) = s.strip_prefix("lin:") {
        let (a, b, n) = range(rest)?;
        return Ok((0..n).map(|i| if i == n - 1 && n > 1 { b } else { a + step(n, i) * (b - a) }).collect());
    }
    let pts = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()).and_then(check))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if pts.is_empty() || pts.len() > MAX_POINTS {
        return Err("empty or oversized grid".into());
    }
    Ok(pts)
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn bounds(s: &SectorArgs) -> CliResult<SectorBounds> {
    Ok(SectorBounds::new(s.m, s.l)?)
}

fn structure(m: &MultiplierArgs, p: usize) -> CliResult<ZamesFalbStructure> {
    Ok(ZamesFalbStructure::unstructured(m.lc, m.la, p, 1.0)?)
}

fn check_tol(tol: f64) -> CliResult<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--tol must lie in (0, 1), got {tol}")))
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| CliError::usage(e.to_string()))
        }
    }
}

fn emit_json(out: Option<&Path>, mut manifest: RunManifest, start: Instant, result: Value) -> CliResult<()> {
    manifest.seconds = Some(start.elapsed().as_secs_f64());
    let doc = json!({ "manifest": manifest, "result": result });
    emit(out, &(serde_json::to_string_pretty(&doc).unwrap_or_default() + "\n"))
}

fn csv_with_manifest(manifest: &RunManifest, body: Vec<u8>) -> String {
    let header = serde_json::to_string(manifest).unwrap_or_default();
    format!("# manifest: {header}\n{}", String::from_utf8_lossy(&body))
}

fn write_algorithm(path: &Path, algo: &AlgorithmRealization) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&algorithm_to_json(algo)).unwrap_or_default() + "\n";
    fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_analyze_rate(a: &AnalyzeArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    check_tol(a.tol)?;
    let src: AlgoSource = a.algo.parse().map_err(CliError::usage)?;
    let b = bounds(&a.sector)?;
    let algo = src.load(&b, a.p)?;
    let s = structure(&a.mult, algo.p)?;
    let res = certify_rate(&algo, &b, &s, &BisectionConfig { tol: a.tol, ..Default::default() }, opts)?;
    let result = json!({
        "algo": src.label(),
        "rho": res.best_rho,
        "certificate_digest": digest(&res.certificate),
        "solves": res.solves,
        "seconds": res.seconds,
        "fdi_ok": res.fdi.ok,
    });
    emit_json(a.out.as_deref(), RunManifest::new("analyze-rate", a, opts), start, result)
}

fn cmd_analyze_h2(a: &AnalyzeArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    let src: AlgoSource = a.algo.parse().map_err(CliError::usage)?;
    let b = bounds(&a.sector)?;
    let algo = src.load(&b, a.p)?;
    let s = structure(&a.mult, algo.p)?;
    let res = certify_h2(&algo, &b, &s, &PerformanceChannel::gradient_noise(&algo), opts)?;
    let result = json!({
        "algo": src.label(),
        "gamma": res.gamma,
        "certificate_digest": digest(&res.certificate),
        "solves": res.solves,
        "seconds": res.seconds,
        "fdi_ok": res.fdi.ok,
    });
    emit_json(a.out.as_deref(), RunManifest::new("analyze-h2", a, opts), start, result)
}

fn cmd_synth_convex(a: &SynthConvexArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    let b = bounds(&a.sector)?;
    let s = structure(&a.mult, a.p)?;
    let out = synthesize_convex(a.n, a.p, &b, &s, a.rho, a.perf, opts)?;
    write_algorithm(&a.algo_out, &out.result.algorithm)?;
    let result = json!({
        "rho": a.rho,
        "certificate_digest": digest(&out.recertified),
        "gamma": out.h2.as_ref().map(|h| h.gamma),
        "algorithm": algorithm_to_json(&out.result.algorithm),
        "algorithm_file": a.algo_out.display().to_string(),
        "solves": out.solves,
        "seconds": out.seconds,
    });
    emit_json(a.out.as_deref(), RunManifest::new("synth-convex", a, opts), start, result)
}

fn cmd_synth_bmi(a: &SynthBmiArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    let b = bounds(&a.sector)?;
    let s = structure(&a.mult, a.p)?;
    let objective = match a.objective {
        ObjectiveArg::Rate => BmiObjective::Rate,
        ObjectiveArg::H2 => BmiObjective::H2,
    };
    let config = BmiConfig { max_iters: a.max_iters, ..Default::default() };
    let out = synthesize_bmi(a.n, a.p, &b, &s, a.rho, objective, &config, opts)?;
    write_algorithm(&a.algo_out, &out.algorithm)?;
    let result = json!({
        "rho": out.rho,
        "gamma": out.gamma,
        "initial_rho": out.initial_rho,
        "certificate_digest": digest(&out.rate),
        "algorithm": algorithm_to_json(&out.algorithm),
        "algorithm_file": a.algo_out.display().to_string(),
        "iterations": out.log,
        "solves": out.solves,
        "seconds": out.seconds,
    });
    emit_json(a.out.as_deref(), RunManifest::new("synth-bmi", a, opts), start, result)
}

#[derive(Debug, Serialize)]
struct SampleRow<'a> {
    algo: &'a str,
    kind: &'a str,
    m: f64,
    #[serde(rename = "L")]
    l: f64,
    seed: u64,
    k_max: usize,
    #[serde(rename = "N")]
    n: usize,
    estimate: f64,
}

fn cmd_sample_h2(a: &SampleArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    let src: AlgoSource = a.algo.parse().map_err(CliError::usage)?;
    let b = bounds(&a.sector)?;
    let algo = src.load(&b, a.p)?;
    if a.functions == 0 {
        return Err(CliError::usage("--functions must be positive"));
    }
    let label = src.label();
    let mut w = csv::Writer::from_writer(Vec::new());
    for i in 0..a.functions {
        let kind = match a.kind {
            KindArg::Quadratic => FunctionKind::Quadratic,
            KindArg::Cosine => FunctionKind::Cosine,
            KindArg::Mixed if i % 2 == 0 => FunctionKind::Cosine,
            KindArg::Mixed => FunctionKind::Quadratic,
        };
        // Function draws and noise use disjoint generator streams.
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        rng.set_stream(u64::MAX - i as u64);
        let f = sample_function(&b, algo.p, kind, &mut rng);
        let seed = a.seed.wrapping_add(i as u64);
        let estimate = simulate_h2(&algo, &f, a.steps, a.runs, seed)?;
        let row = SampleRow { algo: &label, kind: kind.name(), m: b.m, l: b.l, seed, k_max: a.steps, n: a.runs, estimate };
        w.serialize(row).map_err(|e| CliError::usage(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    let text = csv_with_manifest(&RunManifest::new("sample-h2", a, opts), body);
    eprintln!("sample-h2: {:.3}s", start.elapsed().as_secs_f64());
    emit(a.out.as_deref(), &text)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    algo: String,
    metric: &'static str,
    m: f64,
    #[serde(rename = "L")]
    l: f64,
    kappa: f64,
    /// Empty when the point could not be certified.
    value: Option<f64>,
    /// Closed-form reference where one exists.
    analytic: Option<f64>,
    status: String,
}

fn analytic_rate(kind: NamedKind, kappa: f64) -> Option<f64> {
    match kind {
        NamedKind::Gd => Some(gd_rate(kappa)),
        NamedKind::Tmm => Some(tmm_rate(kappa)),
        NamedKind::NmMod => Some(nm_modified_rate(kappa)),
        _ => None,
    }
}

fn cmd_sweep(a: &SweepArgs, opts: &SolveOptions) -> CliResult<()> {
    let start = Instant::now();
    check_tol(a.tol)?;
    let kinds = a
        .algos
        .split(',')
        .map(|t| t.trim().parse::<NamedKind>().map_err(|e| CliError::usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    let grid = parse_kappa_grid(&a.kappa_grid).map_err(|e| CliError::usage(format!("--kappa-grid: {e}")))?;
    if !(a.m > 0.0 && a.m.is_finite()) {
        return Err(CliError::usage("--m must be positive"));
    }
    let s = structure(&a.mult, 1)?;
    let points: Vec<(NamedKind, f64)> = kinds.iter().flat_map(|k| grid.iter().map(move |&kap| (*k, kap))).collect();
    // Solver errors abort the sweep; other failures are recorded per row.
    let rows = points
        .par_iter()
        .map(|&(kind, kappa)| -> CliResult<SweepRow> {
            let b = SectorBounds::new(a.m, a.m * kappa)?;
            let algo = make_named(kind, &b, 1)?;
            let value = match a.metric {
                MetricArg::Rate => {
                    certify_rate(&algo, &b, &s, &BisectionConfig { tol: a.tol, ..Default::default() }, opts).map(|r| r.best_rho)
                }
                MetricArg::H2 => certify_h2(&algo, &b, &s, &PerformanceChannel::gradient_noise(&algo), opts).map(|r| r.gamma),
            };
            let (value, status) = match value {
                Ok(v) => (Some(v), "ok".to_string()),
                Err(e @ IqcError::Solver(_)) => return Err(e.into()),
                Err(e) => (None, e.to_string()),
            };
            Ok(SweepRow {
                algo: kind.name().to_string(),
                metric: match a.metric {
                    MetricArg::Rate => "rate",
                    MetricArg::H2 => "h2",
                },
                m: b.m,
                l: b.l,
                kappa,
                value,
                analytic: if a.metric == MetricArg::Rate { analytic_rate(kind, kappa) } else { None },
                status,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| CliError::usage(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    let text = csv_with_manifest(&RunManifest::new("sweep", a, opts), body);
    eprintln!("sweep: {} points in {:.3}s", rows.len(), start.elapsed().as_secs_f64());
    emit(a.out.as_deref(), &text)
}

/// Runs a parsed command with solver options taken from the environment.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let opts = SolveOptions::from_env();
    match &cli.command {
        Command::AnalyzeRate(a) => cmd_analyze_rate(a, &opts),
        Command::AnalyzeH2(a) => cmd_analyze_h2(a, &opts),
        Command::SynthConvex(a) => cmd_synth_convex(a, &opts),
        Command::SynthBmi(a) => cmd_synth_bmi(a, &opts),
        Command::SampleH2(a) => cmd_sample_h2(a, &opts),
        Command::Sweep(a) => cmd_sweep(a, &opts),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
