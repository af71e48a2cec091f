//! Algorithm realizations `x⁺ = A x + B ∇H(C x)`, `z = D x`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{IqcError, Result};
use crate::linalg::{eye, from_rows, hcat, kron_eye, spectral_radius, to_rows, unit, upshift, vcat, zeros, Mat};

/// Sector data of the class `S(m, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl SectorBounds {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite() && l.is_finite() && l >= m) {
            return Err(IqcError::Argument(format!("need 0 < m <= L, got m = {m}, L = {l}")));
        }
        Ok(Self { m, l })
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.m
    }

    /// Width `L − m` of the slope sector of the shifted gradient.
    pub fn width(&self) -> f64 {
        self.l - self.m
    }
}

/// Textbook rate of gradient descent, `(κ−1)/(κ+1)`.
pub fn gd_rate(kappa: f64) -> f64 {
    (kappa - 1.0) / (kappa + 1.0)
}

/// Rate of the triple momentum method, `1 − 1/√κ`.
pub fn tmm_rate(kappa: f64) -> f64 {
    1.0 - 1.0 / kappa.sqrt()
}

/// Rate bound for Nesterov's method with the modified momentum, `√(1 − √(2κ−1)/κ)`.
pub fn nm_modified_rate(kappa: f64) -> f64 {
    (1.0 - (2.0 * kappa - 1.0).sqrt() / kappa).sqrt()
}

/// Lower bound `(√κ−1)/(√κ+1)` for any first-order method on `S(m, L)`.
pub fn lower_bound_rate(kappa: f64) -> f64 {
    (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmRealization {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub ddagger: Mat,
    pub n: usize,
    pub p: usize,
}

/// Outcome of the equilibrium-condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCheck {
    pub holds: bool,
    pub ddagger: Option<Mat>,
}

const EQ_TOL: f64 = 1e-10;

fn residuals(a: &Mat, c: &Mat, d: &Mat, x: &Mat) -> f64 {
    let p = x.ncols();
    let r1 = ((a - eye(a.nrows())) * x).amax();
    let r2 = (d * x - eye(p)).amax();
    let r3 = (c * x - eye(p)).amax();
    r1.max(r2).max(r3)
}

/// Checks `D D† = I`, `C D† = I`, `(A − I) D† = 0`.
///
/// Without `ddagger` the stacked linear system is solved in the least-squares
/// sense and a solution is declared when its residual is below `1e-8 (1 + ‖A‖)`.
pub fn check_equilibrium_conditions(
    a: &Mat,
    b: &Mat,
    c: &Mat,
    d: &Mat,
    ddagger: Option<&Mat>,
) -> Result<EquilibriumCheck> {
    let nx = a.nrows();
    if a.ncols() != nx || b.nrows() != nx || c.ncols() != nx || d.ncols() != nx {
        return Err(IqcError::Dimension("algorithm matrices are inconsistent".into()));
    }
    let p = b.ncols();
    if c.nrows() != p || d.nrows() != p {
        return Err(IqcError::Dimension(format!("C and D must have {p} rows")));
    }
    if let Some(x) = ddagger {
        if x.shape() != (nx, p) {
            return Err(IqcError::Dimension(format!("Ddagger must be {nx}x{p}")));
        }
        let holds = residuals(a, c, d, x) <= EQ_TOL * (1.0 + a.amax());
        return Ok(EquilibriumCheck { holds, ddagger: Some(x.clone()) });
    }
    let lhs = vcat(&[&(a - eye(nx)), d, c]);
    let rhs = vcat(&[&zeros(nx, p), &eye(p), &eye(p)]);
    let svd = lhs.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| IqcError::Solver(format!("least squares failed: {e}")))?;
    let holds = residuals(a, c, d, &x) < 1e-8 * (1.0 + a.norm());
    Ok(EquilibriumCheck { holds, ddagger: holds.then_some(x) })
}

impl AlgorithmRealization {
    /// Builds a realization, solving for `D†` when absent.
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat, ddagger: Option<Mat>) -> Result<Self> {
        let p = b.ncols();
        let nx = a.nrows();
        if p == 0 || nx == 0 || nx % p != 0 {
            return Err(IqcError::Dimension(format!("state size {nx} is not a multiple of p = {p}")));
        }
        let check = check_equilibrium_conditions(&a, &b, &c, &d, ddagger.as_ref())?;
        match (check.holds, check.ddagger) {
            (true, Some(x)) => Ok(Self { a, b, c, d, ddagger: x, n: nx / p, p }),
            _ => Err(IqcError::Precondition("equilibrium conditions do not hold".into())),
        }
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    /// `A + m B C`.
    pub fn nominal(&self, m: f64) -> Mat {
        &self.a + (&self.b * &self.c) * m
    }

    pub fn lift(&self, p: usize) -> Self {
        Self {
            a: kron_eye(&self.a, p),
            b: kron_eye(&self.b, p),
            c: kron_eye(&self.c, p),
            d: kron_eye(&self.d, p),
            ddagger: kron_eye(&self.ddagger, p),
            n: self.n,
            p: self.p * p,
        }
    }
}

/// `A + m B C` and its spectral radius.
pub fn nominal_closed_loop(algo: &AlgorithmRealization, bounds: &SectorBounds) -> (Mat, f64) {
    let a = algo.nominal(bounds.m);
    let r = spectral_radius(&a);
    (a, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedKind {
    Gd,
    Nm,
    NmMod,
    Tmm,
    Hb,
}

impl NamedKind {
    pub const ALL: [NamedKind; 5] = [NamedKind::Gd, NamedKind::Nm, NamedKind::NmMod, NamedKind::Tmm, NamedKind::Hb];

    pub fn name(&self) -> &'static str {
        match self {
            NamedKind::Gd => "gd",
            NamedKind::Nm => "nm",
            NamedKind::NmMod => "nm-mod",
            NamedKind::Tmm => "tmm",
            NamedKind::Hb => "hb",
        }
    }
}

impl std::str::FromStr for NamedKind {
    type Err = IqcError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(NamedKind::Gd),
            "nm" => Ok(NamedKind::Nm),
            "nm-mod" | "nm_modified" | "nm-modified" => Ok(NamedKind::NmMod),
            "tmm" => Ok(NamedKind::Tmm),
            "hb" => Ok(NamedKind::Hb),
            other => Err(IqcError::Argument(format!("unknown algorithm kind '{other}'"))),
        }
    }
}

/// A named method with its parameters `(ν1, ν2, ν3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedAlgorithm {
    pub kind: NamedKind,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
}

impl NamedAlgorithm {
    pub fn new(kind: NamedKind, bounds: &SectorBounds) -> Self {
        let (m, l) = (bounds.m, bounds.l);
        let kappa = bounds.kappa();
        let (sm, sl) = (m.sqrt(), l.sqrt());
        let (nu1, nu2, nu3) = match kind {
            NamedKind::Gd => (2.0 / (m + l), 0.0, 0.0),
            NamedKind::Nm => {
                let beta = (sl - sm) / (sl + sm);
                (1.0 / l, beta, beta)
            }
            NamedKind::NmMod => {
                // Denominator uses √(2κ−1); with √(κ−1) the method certifies
                // noticeably slower than √(1 − √(2κ−1)/κ).
                let r = (2.0 * kappa - 1.0).sqrt();
                let beta = (2.0 * kappa - r - 1.0) / (2.0 * (kappa + r));
                (1.0 / l, beta, beta)
            }
            NamedKind::Tmm => {
                let rho = tmm_rate(kappa);
                (
                    (1.0 + rho) / l,
                    rho * rho / (2.0 - rho),
                    rho * rho / ((1.0 + rho) * (2.0 - rho)),
                )
            }
            NamedKind::Hb => {
                let s = 2.0 / (sl + sm);
                let beta = (sl - sm) / (sl + sm);
                (s * s, beta * beta, 0.0)
            }
        };
        Self { kind, nu1, nu2, nu3 }
    }

    /// `(A, B, C, D)` of the two-state template, lifted by `⊗ I_p`.
    pub fn realization(&self, p: usize) -> AlgorithmRealization {
        let (n1, n2, n3) = (self.nu1, self.nu2, self.nu3);
        let a = from_rows(&[vec![1.0 + n2, -n2], vec![1.0, 0.0]]);
        let b = from_rows(&[vec![-n1], vec![0.0]]);
        let c = from_rows(&[vec![1.0 + n3, -n3]]);
        let d = from_rows(&[vec![1.0, 0.0]]);
        let dd = from_rows(&[vec![1.0], vec![1.0]]);
        AlgorithmRealization {
            a: kron_eye(&a, p),
            b: kron_eye(&b, p),
            c: kron_eye(&c, p),
            d: kron_eye(&d, p),
            ddagger: kron_eye(&dd, p),
            n: 2,
            p,
        }
    }
}

pub fn make_named(kind: NamedKind, bounds: &SectorBounds, p: usize) -> Result<AlgorithmRealization> {
    if p == 0 {
        return Err(IqcError::Argument("p must be positive".into()));
    }
    Ok(NamedAlgorithm::new(kind, bounds).realization(p))
}

/// Block up-shift `A1 = upshift(n) ⊗ I_p`.
pub fn shift_a1(n: usize, p: usize) -> Mat {
    kron_eye(&upshift(n), p)
}

/// Last-block injector `B1 = e_n ⊗ I_p`.
pub fn shift_b1(n: usize, p: usize) -> Mat {
    kron_eye(&unit(n, n - 1), p)
}

/// `A2 = I + A1` with the superdiagonal block of the first row removed.
pub fn shift_a2(n: usize, p: usize) -> Mat {
    let mut s = upshift(n);
    if n > 1 {
        s[(0, 1)] = 0.0;
    }
    kron_eye(&(eye(n) + s), p)
}

/// First-block injector `B2 = e_1 ⊗ I_p`.
pub fn shift_b2(n: usize, p: usize) -> Mat {
    kron_eye(&unit(n, 0), p)
}

/// Canonical `C = D = [I 0 … 0]`.
pub fn canonical_c(n: usize, p: usize) -> Mat {
    shift_b2(n, p).transpose()
}

/// Gains `K_1 … K_n` of the parametrized form `A = A1 + I + B1 [0 K2 … Kn]`, `B = B1 K1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredControllerForm {
    pub k: Vec<Mat>,
}

impl StructuredControllerForm {
    /// Splits a `p × np` gain `K = [K1 … Kn]`.
    pub fn from_gain(k: &Mat, n: usize, p: usize) -> Result<Self> {
        if k.shape() != (p, n * p) {
            return Err(IqcError::Dimension(format!("gain must be {p}x{}", n * p)));
        }
        Ok(Self { k: (0..n).map(|i| k.columns(i * p, p).into_owned()).collect() })
    }
}

pub fn from_structured(form: &StructuredControllerForm, p: usize, n: usize) -> Result<AlgorithmRealization> {
    if n == 0 || form.k.len() != n {
        return Err(IqcError::Dimension(format!("expected {n} gains, got {}", form.k.len())));
    }
    if form.k.iter().any(|k| k.shape() != (p, p)) {
        return Err(IqcError::Dimension(format!("each gain must be {p}x{p}")));
    }
    let a1 = shift_a1(n, p);
    let b1 = shift_b1(n, p);
    let mut row: Vec<Mat> = vec![zeros(p, p)];
    row.extend(form.k[1..].iter().cloned());
    let refs: Vec<&Mat> = row.iter().collect();
    let a = &a1 + eye(n * p) + &b1 * hcat(&refs);
    let b = &b1 * &form.k[0];
    let c = canonical_c(n, p);
    AlgorithmRealization::new(a, b, c.clone(), c.clone(), Some(c.transpose()))
}

/// Parsed content of an algorithm JSON file.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    Explicit(AlgorithmRealization),
    Named { kind: NamedKind, bounds: SectorBounds, p: usize },
}

/// Matrices larger than this are rejected when parsing untrusted files.
const MAX_PARSE_DIM: usize = 512;

fn parse_matrix(v: &Value, name: &str) -> Result<Mat> {
    let rows = v
        .as_array()
        .ok_or_else(|| IqcError::Parse(format!("{name} must be an array of rows")))?;
    if rows.len() > MAX_PARSE_DIM {
        return Err(IqcError::Parse(format!("{name} has too many rows")));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let r = r.as_array().ok_or_else(|| IqcError::Parse(format!("{name} rows must be arrays")))?;
        if r.len() > MAX_PARSE_DIM {
            return Err(IqcError::Parse(format!("{name} has too many columns")));
        }
        let vals = r
            .iter()
            .map(|x| x.as_f64().filter(|f| f.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| IqcError::Parse(format!("{name} entries must be finite numbers")))?;
        out.push(vals);
    }
    if out.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(IqcError::Parse(format!("{name} rows have different lengths")));
    }
    Ok(from_rows(&out))
}

fn parse_dim(v: &Value, key: &str) -> Result<usize> {
    let x = v
        .get(key)
        .and_then(Value::as_u64)
        .ok_or_else(|| IqcError::Parse(format!("'{key}' must be a positive integer")))?;
    if x == 0 || x as usize > MAX_PARSE_DIM {
        return Err(IqcError::Parse(format!("'{key}' out of range")));
    }
    Ok(x as usize)
}

/// Parses an algorithm file: either explicit matrices or a named method.
pub fn parse_algorithm_json(text: &str) -> Result<AlgorithmSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| IqcError::Parse(e.to_string()))?;
    if !v.is_object() {
        return Err(IqcError::Parse("top level must be an object".into()));
    }
    if let Some(kind) = v.get("kind") {
        let kind: NamedKind = kind
            .as_str()
            .ok_or_else(|| IqcError::Parse("'kind' must be a string".into()))?
            .parse()?;
        let m = v.get("m").and_then(Value::as_f64).ok_or_else(|| IqcError::Parse("missing 'm'".into()))?;
        let l = v.get("L").and_then(Value::as_f64).ok_or_else(|| IqcError::Parse("missing 'L'".into()))?;
        let p = match v.get("p") {
            Some(_) => parse_dim(&v, "p")?,
            None => 1,
        };
        let bounds = SectorBounds::new(m, l).map_err(|e| IqcError::Parse(e.to_string()))?;
        return Ok(AlgorithmSpec::Named { kind, bounds, p });
    }
    let n = parse_dim(&v, "n")?;
    let p = parse_dim(&v, "p")?;
    if n * p > MAX_PARSE_DIM {
        return Err(IqcError::Parse("n*p out of range".into()));
    }
    let get = |k: &str| v.get(k).ok_or_else(|| IqcError::Parse(format!("missing '{k}'")));
    let a = parse_matrix(get("A")?, "A")?;
    let b = parse_matrix(get("B")?, "B")?;
    let c = parse_matrix(get("C")?, "C")?;
    let d = parse_matrix(get("D")?, "D")?;
    let dd = match v.get("Ddagger") {
        Some(x) if !x.is_null() => Some(parse_matrix(x, "Ddagger")?),
        _ => None,
    };
    let np = n * p;
    let shapes = [(&a, (np, np), "A"), (&b, (np, p), "B"), (&c, (p, np), "C"), (&d, (p, np), "D")];
    for (mat, shape, name) in shapes {
        if mat.shape() != shape {
            return Err(IqcError::Parse(format!("{name} must be {}x{}", shape.0, shape.1)));
        }
    }
    if let Some(x) = &dd {
        if x.shape() != (np, p) {
            return Err(IqcError::Parse(format!("Ddagger must be {np}x{p}")));
        }
    }
    let algo = AlgorithmRealization::new(a, b, c, d, dd)?;
    Ok(AlgorithmSpec::Explicit(algo))
}

impl AlgorithmSpec {
    /// Realization; named specs are built for their stored bounds.
    pub fn realize(&self) -> Result<AlgorithmRealization> {
        match self {
            AlgorithmSpec::Explicit(a) => Ok(a.clone()),
            AlgorithmSpec::Named { kind, bounds, p } => make_named(*kind, bounds, *p),
        }
    }
}

/// Serializes a realization in the algorithm-file schema.
pub fn algorithm_to_json(algo: &AlgorithmRealization) -> Value {
    serde_json::json!({
        "n": algo.n,
        "p": algo.p,
        "A": to_rows(&algo.a),
        "B": to_rows(&algo.b),
        "C": to_rows(&algo.c),
        "D": to_rows(&algo.d),
        "Ddagger": to_rows(&algo.ddagger),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(m: f64, l: f64) -> SectorBounds {
        SectorBounds::new(m, l).unwrap()
    }

    #[test]
    fn gd_parameters() {
        let g = make_named(NamedKind::Gd, &b(1.0, 10.0), 1).unwrap();
        assert_eq!(g.a, from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]));
        assert!((g.b[(0, 0)] + 2.0 / 11.0).abs() < 1e-15);
        assert_eq!(g.b[(1, 0)], 0.0);
    }

    #[test]
    fn tmm_step() {
        let t = NamedAlgorithm::new(NamedKind::Tmm, &b(1.0, 100.0));
        assert!((t.nu1 - 0.019).abs() < 1e-15);
    }

    #[test]
    fn gd_nominal_loop() {
        let g = make_named(NamedKind::Gd, &b(1.0, 10.0), 1).unwrap();
        let (a, r) = nominal_closed_loop(&g, &b(1.0, 10.0));
        let expect = from_rows(&[vec![9.0 / 11.0, 0.0], vec![1.0, 0.0]]);
        assert!((a - expect).amax() < 1e-15);
        assert!((r - 9.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sector_is_one_step() {
        let bb = b(1.0, 1.0);
        let g = make_named(NamedKind::Gd, &bb, 1).unwrap();
        assert!((g.b[(0, 0)] + 1.0).abs() < 1e-15);
        assert!(nominal_closed_loop(&g, &bb).1 < 1e-12);
        let h = make_named(NamedKind::Hb, &bb, 1).unwrap();
        assert_eq!(NamedAlgorithm::new(NamedKind::Hb, &bb).nu2, 0.0);
        assert!(nominal_closed_loop(&h, &bb).1 < 1e-6);
    }

    #[test]
    fn equilibrium_examples() {
        let g = make_named(NamedKind::Gd, &b(1.0, 10.0), 1).unwrap();
        let chk = check_equilibrium_conditions(&g.a, &g.b, &g.c, &g.d, Some(&g.ddagger)).unwrap();
        assert!(chk.holds);

        let a = from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let cd = from_rows(&[vec![1.0, 0.0]]);
        let bb = from_rows(&[vec![-0.1], vec![0.0]]);
        let chk = check_equilibrium_conditions(&a, &bb, &cd, &cd, None).unwrap();
        assert!(chk.holds);
        let x = chk.ddagger.unwrap();
        assert!((x - from_rows(&[vec![1.0], vec![1.0]])).amax() < 1e-10);

        let one = from_rows(&[vec![1.0]]);
        let chk = check_equilibrium_conditions(&zeros(1, 1), &one, &one, &one, None).unwrap();
        assert!(!chk.holds);
        assert!(chk.ddagger.is_none());
    }

    #[test]
    fn structured_n1_is_gradient_descent() {
        let form = StructuredControllerForm { k: vec![eye(2) * -0.1] };
        let algo = from_structured(&form, 2, 1).unwrap();
        assert_eq!(algo.a, eye(2));
        assert_eq!(algo.b, eye(2) * -0.1);
    }

    #[test]
    fn structured_zero_gains() {
        let form = StructuredControllerForm { k: vec![zeros(1, 1), zeros(1, 1)] };
        let algo = from_structured(&form, 1, 2).unwrap();
        assert_eq!(algo.a, from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]));
        assert_eq!(algo.b, zeros(2, 1));
    }

    #[test]
    fn shift_matrices() {
        let a2 = shift_a2(3, 1);
        assert_eq!(a2, from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]]));
        assert_eq!(shift_b1(3, 1), from_rows(&[vec![0.0], vec![0.0], vec![1.0]]));
        assert_eq!(shift_b2(2, 2).shape(), (4, 2));
    }

    #[test]
    fn json_roundtrip() {
        let g = make_named(NamedKind::Tmm, &b(1.0, 30.0), 2).unwrap();
        let text = algorithm_to_json(&g).to_string();
        match parse_algorithm_json(&text).unwrap() {
            AlgorithmSpec::Explicit(h) => assert_eq!(h, g),
            other => panic!("unexpected {other:?}"),
        }
        let named = r#"{"kind":"tmm","m":1.0,"L":100.0,"p":1}"#;
        let spec = parse_algorithm_json(named).unwrap();
        assert_eq!(spec, AlgorithmSpec::Named { kind: NamedKind::Tmm, bounds: b(1.0, 100.0), p: 1 });
    }

    #[test]
    fn json_rejects_garbage() {
        for bad in [
            "",
            "[]",
            r#"{"kind":"xx","m":1,"L":2}"#,
            r#"{"kind":"gd","m":2,"L":1}"#,
            r#"{"n":1,"p":1,"A":[[1]],"B":[[1]],"C":[[1]],"D":[[1, 2]]}"#,
            r#"{"n":1,"p":1,"A":[[0]],"B":[[1]],"C":[[1]],"D":[[1]]}"#,
            r#"{"n":0,"p":1}"#,
        ] {
            assert!(parse_algorithm_json(bad).is_err(), "{bad}");
        }
    }
}
