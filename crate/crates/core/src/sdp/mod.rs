//! Block-LMI problems and the conic solver behind them.
//!
//! An [`SdpProblem`] lives on a flat decision vector `x ∈ Rⁿ`. Matrix variables
//! are views onto contiguous ranges of `x`; every constraint is affine in `x`.

mod expr;
mod solve;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use expr::Affine;
pub use solve::{solve, SdpSolution, SolveOptions, SolveStatus};

use crate::error::{IqcError, Result};
use crate::linalg::{from_rows, to_rows, zeros, Mat};

/// Sense of an LMI block `F(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// `F(x) ⪯ −eps·I`
    NegDef,
    /// `F(x) ⪰ eps·I`
    PosDef,
    /// `F(x) = 0`
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub name: String,
    pub sense: Sense,
    pub eps: f64,
    pub expr: Affine,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.expr.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    /// `aᵀx + c ≤ 0`
    Le,
    /// `aᵀx + c = 0`
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub kind: LinearKind,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearConstraint {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Scalar,
    Symmetric,
    Full,
}

/// A named variable occupying `x[offset .. offset + len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: VarKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        match self.kind {
            VarKind::Scalar => 1,
            VarKind::Symmetric => self.rows * (self.rows + 1) / 2,
            VarKind::Full => self.rows * self.cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expression for this variable.
    pub fn expr(&self) -> Affine {
        let mut out = Affine::zeros(self.rows, self.cols);
        let mut k = self.offset;
        match self.kind {
            VarKind::Scalar => return Affine::var(k),
            VarKind::Symmetric => {
                for j in 0..self.rows {
                    for i in 0..=j {
                        let mut e = zeros(self.rows, self.rows);
                        e[(i, j)] = 1.0;
                        e[(j, i)] = 1.0;
                        out.terms.insert(k, e);
                        k += 1;
                    }
                }
            }
            VarKind::Full => {
                for j in 0..self.cols {
                    for i in 0..self.rows {
                        let mut e = zeros(self.rows, self.cols);
                        e[(i, j)] = 1.0;
                        out.terms.insert(k, e);
                        k += 1;
                    }
                }
            }
        }
        out
    }

    /// Value of this variable at `x`.
    pub fn value(&self, x: &[f64]) -> Mat {
        self.expr().eval(x)
    }
}

/// Feasibility or minimization problem over affine LMI blocks and linear constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub n_vars: usize,
    pub variables: Vec<VarBlock>,
    pub blocks: Vec<LmiBlock>,
    pub linear: Vec<LinearConstraint>,
    /// Sparse linear objective to minimize; empty means pure feasibility.
    pub objective: Vec<(usize, f64)>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_var(&mut self, name: &str, kind: VarKind, rows: usize, cols: usize) -> VarBlock {
        let v = VarBlock { name: name.to_string(), kind, rows, cols, offset: self.n_vars };
        self.n_vars += v.len();
        self.variables.push(v.clone());
        v
    }

    pub fn scalar(&mut self, name: &str) -> VarBlock {
        self.push_var(name, VarKind::Scalar, 1, 1)
    }

    pub fn symmetric(&mut self, name: &str, n: usize) -> VarBlock {
        self.push_var(name, VarKind::Symmetric, n, n)
    }

    pub fn full(&mut self, name: &str, rows: usize, cols: usize) -> VarBlock {
        self.push_var(name, VarKind::Full, rows, cols)
    }

    pub fn var(&self, name: &str) -> Option<&VarBlock> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Adds `expr ⪯ −eps·I` (symmetrized).
    pub fn neg_def(&mut self, name: &str, expr: Affine, eps: f64) {
        self.blocks.push(LmiBlock { name: name.into(), sense: Sense::NegDef, eps, expr: expr.sym() });
    }

    /// Adds `expr ⪰ eps·I` (symmetrized).
    pub fn pos_def(&mut self, name: &str, expr: Affine, eps: f64) {
        self.blocks.push(LmiBlock { name: name.into(), sense: Sense::PosDef, eps, expr: expr.sym() });
    }

    /// Adds entrywise `expr ≤ 0`.
    pub fn le_zero(&mut self, name: &str, expr: &Affine) {
        self.push_entrywise(name, expr, LinearKind::Le);
    }

    /// Adds entrywise `expr = 0`.
    pub fn eq_zero(&mut self, name: &str, expr: &Affine) {
        self.push_entrywise(name, expr, LinearKind::Eq);
    }

    fn push_entrywise(&mut self, name: &str, expr: &Affine, kind: LinearKind) {
        for i in 0..expr.nrows() {
            for j in 0..expr.ncols() {
                let coeffs: Vec<(usize, f64)> = expr
                    .terms
                    .iter()
                    .map(|(&k, f)| (k, f[(i, j)]))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                self.linear.push(LinearConstraint {
                    name: format!("{name}[{i},{j}]"),
                    kind,
                    coeffs,
                    constant: expr.constant[(i, j)],
                });
            }
        }
    }

    /// Minimize the 1×1 expression `expr` (its constant part is ignored).
    pub fn minimize(&mut self, expr: &Affine) {
        assert_eq!(expr.shape(), (1, 1), "objective must be scalar");
        self.objective = expr.terms.iter().map(|(&k, f)| (k, f[(0, 0)])).filter(|&(_, a)| a != 0.0).collect();
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * x[i]).sum()
    }

    /// Worst violation of any constraint at `x`, in absolute units.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            let v = b.expr.eval(x);
            let viol = match b.sense {
                Sense::NegDef => crate::linalg::max_sym_eig(&v) + b.eps,
                Sense::PosDef => b.eps - crate::linalg::min_sym_eig(&v),
                Sense::Zero => v.amax(),
            };
            worst = worst.max(viol);
        }
        for c in &self.linear {
            let v = c.eval(x);
            worst = worst.max(match c.kind {
                LinearKind::Le => v,
                LinearKind::Eq => v.abs(),
            });
        }
        worst
    }

    /// Checks block symmetry, index bounds and shapes.
    pub fn validate(&self) -> Result<()> {
        let mut expect = 0;
        for v in &self.variables {
            if v.offset != expect {
                return Err(IqcError::Structure(format!("variable '{}' has offset {}", v.name, v.offset)));
            }
            if v.kind == VarKind::Symmetric && v.rows != v.cols {
                return Err(IqcError::Structure(format!("symmetric variable '{}' is not square", v.name)));
            }
            expect += v.len();
        }
        if expect != self.n_vars {
            return Err(IqcError::Structure("variable layout does not cover n_vars".into()));
        }
        for b in &self.blocks {
            let (r, c) = b.expr.shape();
            if r != c {
                return Err(IqcError::Structure(format!("block '{}' is not square", b.name)));
            }
            if !(b.eps.is_finite() && b.eps >= 0.0) {
                return Err(IqcError::Structure(format!("block '{}' has invalid eps", b.name)));
            }
            let mats = std::iter::once(&b.expr.constant).chain(b.expr.terms.values());
            for m in mats {
                if m.shape() != (r, c) || !m.iter().all(|v| v.is_finite()) {
                    return Err(IqcError::Structure(format!("block '{}' has a malformed coefficient", b.name)));
                }
                if (m - m.transpose()).amax() > 1e-9 * (1.0 + m.amax()) {
                    return Err(IqcError::Structure(format!("block '{}' is not symmetric", b.name)));
                }
            }
            if b.expr.terms.keys().any(|&k| k >= self.n_vars) {
                return Err(IqcError::Structure(format!("block '{}' references an unknown variable", b.name)));
            }
        }
        for c in &self.linear {
            if c.coeffs.iter().any(|&(k, a)| k >= self.n_vars || !a.is_finite()) || !c.constant.is_finite() {
                return Err(IqcError::Structure(format!("linear constraint '{}' is malformed", c.name)));
            }
        }
        if self.objective.iter().any(|&(k, a)| k >= self.n_vars || !a.is_finite()) {
            return Err(IqcError::Structure("objective is malformed".into()));
        }
        Ok(())
    }

    /// JSON interchange: every block is written as dense symmetric matrices.
    pub fn to_json(&self) -> Value {
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .map(|b| {
                let terms: Vec<Value> = b
                    .expr
                    .terms
                    .iter()
                    .map(|(&k, m)| serde_json::json!({ "var": k, "coeff": to_rows(m) }))
                    .collect();
                serde_json::json!({
                    "name": b.name,
                    "sense": b.sense,
                    "eps": b.eps,
                    "dim": b.dim(),
                    "constant": to_rows(&b.expr.constant),
                    "terms": terms,
                })
            })
            .collect();
        serde_json::json!({
            "n_vars": self.n_vars,
            "variables": self.variables,
            "blocks": blocks,
            "linear": self.linear,
            "objective": self.objective,
        })
    }

    /// Decodes the JSON interchange format and validates the result.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Term {
            var: usize,
            coeff: Vec<Vec<f64>>,
        }
        #[derive(Deserialize)]
        struct Block {
            name: String,
            sense: Sense,
            eps: f64,
            dim: usize,
            constant: Vec<Vec<f64>>,
            terms: Vec<Term>,
        }
        #[derive(Deserialize)]
        struct Raw {
            n_vars: usize,
            variables: Vec<VarBlock>,
            blocks: Vec<Block>,
            linear: Vec<LinearConstraint>,
            objective: Vec<(usize, f64)>,
        }
        const MAX_DIM: usize = 200;
        const MAX_VARS: usize = 20_000;

        let raw: Raw = serde_json::from_str(text).map_err(|e| IqcError::Parse(e.to_string()))?;
        if raw.n_vars > MAX_VARS {
            return Err(IqcError::Parse("too many variables".into()));
        }
        let as_square = |rows: &Vec<Vec<f64>>, dim: usize| -> Result<Mat> {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(IqcError::Parse(format!("expected a {dim}x{dim} matrix")));
            }
            Ok(if dim == 0 { zeros(0, 0) } else { from_rows(rows) })
        };
        let mut blocks = Vec::with_capacity(raw.blocks.len());
        for b in raw.blocks {
            if b.dim > MAX_DIM {
                return Err(IqcError::Parse(format!("block '{}' exceeds dimension {MAX_DIM}", b.name)));
            }
            let mut expr = Affine::constant(as_square(&b.constant, b.dim)?);
            for t in b.terms {
                let m = as_square(&t.coeff, b.dim)?;
                if expr.terms.insert(t.var, m).is_some() {
                    return Err(IqcError::Parse(format!("block '{}' repeats variable {}", b.name, t.var)));
                }
            }
            blocks.push(LmiBlock { name: b.name, sense: b.sense, eps: b.eps, expr });
        }
        for v in &raw.variables {
            if v.rows > MAX_DIM || v.cols > MAX_DIM {
                return Err(IqcError::Parse(format!("variable '{}' is too large", v.name)));
            }
        }
        let p = SdpProblem {
            n_vars: raw.n_vars,
            variables: raw.variables,
            blocks,
            linear: raw.linear,
            objective: raw.objective,
        };
        p.validate().map_err(|e| IqcError::Parse(e.to_string()))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_layout() {
        let mut p = SdpProblem::new();
        let a = p.symmetric("P", 3);
        let b = p.full("Q", 2, 3);
        let t = p.scalar("t");
        assert_eq!((a.offset, b.offset, t.offset, p.n_vars), (0, 6, 12, 13));
        let x: Vec<f64> = (0..13).map(|i| i as f64).collect();
        let pv = a.value(&x);
        assert_eq!(pv, pv.transpose());
        assert_eq!(pv[(0, 2)], 3.0);
        assert_eq!(b.value(&x)[(1, 0)], 7.0);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn json_roundtrip() {
        let mut p = SdpProblem::new();
        let x = p.scalar("x").expr();
        let blk = Affine::blocks(&[vec![x.clone(), Affine::eye(1)], vec![Affine::eye(1), x.clone()]]);
        p.pos_def("psd", blk, 0.0);
        p.le_zero("bound", &(&x - &Affine::eye(1).scale(5.0)));
        p.minimize(&x);
        let text = p.to_json().to_string();
        let q = SdpProblem::from_json(&text).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn json_rejects_asymmetric_block() {
        let text = r#"{"n_vars":1,"variables":[{"name":"x","kind":"scalar","rows":1,"cols":1,"offset":0}],
            "blocks":[{"name":"b","sense":"pos_def","eps":0.0,"dim":2,"constant":[[0,1],[0,0]],"terms":[]}],
            "linear":[],"objective":[]}"#;
        assert!(SdpProblem::from_json(text).is_err());
    }
}
