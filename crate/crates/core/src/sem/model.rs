//! Model syntax and its RAM compilation.
//!
//! One statement per line, `#` starts a comment, terms are separated by `+`
//! or whitespace, and a term may carry a fixed value as `0.5*name`:
//!
//! ```text
//! Factor =~ a + b + c      # Factor is measured by a, b, c
//! y ~ Factor + x           # y regressed on Factor and x
//! a ~~ b                   # (residual) covariance between a and b
//! ```
//!
//! Names on the left of `=~` are latent; every other name is observed. Each
//! observed variable gets a free residual variance and each latent a residual
//! variance fixed to 1, unless a `v ~~ v` statement says otherwise.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=~")]
    Measures,
    #[serde(rename = "~")]
    Regression,
    #[serde(rename = "~~")]
    Covariance,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Measures => "=~",
            Op::Regression => "~",
            Op::Covariance => "~~",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub lhs: String,
    pub op: Op,
    pub rhs: String,
    /// `Some(v)` when the parameter is fixed at `v`.
    pub fixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemModel {
    /// Observed variables in order of first mention.
    pub observed: Vec<String>,
    pub latent: Vec<String>,
    /// Statements as written (one per left/right pair).
    pub statements: Vec<Statement>,
}

fn parse_term(term: &str, line: usize) -> Result<(String, Option<f64>)> {
    match term.split_once('*') {
        None => Ok((term.to_string(), None)),
        Some((v, name)) => {
            let value: f64 = v.trim().parse().map_err(|_| Error::Parse {
                location: format!("line {line}"),
                message: format!("bad fixed value `{v}`"),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(Error::Parse {
                    location: format!("line {line}"),
                    message: format!("missing name after `{v}*`"),
                });
            }
            Ok((name.to_string(), Some(value)))
        }
    }
}

impl SemModel {
    pub fn parse(text: &str) -> Result<Self> {
        let mut statements = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, op, rest) = if let Some((l, r)) = line.split_once("=~") {
                (l, Op::Measures, r)
            } else if let Some((l, r)) = line.split_once("~~") {
                (l, Op::Covariance, r)
            } else if let Some((l, r)) = line.split_once('~') {
                (l, Op::Regression, r)
            } else {
                return Err(Error::Parse {
                    location: format!("line {line_no}"),
                    message: format!("no operator in `{line}`"),
                });
            };
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    location: format!("line {line_no}"),
                    message: format!("left-hand side must be one name, got `{lhs}`"),
                });
            }
            let terms: Vec<&str> = rest.split(|c: char| c == '+' || c.is_whitespace()).filter(|t| !t.is_empty()).collect();
            if terms.is_empty() {
                return Err(Error::Parse {
                    location: format!("line {line_no}"),
                    message: "empty right-hand side".into(),
                });
            }
            for term in terms {
                let (rhs, fixed) = parse_term(term, line_no)?;
                if rhs.contains('~') || rhs.contains('=') {
                    return Err(Error::Parse {
                        location: format!("line {line_no}"),
                        message: format!("unexpected operator in `{rhs}`"),
                    });
                }
                statements.push(Statement {
                    lhs: lhs.to_string(),
                    op,
                    rhs,
                    fixed,
                });
            }
        }
        Self::from_statements(statements)
    }

    pub fn from_statements(statements: Vec<Statement>) -> Result<Self> {
        if statements.is_empty() {
            return Err(Error::EmptyInput("SEM model"));
        }
        let mut latent: Vec<String> = Vec::new();
        for s in &statements {
            if s.op == Op::Measures && !latent.contains(&s.lhs) {
                latent.push(s.lhs.clone());
            }
        }
        let mut observed: Vec<String> = Vec::new();
        for s in &statements {
            for name in [&s.lhs, &s.rhs] {
                if !latent.contains(name) && !observed.contains(name) {
                    observed.push(name.clone());
                }
            }
        }
        for (i, s) in statements.iter().enumerate() {
            if s.op == Op::Regression && s.lhs == s.rhs {
                return Err(Error::Model(format!("`{}` regressed on itself", s.lhs)));
            }
            let dup = statements[..i].iter().any(|t| {
                t.op == s.op
                    && ((t.lhs == s.lhs && t.rhs == s.rhs) || (s.op == Op::Covariance && t.lhs == s.rhs && t.rhs == s.lhs))
            });
            if dup {
                return Err(Error::Model(format!("duplicate statement `{} {} {}`", s.lhs, s.op.symbol(), s.rhs)));
            }
        }
        Ok(Self {
            observed,
            latent,
            statements,
        })
    }

    /// The shipped model for the Italian panel.
    pub fn italy() -> Self {
        Self::parse(include_str!("../../specs/italy.sem")).expect("bundled spec parses")
    }

    /// The shipped model for the Japanese panel.
    pub fn japan() -> Self {
        Self::parse(include_str!("../../specs/japan.sem")).expect("bundled spec parses")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "italy" => Some(Self::italy()),
            "japan" => Some(Self::japan()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Matrix {
    /// Directed path `row ← col`.
    A,
    /// Symmetric (co)variance.
    Omega,
}

/// One free parameter and where it lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamParam {
    pub matrix: Matrix,
    pub row: usize,
    pub col: usize,
    pub lhs: String,
    pub op: Op,
    pub rhs: String,
}

impl RamParam {
    pub fn label(&self) -> String {
        format!("{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }

    pub fn is_variance(&self) -> bool {
        self.matrix == Matrix::Omega && self.row == self.col
    }
}

/// `Σ(θ) = F(I − A)⁻¹ Ω (I − A)⁻ᵀ Fᵀ` with observed variables first, so `F`
/// keeps the leading `n_observed` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RamModel {
    pub names: Vec<String>,
    pub n_observed: usize,
    pub params: Vec<RamParam>,
    a_fixed: DMatrix<f64>,
    omega_fixed: DMatrix<f64>,
    /// Latents whose first listed loading is free, in latent order, with that parameter's index.
    pub(crate) sign_anchors: Vec<(usize, usize)>,
}

pub fn compile_model(model: &SemModel) -> Result<RamModel> {
    let names: Vec<String> = model.observed.iter().chain(&model.latent).cloned().collect();
    let p = model.observed.len();
    let m = names.len();
    let idx = |n: &str| names.iter().position(|x| x == n).expect("name collected at parse");
    let mut a_fixed = DMatrix::zeros(m, m);
    let mut omega_fixed = DMatrix::zeros(m, m);
    let mut params = Vec::new();
    let mut has_variance = vec![false; m];

    for s in &model.statements {
        let (matrix, row, col) = match s.op {
            Op::Measures => (Matrix::A, idx(&s.rhs), idx(&s.lhs)),
            Op::Regression => (Matrix::A, idx(&s.lhs), idx(&s.rhs)),
            Op::Covariance => {
                let (i, j) = (idx(&s.lhs), idx(&s.rhs));
                if i == j {
                    has_variance[i] = true;
                }
                (Matrix::Omega, i.max(j), i.min(j))
            }
        };
        if matrix == Matrix::A && s.op == Op::Measures && row >= p {
            return Err(Error::Model(format!("latent `{}` cannot be an indicator", s.rhs)));
        }
        match s.fixed {
            Some(v) => match matrix {
                Matrix::A => a_fixed[(row, col)] = v,
                Matrix::Omega => {
                    omega_fixed[(row, col)] = v;
                    omega_fixed[(col, row)] = v;
                }
            },
            None => params.push(RamParam {
                matrix,
                row,
                col,
                lhs: s.lhs.clone(),
                op: s.op,
                rhs: s.rhs.clone(),
            }),
        }
    }
    for (i, name) in names.iter().enumerate() {
        if has_variance[i] {
            continue;
        }
        if i < p {
            params.push(RamParam {
                matrix: Matrix::Omega,
                row: i,
                col: i,
                lhs: name.clone(),
                op: Op::Covariance,
                rhs: name.clone(),
            });
        } else {
            omega_fixed[(i, i)] = 1.0;
        }
    }

    check_acyclic(&names, &params, &a_fixed)?;

    let sign_anchors = model
        .latent
        .iter()
        .filter_map(|l| {
            let first = model.statements.iter().find(|s| s.op == Op::Measures && &s.lhs == l)?;
            let k = params
                .iter()
                .position(|q| q.op == Op::Measures && q.lhs == first.lhs && q.rhs == first.rhs)?;
            Some((idx(l), k))
        })
        .collect();

    Ok(RamModel {
        names,
        n_observed: p,
        params,
        a_fixed,
        omega_fixed,
        sign_anchors,
    })
}

fn check_acyclic(names: &[String], params: &[RamParam], a_fixed: &DMatrix<f64>) -> Result<()> {
    let m = names.len();
    let mut edges = vec![Vec::new(); m];
    for q in params.iter().filter(|q| q.matrix == Matrix::A) {
        edges[q.col].push(q.row);
    }
    for i in 0..m {
        for j in 0..m {
            if a_fixed[(i, j)] != 0.0 {
                edges[j].push(i);
            }
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; m];
    fn visit(v: usize, edges: &[Vec<usize>], state: &mut [u8]) -> Option<usize> {
        state[v] = 1;
        for &w in &edges[v] {
            if state[w] == 1 {
                return Some(w);
            }
            if state[w] == 0 {
                if let Some(c) = visit(w, edges, state) {
                    return Some(c);
                }
            }
        }
        state[v] = 2;
        None
    }
    for v in 0..m {
        if state[v] == 0 {
            if let Some(c) = visit(v, &edges, &mut state) {
                return Err(Error::Model(format!("cyclic paths through `{}`", names[c])));
            }
        }
    }
    Ok(())
}

impl RamModel {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn observed(&self) -> &[String] {
        &self.names[..self.n_observed]
    }

    pub fn matrices(&self, theta: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = self.a_fixed.clone();
        let mut omega = self.omega_fixed.clone();
        for (q, &v) in self.params.iter().zip(theta) {
            match q.matrix {
                Matrix::A => a[(q.row, q.col)] = v,
                Matrix::Omega => {
                    omega[(q.row, q.col)] = v;
                    omega[(q.col, q.row)] = v;
                }
            }
        }
        (a, omega)
    }

    /// `(I − A)⁻¹`; `None` if singular.
    fn path_inverse(&self, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let m = a.nrows();
        (DMatrix::identity(m, m) - a).try_inverse()
    }

    pub fn implied(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let (a, omega) = self.matrices(theta);
        let b = self.path_inverse(&a)?;
        let fb = b.rows(0, self.n_observed).into_owned();
        Some(&fb * omega * fb.transpose())
    }

    /// Starting values: loadings 0.5, paths and covariances 0, observed
    /// residual variances half the sample variance. Later starts are jittered.
    pub(crate) fn start(&self, s: &DMatrix<f64>, start: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng::rng_for(seed, start as u64);
        self.params
            .iter()
            .map(|q| {
                let jitter = start > 0;
                match (q.matrix, q.op) {
                    (Matrix::A, Op::Measures) => {
                        if jitter {
                            rng.random_range(0.2..1.0)
                        } else {
                            0.5
                        }
                    }
                    (Matrix::A, _) => {
                        if jitter {
                            rng.random_range(-0.3..0.3)
                        } else {
                            0.0
                        }
                    }
                    (Matrix::Omega, _) if q.row == q.col => {
                        let base = if q.row < self.n_observed { s[(q.row, q.row)] } else { 1.0 };
                        base * if jitter { rng.random_range(0.2..0.8) } else { 0.5 }
                    }
                    (Matrix::Omega, _) => {
                        if jitter {
                            rng.random_range(-0.1..0.1)
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect()
    }

    /// Rank of `∂ vech Σ / ∂θ` at a random interior point, by central differences.
    pub fn jacobian_rank(&self, seed: u64) -> usize {
        let mut rng = rng::rng_for(seed, 0x1D);
        let theta: Vec<f64> = self
            .params
            .iter()
            .map(|q| match q.matrix {
                Matrix::A => rng.random_range(0.2..0.8) * if rng.random::<bool>() { 1.0 } else { -1.0 },
                Matrix::Omega if q.row == q.col => rng.random_range(0.5..1.5),
                Matrix::Omega => rng.random_range(-0.2..0.2),
            })
            .collect();
        let p = self.n_observed;
        let rows = p * (p + 1) / 2;
        let h = 1e-6;
        let mut jac = DMatrix::zeros(rows, self.n_params());
        let vech = |s: &DMatrix<f64>| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows);
            for j in 0..p {
                for i in j..p {
                    out.push(s[(i, j)]);
                }
            }
            out
        };
        let mut t = theta.clone();
        for k in 0..self.n_params() {
            t[k] = theta[k] + h;
            let up = self.implied(&t).map(|s| vech(&s));
            t[k] = theta[k] - h;
            let down = self.implied(&t).map(|s| vech(&s));
            t[k] = theta[k];
            if let (Some(u), Some(d)) = (up, down) {
                for r in 0..rows {
                    jac[(r, k)] = (u[r] - d[r]) / (2.0 * h);
                }
            }
        }
        let sv = jac.singular_values();
        let top = sv.max();
        sv.iter().filter(|v| **v > 1e-7 * top.max(f64::MIN_POSITIVE)).count()
    }
}
