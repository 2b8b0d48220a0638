//! Linear programming model and solvers.
//!
//! [`LinearProgram`] is a plain sparse description (bounded variables,
//! linear objective, `≤ / ≥ / =` rows). [`solve_lp`] picks a backend by
//! size: a dense bounded-variable two-phase simplex ([`DenseSimplex`]) for
//! anything whose tableau fits comfortably in memory, and a sparse
//! LU-based simplex for the large scenario-expanded models.
//!
//! Every optimal answer is checked against the original rows before it is
//! reported; a solution that fails the check comes back as
//! [`LpStatus::NumericFailure`] rather than as a wrong optimum.

mod simplex;
mod sparse;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

pub use simplex::{DenseSimplex, SimplexOptions};

/// Primal feasibility tolerance (absolute, scaled by `max(1, |rhs|)`).
pub const FEAS_TOL: f64 = 1e-7;
/// Relative optimality tolerance.
pub const OPT_TOL: f64 = 1e-6;

/// Tableaus above this many entries go to the sparse backend.
const DENSE_ENTRY_LIMIT: usize = 400_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint {row} references undeclared variable index {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    /// Objective coefficient per variable, indexed like `variables`.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self { sense, variables: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable { name: name.into(), lower, upper });
        self.objective.push(cost);
        VarId(self.variables.len() - 1)
    }

    /// Adds a row and returns its index.
    pub fn add_constraint(&mut self, coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.variables {
            if v.lower.is_nan()
                || v.upper.is_nan()
                || v.lower > v.upper
                || v.lower == f64::INFINITY
                || v.upper == f64::NEG_INFINITY
            {
                return Err(LpError::InvertedBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite(format!("objective coefficient of `{}`", self.variables[j].name)));
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("right-hand side of row {row}")));
            }
            for &(VarId(var), a) in &c.coeffs {
                if var >= self.variables.len() {
                    return Err(LpError::UnknownVariable { row, var });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("row {row}")));
                }
            }
        }
        Ok(())
    }

    /// Evaluates the objective at `x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest scaled violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &val) in self.variables.iter().zip(x) {
            let scale = 1.0f64.max(val.abs());
            worst = worst.max((v.lower - val) / scale).max((val - v.upper) / scale);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(VarId(j), a)| a * x[j]).sum();
            let scale = 1.0f64.max(c.rhs.abs());
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }

    /// Writes a plain-text dump: one line per variable, then one per row.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", if self.sense == Sense::Minimize { "MINIMIZE" } else { "MAXIMIZE" });
        let _ = writeln!(out, "VARIABLES {}", self.variables.len());
        for (v, c) in self.variables.iter().zip(&self.objective) {
            let _ = writeln!(out, "{} {} {} {}", v.name, fmt_bound(v.lower), fmt_bound(v.upper), c);
        }
        let _ = writeln!(out, "CONSTRAINTS {}", self.constraints.len());
        for c in &self.constraints {
            let terms: Vec<String> =
                c.coeffs.iter().map(|&(VarId(j), a)| format!("{a:+} {}", self.variables[j].name)).collect();
            let _ = writeln!(out, "{} {} {}", terms.join(" "), c.relation, c.rhs);
        }
        out
    }
}

fn fmt_bound(b: f64) -> String {
    if b == f64::INFINITY {
        "inf".into()
    } else if b == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{b}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit, singular basis, or a final answer that failed the
    /// feasibility check.
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    /// Variable values, indexed like `LinearProgram::variables`. Empty
    /// unless `status` is `Optimal`.
    pub primal: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn failed(status: LpStatus, iterations: usize) -> Self {
        Self { status, objective_value: f64::NAN, primal: Vec::new(), iterations }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn primal_by_name(&self, lp: &LinearProgram) -> BTreeMap<String, f64> {
        lp.variables.iter().zip(&self.primal).map(|(v, x)| (v.name.clone(), *x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Dense simplex when the tableau is small enough, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// Solves `lp` with the default backend choice.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with(lp, Backend::Auto)
}

pub fn solve_with(lp: &LinearProgram, backend: Backend) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let use_dense = match backend {
        Backend::Dense => true,
        Backend::Sparse => false,
        Backend::Auto => {
            let m = lp.num_constraints();
            m.saturating_mul(lp.num_vars() + 2 * m) <= DENSE_ENTRY_LIMIT
        }
    };
    if use_dense {
        Ok(DenseSimplex::solve(lp, SimplexOptions::default()).1)
    } else {
        Ok(sparse::solve(lp))
    }
}
