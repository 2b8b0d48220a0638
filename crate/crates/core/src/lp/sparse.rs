//! Sparse LU-based simplex (microlp) for models too large for a dense tableau.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

use super::{LinearProgram, LpSolution, LpStatus, Relation, Sense, FEAS_TOL};

pub(super) fn solve(lp: &LinearProgram) -> LpSolution {
    let dir = match lp.sense {
        Sense::Minimize => OptimizationDirection::Minimize,
        Sense::Maximize => OptimizationDirection::Maximize,
    };
    let mut p = Problem::new(dir);
    let vars: Vec<_> = lp.variables.iter().zip(&lp.objective).map(|(v, &c)| p.add_var(c, (v.lower, v.upper))).collect();
    for c in &lp.constraints {
        let terms: Vec<_> = c.coeffs.iter().map(|&(v, a)| (vars[v.0], a)).collect();
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(terms.as_slice(), op, c.rhs);
    }
    match p.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
            if lp.max_violation(&x) > FEAS_TOL {
                return LpSolution::failed(LpStatus::NumericFailure, 0);
            }
            LpSolution { status: LpStatus::Optimal, objective_value: lp.objective_at(&x), primal: x, iterations: 0 }
        }
        Ok(SolveOutcome::Interrupted(_)) => LpSolution::failed(LpStatus::NumericFailure, 0),
        Err(microlp::Error::Infeasible) => LpSolution::failed(LpStatus::Infeasible, 0),
        Err(microlp::Error::Unbounded) => LpSolution::failed(LpStatus::Unbounded, 0),
        Err(_) => LpSolution::failed(LpStatus::NumericFailure, 0),
    }
}
