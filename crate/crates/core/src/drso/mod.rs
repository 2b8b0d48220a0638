//! Moment-ambiguity planning: minimize `F(d̃) = G(d̃) + φ Σ_k N_k(d̃ᵏ)`
//! over committed demands `d̃ ≥ 0`.
//!
//! `G` is the cheapest expansion that routes exactly `d̃`; `N_k` is the
//! closed-form worst-case expected shortfall of commodity `k`. `F` is
//! convex, so a derivative-free simplex search is enough.

pub mod nelder_mead;

use std::cell::Cell;

use thiserror::Error;

use crate::ambiguity::{multi_commodity_shortfall, AmbiguityError, MomentInfo};
use crate::formulations::{
    build_capacity_subproblem, solve_and_extract, CapacityMode, CapacitySubproblem, FormulationError, ModelKind,
    PlanSolution,
};
use crate::lp::{solve_lp, Backend};
use crate::network::Instance;

pub use nelder_mead::{NmCoefficients, NmOptions, NmResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrsoError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Ambiguity(#[from] AmbiguityError),
    #[error("expected {expected} moment entries, got {got}")]
    MomentCount { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrsoConfig {
    /// Per search run. `None` means `5000 · K`.
    pub max_iterations: Option<usize>,
    /// Relative spread of the simplex values that ends a run.
    pub simplex_tolerance: f64,
    /// Relative simplex size that must also be reached; zero stops on the
    /// value spread alone.
    pub point_tolerance: f64,
    /// Starting `d̃`; the demand means when `None`.
    pub initial_point: Option<Vec<f64>>,
    /// Initial simplex edge along `e_k`, as a fraction of `μ_k`.
    pub initial_step: f64,
    /// Fresh-simplex restarts from the incumbent after a run converges.
    pub restarts: usize,
    pub coefficients: NmCoefficients,
    pub capacity_mode: CapacityMode,
}

impl Default for DrsoConfig {
    fn default() -> Self {
        Self {
            max_iterations: None,
            simplex_tolerance: 1e-4,
            point_tolerance: 1e-3,
            initial_point: None,
            initial_step: 0.25,
            restarts: 2,
            coefficients: NmCoefficients::default(),
            capacity_mode: CapacityMode::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrsoSolution {
    /// Expansion and routing of `G(d̃*)`, with the outsourcing term set to
    /// `φ Σ N(d̃*)`.
    pub plan: PlanSolution,
    pub d_tilde: Vec<f64>,
    /// `Σ_k N_k(d̃ᵏ*)`.
    pub nature_value: f64,
    pub objective: f64,
    pub iterations: usize,
    pub f_evaluations: usize,
    /// False when the last search run stopped at the iteration limit.
    pub converged: bool,
}

fn check_moments(inst: &Instance, moments: &[MomentInfo]) -> Result<(), DrsoError> {
    if moments.len() != inst.num_commodities() {
        return Err(DrsoError::MomentCount { expected: inst.num_commodities(), got: moments.len() });
    }
    for m in moments {
        m.validate()?;
    }
    Ok(())
}

/// `G(d̃)` by a single cold LP solve.
pub fn capacity_cost(inst: &Instance, d_tilde: &[f64], mode: CapacityMode) -> Result<f64, DrsoError> {
    let lp = build_capacity_subproblem(inst, d_tilde, mode)?;
    let sol = solve_lp(&lp).map_err(FormulationError::from)?;
    if !sol.is_optimal() {
        return Err(FormulationError::NotOptimal { context: "capacity subproblem".into(), status: sol.status }.into());
    }
    Ok(sol.objective_value)
}

/// `F(d̃) = G(d̃) + φ Σ_k N_k(d̃ᵏ)`.
pub fn objective_f(
    inst: &Instance,
    moments: &[MomentInfo],
    d_tilde: &[f64],
    mode: CapacityMode,
) -> Result<f64, DrsoError> {
    check_moments(inst, moments)?;
    let g = capacity_cost(inst, d_tilde, mode)?;
    Ok(g + inst.penalty * multi_commodity_shortfall(d_tilde, moments)?)
}

/// `F` with the subproblem prepared once and re-solved per point.
pub struct Objective<'a> {
    inst: &'a Instance,
    moments: &'a [MomentInfo],
    sub: CapacitySubproblem,
    mode: CapacityMode,
    evaluations: Cell<usize>,
}

impl<'a> Objective<'a> {
    pub fn new(inst: &'a Instance, moments: &'a [MomentInfo], mode: CapacityMode) -> Result<Self, DrsoError> {
        check_moments(inst, moments)?;
        let reference: Vec<f64> = moments.iter().map(|m| m.mean).collect();
        let sub = CapacitySubproblem::new(inst, &reference, mode)?;
        Ok(Self { inst, moments, sub, mode, evaluations: Cell::new(0) })
    }

    pub fn capacity_cost(&self, d_tilde: &[f64]) -> Result<f64, DrsoError> {
        Ok(self.sub.value(d_tilde)?)
    }

    pub fn value(&self, d_tilde: &[f64]) -> Result<f64, DrsoError> {
        self.evaluations.set(self.evaluations.get() + 1);
        let g = self.sub.value(d_tilde)?;
        Ok(g + self.inst.penalty * multi_commodity_shortfall(d_tilde, self.moments)?)
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    /// Decoded `G(d̃)` plan, from a cold solve of the per-commodity model.
    pub fn plan(&self, d_tilde: &[f64]) -> Result<PlanSolution, DrsoError> {
        let lp = build_capacity_subproblem(self.inst, d_tilde, self.mode)?;
        Ok(solve_and_extract(self.inst, &lp, ModelKind::CapacitySubproblem, Backend::Auto, "capacity subproblem")?)
    }
}

/// Minimizes `F` by Nelder-Mead with restarts and returns the plan of
/// `G` at the best point found.
pub fn solve_drso(inst: &Instance, moments: &[MomentInfo], cfg: &DrsoConfig) -> Result<DrsoSolution, DrsoError> {
    check_moments(inst, moments)?;
    let k = inst.num_commodities();
    if !(cfg.simplex_tolerance > 0.0) {
        return Err(DrsoError::Config(format!("simplex tolerance must be > 0, got {}", cfg.simplex_tolerance)));
    }
    if !(cfg.point_tolerance >= 0.0) {
        return Err(DrsoError::Config(format!("point tolerance must be >= 0, got {}", cfg.point_tolerance)));
    }
    if cfg.max_iterations == Some(0) {
        return Err(DrsoError::Config("max_iterations must be at least 1".into()));
    }
    if !(cfg.initial_step > 0.0) {
        return Err(DrsoError::Config(format!("initial step must be > 0, got {}", cfg.initial_step)));
    }
    let objective = Objective::new(inst, moments, cfg.capacity_mode)?;
    let means: Vec<f64> = moments.iter().map(|m| m.mean).collect();
    let mut x = match &cfg.initial_point {
        Some(p) if p.len() != k => return Err(DrsoError::MomentCount { expected: k, got: p.len() }),
        Some(p) => p.clone(),
        None => means.clone(),
    };
    let steps: Vec<f64> = means.iter().map(|m| cfg.initial_step * m).collect();
    let opts = NmOptions {
        coefficients: cfg.coefficients,
        tolerance: cfg.simplex_tolerance,
        point_tolerance: cfg.point_tolerance,
        max_iterations: cfg.max_iterations.unwrap_or(5000 * k),
    };

    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for run in 0..=cfg.restarts {
        let r = nelder_mead::minimize(|p| objective.value(p), &x, &steps, &opts)?;
        iterations += r.iterations;
        converged = r.converged;
        let gain = best - r.value;
        if r.value < best {
            best = r.value;
            x = r.x;
        }
        if run > 0 && gain <= cfg.simplex_tolerance * (1.0 + best.abs()) {
            break;
        }
    }

    let nature_value = multi_commodity_shortfall(&x, moments)?;
    let mut plan = objective.plan(&x)?;
    plan.kind = ModelKind::Drso;
    plan.outsourcing_value = inst.penalty * nature_value;
    plan.total_objective = plan.capacity_cost + plan.outsourcing_value;
    Ok(DrsoSolution {
        objective: plan.total_objective,
        plan,
        d_tilde: x,
        nature_value,
        iterations,
        f_evaluations: objective.evaluations(),
        converged,
    })
}
