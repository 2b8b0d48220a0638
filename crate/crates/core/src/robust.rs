//! Robust planning against a finite scenario set.
//!
//! The full model keeps a routing copy per scenario and is large at
//! realistic sizes, so the default strategy solves it by scenario
//! generation: a restricted model over a few scenarios fixes `x`, every
//! scenario is then evaluated against that `x`, and the most violated ones
//! join the restricted model until none exceeds the epigraph value. The
//! result is an optimal solution of the full model.

use thiserror::Error;

use crate::evaluation::mean_scenario;
use crate::formulations::{
    build_robust, build_robust_subset, extract_plan, CapacityMode, Evaluator, FormulationError, ModelKind,
    PlanSolution, UncertaintySet,
};
use crate::lp::{solve_with, Backend};
use crate::network::Instance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("scenario {index}: {source}")]
    Scenario { index: usize, source: FormulationError },
    #[error("scenario generation did not settle after {0} rounds")]
    NoProgress(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RobustStrategy {
    #[default]
    ScenarioGeneration,
    /// All scenario copies in one LP.
    Monolithic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig {
    pub strategy: RobustStrategy,
    pub capacity_mode: CapacityMode,
    pub backend: Backend,
    /// Violated scenarios added per generation round.
    pub batch: usize,
    /// A scenario is violated when its cost exceeds `Ω` by more than
    /// `tolerance · max(1, Ω)`.
    pub tolerance: f64,
    /// Fill in per-scenario routings. Costs one extra evaluation solve
    /// per scenario.
    pub routings: bool,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            strategy: RobustStrategy::ScenarioGeneration,
            capacity_mode: CapacityMode::Shared,
            backend: Backend::Auto,
            batch: 4,
            tolerance: 1e-9,
            routings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSolution {
    /// Expansion plus one routing per scenario of the full set (none when
    /// routings were not requested).
    pub plan: PlanSolution,
    /// Worst-case outsourcing cost `Ω`.
    pub omega: f64,
    /// Scenarios that ended up in the restricted model.
    pub active_scenarios: Vec<usize>,
    pub rounds: usize,
}

pub fn solve_robust(inst: &Instance, set: &UncertaintySet, cfg: &RobustConfig) -> Result<RobustSolution, RobustError> {
    match cfg.strategy {
        RobustStrategy::Monolithic => {
            let lp = build_robust(inst, set, cfg.capacity_mode)?;
            let plan = solve_model(inst, &lp, cfg.backend)?;
            Ok(RobustSolution {
                omega: plan.outsourcing_value,
                plan,
                active_scenarios: (0..set.len()).collect(),
                rounds: 1,
            })
        }
        RobustStrategy::ScenarioGeneration => generate(inst, set, cfg),
    }
}

fn solve_model(inst: &Instance, lp: &crate::lp::LinearProgram, backend: Backend) -> Result<PlanSolution, RobustError> {
    let sol = solve_with(lp, backend).map_err(FormulationError::from)?;
    if !sol.is_optimal() {
        return Err(FormulationError::NotOptimal { context: "robust model".into(), status: sol.status }.into());
    }
    Ok(extract_plan(inst, lp, &sol, ModelKind::Robust)?)
}

fn generate(inst: &Instance, set: &UncertaintySet, cfg: &RobustConfig) -> Result<RobustSolution, RobustError> {
    let n = set.len();
    let na = inst.network.num_arcs();
    let phi = inst.penalty;
    let first = (0..n)
        .max_by(|&a, &b| set.scenarios()[a].total().total_cmp(&set.scenarios()[b].total()).then(b.cmp(&a)))
        .expect("nonempty set");
    let reference = mean_scenario(set.scenarios());
    let mut active = vec![first];
    let mut evaluator: Option<Evaluator> = None;
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > n + 1 {
            return Err(RobustError::NoProgress(rounds - 1));
        }
        let lp = build_robust_subset(inst, set, &active, cfg.capacity_mode, true)?;
        let sol = solve_with(&lp, cfg.backend).map_err(FormulationError::from)?;
        if !sol.is_optimal() {
            return Err(FormulationError::NotOptimal { context: "robust model".into(), status: sol.status }.into());
        }
        // Expansion variables come first, then omega.
        let x: Vec<f64> = sol.primal[..na].iter().map(|v| v.max(0.0)).collect();
        let omega = sol.primal[na].max(0.0);
        let ev = match &evaluator {
            Some(e) => e,
            None => evaluator.insert(Evaluator::new(inst, &x, &reference, cfg.capacity_mode)?),
        };
        let limit = omega + cfg.tolerance * omega.max(1.0);
        let mut worst = omega;
        let mut violated = Vec::new();
        for (i, s) in set.scenarios().iter().enumerate() {
            let o = ev.evaluate(&x, s).map_err(|source| RobustError::Scenario { index: i, source })?;
            let cost = phi * o.total_outsourced();
            worst = worst.max(cost);
            if cost > limit && !active.contains(&i) {
                violated.push((cost, i));
            }
        }
        if violated.is_empty() {
            active.sort_unstable();
            let plan = assemble(inst, set, x, worst, cfg)?;
            return Ok(RobustSolution { omega: plan.outsourcing_value, plan, active_scenarios: active, rounds });
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        active.extend(violated.iter().take(cfg.batch.max(1)).map(|&(_, i)| i));
    }
}

/// Builds the plan at the final `x`, with per-scenario routings from the
/// evaluation model when requested.
fn assemble(
    inst: &Instance,
    set: &UncertaintySet,
    x: Vec<f64>,
    worst: f64,
    cfg: &RobustConfig,
) -> Result<PlanSolution, RobustError> {
    let capacity_cost: f64 = x.iter().zip(inst.network.arcs()).map(|(v, a)| v * a.expansion_cost).sum();
    let mut plan = PlanSolution {
        kind: ModelKind::Robust,
        expansions: x,
        flows: Vec::new(),
        satisfied: Vec::new(),
        outsourced: Vec::new(),
        capacity_cost,
        outsourcing_value: worst,
        total_objective: capacity_cost + worst,
    };
    if !cfg.routings {
        return Ok(plan);
    }
    let ev = Evaluator::detailed(inst, &plan.expansions, &mean_scenario(set.scenarios()), cfg.capacity_mode)?;
    let mut worst = worst;
    for (i, s) in set.scenarios().iter().enumerate() {
        let wrap = |source| RobustError::Scenario { index: i, source };
        let (lp, sol) = ev.solve(&plan.expansions, s).map_err(wrap)?;
        let e = extract_plan(inst, &lp, &sol, ModelKind::Evaluation).map_err(wrap)?;
        worst = worst.max(inst.penalty * e.outsourced[0].iter().sum::<f64>());
        plan.flows.extend(e.flows);
        plan.satisfied.extend(e.satisfied);
        plan.outsourced.extend(e.outsourced);
    }
    plan.outsourcing_value = worst;
    plan.total_objective = plan.capacity_cost + worst;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::Scenario;
    use crate::network::parse_instance;

    fn set(v: &[&[f64]]) -> UncertaintySet {
        UncertaintySet::new(v.iter().map(|d| Scenario::new(d.to_vec())).collect()).unwrap()
    }

    #[test]
    fn plans_for_worst_case() {
        let inst = parse_instance("NODES 2\ns\nt\nARCS 1\na s t 0 1\nCOMMODITIES 1\nk s t\nPENALTY 10\n").unwrap();
        for strategy in [RobustStrategy::ScenarioGeneration, RobustStrategy::Monolithic] {
            let cfg = RobustConfig { strategy, ..Default::default() };
            let r = solve_robust(&inst, &set(&[&[3.0], &[7.0]]), &cfg).unwrap();
            assert!((r.plan.expansions[0] - 7.0).abs() < 1e-9);
            assert!((r.plan.total_objective - 7.0).abs() < 1e-9);
            assert_eq!(r.plan.flows.len(), 2);
            let dup = solve_robust(&inst, &set(&[&[3.0], &[7.0], &[7.0]]), &cfg).unwrap();
            assert!((dup.plan.total_objective - 7.0).abs() < 1e-9);
        }
    }

    #[test]
    fn generation_matches_monolithic() {
        let text = "NODES 4\na\nb\nc\nd\nARCS 5\nab a b 0 3\nbd b d 0 2\nac a c 1 4\ncd c d 2 1\nbc b c 0 1\n\
                    COMMODITIES 2\nk0 a d\nk1 b c\nPENALTY 12\n";
        let inst = parse_instance(text).unwrap();
        let u = set(&[&[3.0, 1.0], &[1.0, 4.0], &[2.5, 2.5], &[0.5, 0.0], &[4.0, 0.5]]);
        let g = solve_robust(&inst, &u, &RobustConfig { batch: 1, ..Default::default() }).unwrap();
        let m = solve_robust(&inst, &u, &RobustConfig { strategy: RobustStrategy::Monolithic, ..Default::default() })
            .unwrap();
        assert!(
            (g.plan.total_objective - m.plan.total_objective).abs() < 1e-7,
            "{} vs {}",
            g.plan.total_objective,
            m.plan.total_objective
        );
        assert!(g.plan.flows.iter().all(|f| f.len() == 2));
    }
}
