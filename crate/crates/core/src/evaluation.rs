//! Demand sampling, moment estimation and out-of-sample evaluation of
//! expansion plans.
//!
//! All aggregates are computed from sorted values, so reordering the
//! scenarios never changes a reported number.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::ambiguity::{AmbiguityError, MomentInfo};
use crate::drso::{solve_drso, DrsoConfig, DrsoError};
use crate::formulations::{CapacityMode, Evaluator, FormulationError, Scenario, UncertaintySet};
use crate::network::Instance;
use crate::robust::{solve_robust, RobustConfig, RobustError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("need at least {needed} scenarios, got {got}")]
    TooFewScenarios { needed: usize, got: usize },
    #[error("CVaR of an empty list")]
    EmptyValues,
    #[error("CVaR level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("invalid sampler settings: {0}")]
    Sampler(String),
    #[error("scenario {index}: {source}")]
    Scenario { index: usize, source: FormulationError },
    #[error("commodity {index}: {source}")]
    Moments { index: usize, source: AmbiguityError },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Drso(#[from] DrsoError),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

/// Truncated gamma demand sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub shape: f64,
    pub scale: f64,
    /// Draws above this value are rejected and redrawn.
    pub cap: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { shape: 4.0, scale: 5.0, cap: 50.0, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        for (name, v) in [("shape", self.shape), ("scale", self.scale), ("cap", self.cap)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EvaluationError::Sampler(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// `n` scenarios of `k` demands, drawn scenario by scenario.
pub fn sample_scenarios(cfg: &SamplerConfig, n: usize, k: usize) -> Result<Vec<Scenario>, EvaluationError> {
    cfg.validate()?;
    let gamma = Gamma::new(cfg.shape, cfg.scale).map_err(|e| EvaluationError::Sampler(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = || loop {
        let d: f64 = gamma.sample(&mut rng);
        if d > 0.0 && d <= cfg.cap {
            return d;
        }
    };
    Ok((0..n).map(|_| Scenario::new((0..k).map(|_| draw()).collect())).collect())
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Per-commodity sample mean and unbiased (`n − 1`) variance.
pub fn empirical_moments(training: &[Scenario]) -> Result<Vec<MomentInfo>, EvaluationError> {
    if training.len() < 2 {
        return Err(EvaluationError::TooFewScenarios { needed: 2, got: training.len() });
    }
    let set = UncertaintySet::new(training.to_vec())?;
    let n = training.len() as f64;
    (0..set.dimension())
        .map(|j| {
            let col: Vec<f64> = training.iter().map(|s| s.demands[j]).collect();
            let mean = sorted_sum(col.clone()) / n;
            let var = sorted_sum(col.iter().map(|d| (d - mean).powi(2)).collect()) / (n - 1.0);
            MomentInfo::new(mean, var).map_err(|source| EvaluationError::Moments { index: j, source })
        })
        .collect()
}

/// Mean of the `⌈(1 − level)·n⌉` largest values.
pub fn cvar(values: &[f64], level: f64) -> Result<f64, EvaluationError> {
    if values.is_empty() {
        return Err(EvaluationError::EmptyValues);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(EvaluationError::BadLevel(level));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let m = tail_count(values.len(), level);
    let mut top = v[..m].to_vec();
    top.reverse();
    Ok(top.iter().sum::<f64>() / m as f64)
}

fn tail_count(n: usize, level: f64) -> usize {
    // Round away representation noise such as 0.25·4 = 1.0000000000000002.
    let raw = (1.0 - level) * n as f64;
    let m = ((raw * 1e9).round() / 1e9).ceil() as usize;
    m.clamp(1, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioTotals {
    pub outsourced: f64,
    pub satisfied: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub n_scenarios: usize,
    pub expected_outsourced: f64,
    /// Largest total outsourced demand over the evaluated scenarios.
    pub max_outsourced: f64,
    pub cvar95: f64,
    pub cvar75: f64,
    pub expected_satisfied: f64,
    /// In input order.
    pub per_scenario: Vec<ScenarioTotals>,
}

impl EvaluationReport {
    pub fn from_totals(per_scenario: Vec<ScenarioTotals>) -> Result<Self, EvaluationError> {
        let n = per_scenario.len();
        if n == 0 {
            return Err(EvaluationError::TooFewScenarios { needed: 1, got: 0 });
        }
        let outs: Vec<f64> = per_scenario.iter().map(|t| t.outsourced).collect();
        let mean = sorted_sum(outs.clone()) / n as f64;
        let max = outs.iter().copied().fold(0.0, f64::max);
        // Clamps only absorb rounding between the differently summed tails.
        let cvar75 = cvar(&outs, 0.75)?.max(mean);
        let cvar95 = cvar(&outs, 0.95)?.max(cvar75);
        Ok(Self {
            n_scenarios: n,
            expected_outsourced: mean,
            max_outsourced: max.max(cvar95),
            cvar95,
            cvar75,
            expected_satisfied: sorted_sum(per_scenario.iter().map(|t| t.satisfied).collect()) / n as f64,
            per_scenario,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub capacity_mode: CapacityMode,
    /// Worker threads for scenario solves; at least one.
    pub threads: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { capacity_mode: CapacityMode::Shared, threads: 1 }
    }
}

/// Per-commodity means summed in sorted order.
pub fn mean_scenario(scenarios: &[Scenario]) -> Scenario {
    let k = scenarios.first().map_or(0, |s| s.demands.len());
    let n = scenarios.len() as f64;
    Scenario::new((0..k).map(|j| sorted_sum(scenarios.iter().map(|s| s.demands[j]).collect()) / n).collect())
}

fn run_scenarios(
    ev: &Evaluator,
    x: &[f64],
    scenarios: &[Scenario],
    threads: usize,
) -> Result<Vec<ScenarioTotals>, EvaluationError> {
    let solve = |i: usize, s: &Scenario| {
        ev.evaluate(x, s)
            .map(|o| ScenarioTotals { outsourced: o.total_outsourced(), satisfied: o.total_satisfied() })
            .map_err(|source| EvaluationError::Scenario { index: i, source })
    };
    let threads = threads.max(1).min(scenarios.len().max(1));
    if threads == 1 {
        return scenarios.iter().enumerate().map(|(i, s)| solve(i, s)).collect();
    }
    let chunk = scenarios.len().div_ceil(threads);
    let parts: Vec<Result<Vec<ScenarioTotals>, EvaluationError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                scope.spawn(move || part.iter().enumerate().map(|(i, s)| solve(c * chunk + i, s)).collect())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(scenarios.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Evaluates a fixed expansion on every scenario.
pub fn evaluate_plan(inst: &Instance, x: &[f64], scenarios: &[Scenario]) -> Result<EvaluationReport, EvaluationError> {
    evaluate_plan_with(inst, x, scenarios, &EvalOptions::default())
}

pub fn evaluate_plan_with(
    inst: &Instance,
    x: &[f64],
    scenarios: &[Scenario],
    opts: &EvalOptions,
) -> Result<EvaluationReport, EvaluationError> {
    let set = UncertaintySet::new(scenarios.to_vec())?;
    let ev = Evaluator::new(inst, x, &mean_scenario(set.scenarios()), opts.capacity_mode)?;
    EvaluationReport::from_totals(run_scenarios(&ev, x, scenarios, opts.threads)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    /// `Σ_a c_a · λ · x_a`.
    pub capacity_cost: f64,
    pub report: EvaluationReport,
}

/// Evaluates `λ·x` for each factor on the same scenarios.
pub fn scale_sweep(
    inst: &Instance,
    x: &[f64],
    lambdas: &[f64],
    scenarios: &[Scenario],
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>, EvaluationError> {
    let set = UncertaintySet::new(scenarios.to_vec())?;
    let ev = Evaluator::new(inst, x, &mean_scenario(set.scenarios()), opts.capacity_mode)?;
    lambdas
        .iter()
        .map(|&lambda| {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(EvaluationError::Sampler(format!("scale factor must be >= 0, got {lambda}")));
            }
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let capacity_cost = scaled.iter().zip(inst.network.arcs()).map(|(v, a)| v * a.expansion_cost).sum();
            let report = EvaluationReport::from_totals(run_scenarios(&ev, &scaled, scenarios, opts.threads)?)?;
            Ok(SweepRow { lambda, capacity_cost, report })
        })
        .collect()
}

/// `1.0, 1.08, …, 1.8`.
pub fn drso_sweep_factors() -> Vec<f64> {
    (0..=10).map(|i| (100 + 8 * i) as f64 / 100.0).collect()
}

/// `1.0, 0.95, …, 0.5`.
pub fn robust_sweep_factors() -> Vec<f64> {
    (0..=10).map(|i| (100 - 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanningModel {
    Drso,
    Robust,
}

impl fmt::Display for PlanningModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanningModel::Drso => "drso",
            PlanningModel::Robust => "robust",
        })
    }
}

impl FromStr for PlanningModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drso" => Ok(PlanningModel::Drso),
            "robust" => Ok(PlanningModel::Robust),
            _ => Err(format!("unknown model `{s}` (expected drso or robust)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: PlanningModel,
    pub repetitions: usize,
    pub train_n: usize,
    pub eval_n: usize,
    /// Distribution settings; the seed field is ignored in favour of
    /// per-repetition seeds derived from `master_seed`.
    pub sampler: SamplerConfig,
    pub master_seed: u64,
    pub drso: DrsoConfig,
    pub robust: RobustConfig,
    pub eval: EvalOptions,
    /// Also sweep the first repetition's plan over the model's λ grid.
    pub scale_sweep: bool,
}

impl ExperimentConfig {
    pub fn new(model: PlanningModel, repetitions: usize, eval_n: usize, master_seed: u64) -> Self {
        Self {
            model,
            repetitions,
            train_n: 60,
            eval_n,
            sampler: SamplerConfig::default(),
            master_seed,
            drso: DrsoConfig::default(),
            // Only the expansion is used downstream.
            robust: RobustConfig { routings: false, ..RobustConfig::default() },
            eval: EvalOptions::default(),
            scale_sweep: false,
        }
    }

    /// Sets the capacity mode of every model involved.
    pub fn with_capacity_mode(mut self, mode: CapacityMode) -> Self {
        self.drso.capacity_mode = mode;
        self.robust.capacity_mode = mode;
        self.eval.capacity_mode = mode;
        self
    }
}

/// `(training seed, evaluation seed)` per repetition. Depends only on the
/// master seed, so both models see the same samples.
pub fn repetition_seeds(master_seed: u64, repetitions: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..repetitions).map(|_| (rng.next_u64(), rng.next_u64())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    /// 1-based.
    pub repetition: usize,
    pub model: PlanningModel,
    pub train_seed: u64,
    pub eval_seed: u64,
    /// `Σ c_a x_a`.
    pub capacity_investment: f64,
    /// Mean total outsourcing of the plan on its own training sample
    /// (robust rows).
    pub in_sample_outsourced: Option<f64>,
    /// `Σ_k N_k(d̃ᵏ*)` (moment-model rows).
    pub nature: Option<f64>,
    /// `Σ_k d̃ᵏ*` (moment-model rows).
    pub d_tilde_total: Option<f64>,
    pub report: EvaluationReport,
    /// `Σ x_a`.
    pub capacity_added: f64,
    /// Investment per unit of added capacity; NaN when nothing is added.
    pub unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
    pub sweep: Option<Vec<SweepRow>>,
}

/// Plans on a fresh training sample and evaluates on a fresh evaluation
/// sample, once per repetition.
pub fn run_experiment(inst: &Instance, cfg: &ExperimentConfig) -> Result<ExperimentResult, EvaluationError> {
    if cfg.train_n < 2 {
        return Err(EvaluationError::TooFewScenarios { needed: 2, got: cfg.train_n });
    }
    if cfg.eval_n < 1 {
        return Err(EvaluationError::TooFewScenarios { needed: 1, got: cfg.eval_n });
    }
    let k = inst.num_commodities();
    let mut rows = Vec::with_capacity(cfg.repetitions);
    let mut sweep = None;
    for (r, (train_seed, eval_seed)) in repetition_seeds(cfg.master_seed, cfg.repetitions).into_iter().enumerate() {
        let training = sample_scenarios(&cfg.sampler.with_seed(train_seed), cfg.train_n, k)?;
        let evaluation = sample_scenarios(&cfg.sampler.with_seed(eval_seed), cfg.eval_n, k)?;
        let (x, cap_inv, in_sample, nature, d_total) = match cfg.model {
            PlanningModel::Drso => {
                let moments = empirical_moments(&training)?;
                let sol = solve_drso(inst, &moments, &cfg.drso)?;
                let total = sorted_sum(sol.d_tilde.clone());
                (sol.plan.expansions, sol.plan.capacity_cost, None, Some(sol.nature_value), Some(total))
            }
            PlanningModel::Robust => {
                let set = UncertaintySet::new(training.clone())?;
                let sol = solve_robust(inst, &set, &cfg.robust)?;
                let in_sample =
                    evaluate_plan_with(inst, &sol.plan.expansions, &training, &cfg.eval)?.expected_outsourced;
                (sol.plan.expansions, sol.plan.capacity_cost, Some(in_sample), None, None)
            }
        };
        let report = evaluate_plan_with(inst, &x, &evaluation, &cfg.eval)?;
        if cfg.scale_sweep && r == 0 {
            let factors = match cfg.model {
                PlanningModel::Drso => drso_sweep_factors(),
                PlanningModel::Robust => robust_sweep_factors(),
            };
            sweep = Some(scale_sweep(inst, &x, &factors, &evaluation, &cfg.eval)?);
        }
        let cap_add = sorted_sum(x.clone());
        rows.push(ExperimentRow {
            repetition: r + 1,
            model: cfg.model,
            train_seed,
            eval_seed,
            capacity_investment: cap_inv,
            in_sample_outsourced: in_sample,
            nature,
            d_tilde_total: d_total,
            report,
            capacity_added: cap_add,
            unit_cost: if cap_add > 0.0 { cap_inv / cap_add } else { f64::NAN },
        });
    }
    Ok(ExperimentResult { rows, sweep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_instance;

    fn single_arc(u: f64) -> Instance {
        parse_instance(&format!("NODES 2\ns\nt\nARCS 1\na s t {u} 1\nCOMMODITIES 1\nk s t\nPENALTY 10\n")).unwrap()
    }

    fn scen(v: &[f64]) -> Vec<Scenario> {
        v.iter().map(|&d| Scenario::new(vec![d])).collect()
    }

    #[test]
    fn cvar_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(cvar(&v, 0.95).unwrap(), 98.0);
        assert_eq!(cvar(&[1.0, 2.0, 3.0, 4.0], 0.75).unwrap(), 4.0);
        assert_eq!(cvar(&[7.0; 13], 0.6).unwrap(), 7.0);
        assert_eq!(cvar(&v, 1e-12).unwrap(), 50.5);
        assert_eq!(cvar(&v, 0.999).unwrap(), 100.0);
        assert!(matches!(cvar(&[], 0.9), Err(EvaluationError::EmptyValues)));
        assert!(matches!(cvar(&v, 1.0), Err(EvaluationError::BadLevel(_))));
    }

    #[test]
    fn moments_examples() {
        let m = empirical_moments(&scen(&[4.0, 6.0])).unwrap();
        assert_eq!((m[0].mean, m[0].variance), (5.0, 2.0));
        let c = empirical_moments(&scen(&[3.0, 3.0, 3.0])).unwrap();
        assert_eq!(c[0].variance, 0.0);
        assert!(matches!(empirical_moments(&scen(&[1.0])), Err(EvaluationError::TooFewScenarios { .. })));
    }

    #[test]
    fn sampler_contract() {
        let cfg = SamplerConfig::default().with_seed(11);
        let a = sample_scenarios(&cfg, 200, 3).unwrap();
        assert_eq!(a, sample_scenarios(&cfg, 200, 3).unwrap());
        assert!(a.iter().flat_map(|s| &s.demands).all(|&d| d > 0.0 && d <= 50.0));
        assert_ne!(a, sample_scenarios(&cfg.with_seed(12), 200, 3).unwrap());
        assert!(sample_scenarios(&SamplerConfig { shape: 0.0, ..cfg }, 1, 1).is_err());
    }

    #[test]
    fn hand_solved_evaluation() {
        let inst = single_arc(0.0);
        let r = evaluate_plan(&inst, &[4.0], &scen(&[2.0, 5.0, 9.0])).unwrap();
        let outs: Vec<f64> = r.per_scenario.iter().map(|t| t.outsourced).collect();
        for (got, want) in outs.iter().zip([0.0, 1.0, 5.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!((r.expected_outsourced - 2.0).abs() < 1e-9);
        assert!((r.max_outsourced - 5.0).abs() < 1e-9);

        let none = evaluate_plan(&inst, &[0.0], &scen(&[2.0, 5.0, 9.0])).unwrap();
        assert!((none.expected_outsourced - 16.0 / 3.0).abs() < 1e-9 && none.expected_satisfied.abs() < 1e-12);
        let huge = evaluate_plan(&inst, &[1e4], &scen(&[2.0, 5.0, 9.0])).unwrap();
        assert!(huge.max_outsourced.abs() < 1e-9 && (huge.expected_satisfied - 16.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn threads_do_not_change_results() {
        let inst =
            crate::network::generate_random_instance(&crate::network::us_backbone_topology(), 4, 9, 130.0).unwrap();
        let scenarios = sample_scenarios(&SamplerConfig::default().with_seed(2), 23, 4).unwrap();
        let x = vec![10.0; inst.network.num_arcs()];
        let one = evaluate_plan(&inst, &x, &scenarios).unwrap();
        let many =
            evaluate_plan_with(&inst, &x, &scenarios, &EvalOptions { threads: 3, ..Default::default() }).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn sweep_grids() {
        let d = drso_sweep_factors();
        assert_eq!(d.len(), 11);
        assert_eq!((d[0], d[10]), (1.0, 1.8));
        let r = robust_sweep_factors();
        assert_eq!(r.len(), 11);
        assert_eq!((r[0], r[10]), (1.0, 0.5));

        let inst = single_arc(0.0);
        let s = scen(&[2.0, 5.0, 9.0]);
        let rows = scale_sweep(&inst, &[4.0], &[0.0, 1.0], &s, &EvalOptions::default()).unwrap();
        assert!((rows[0].report.expected_outsourced - 16.0 / 3.0).abs() < 1e-9);
        assert_eq!(rows[1].report, evaluate_plan(&inst, &[4.0], &s).unwrap());
        assert_eq!(rows[1].capacity_cost, 4.0);
    }
}
