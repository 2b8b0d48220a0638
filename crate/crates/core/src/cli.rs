//! The `netplan` command line.
//!
//! Exit codes: 0 on success, 1 for bad input (flags, files, formats), 2 when
//! a solver fails on valid input. Outputs are written atomically.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::ambiguity::MomentInfo;
use crate::drso::{solve_drso, DrsoConfig, DrsoError};
use crate::evaluation::{
    empirical_moments, evaluate_plan_with, mean_scenario, run_experiment, sample_scenarios, EvalOptions,
    EvaluationError, ExperimentConfig, PlanningModel, SamplerConfig,
};
use crate::formulations::{
    build_capacity_subproblem, build_nominal, build_robust, solve_and_extract, CapacityMode, FormulationError,
    ModelKind, Scenario, UncertaintySet,
};
use crate::io::{self, IoError, SolutionFile, SolverStats};
use crate::lp::{Backend, LinearProgram};
use crate::network::{
    generate_random_instance, import_sndlib_native, parse_instance, parse_topology, us_backbone_topology,
    write_instance, Network, DEFAULT_PENALTY,
};
use crate::robust::{solve_robust, RobustConfig, RobustError};

#[derive(Debug, Parser)]
#[command(name = "netplan", version, about = "Network capacity planning under demand uncertainty")]
pub struct Cli {
    /// Worker threads for scenario evaluation.
    #[arg(long, global = true, env = "NETPLAN_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one planning model and write a solution file.
    Solve(SolveArgs),
    /// Evaluate a solution on a scenario file.
    Evaluate(EvaluateArgs),
    /// Repeated train/evaluate runs on one instance.
    Experiment(ExperimentArgs),
    /// Generate instances or scenario files.
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveModel {
    Drso,
    Robust,
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Shared,
    PerCommodity,
}

impl From<ModeArg> for CapacityMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Shared => CapacityMode::Shared,
            ModeArg::PerCommodity => CapacityMode::PerCommodity,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub model: SolveModel,
    #[arg(long)]
    pub instance: PathBuf,
    /// Scenario CSV: the uncertainty set (robust), the source of empirical
    /// moments (drso) or of the mean demand (nominal).
    #[arg(long, conflicts_with = "moments")]
    pub scenarios: Option<PathBuf>,
    /// Moment CSV `commodity,mean,variance`.
    #[arg(long)]
    pub moments: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "shared")]
    pub capacity_mode: ModeArg,
    /// Recorded in the solution file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the solved LP in plain text (for drso, `G` at `d̃*`).
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long)]
    pub per_scenario_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_parser = parse_planning_model)]
    pub model: PlanningModel,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 60)]
    pub train_n: usize,
    #[arg(long, default_value_t = 500)]
    pub eval_n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "shared")]
    pub capacity_mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Sweep the first repetition's plan over the model's scale grid.
    #[arg(long)]
    pub scale_sweep: bool,
    /// Sweep CSV path; defaults to `<out stem>_sweep.csv` next to `--out`.
    #[arg(long, requires = "scale_sweep")]
    pub sweep_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Random commodities and arc costs on a topology.
    Instance(GenerateInstanceArgs),
    /// Truncated gamma demand scenarios.
    Scenarios(GenerateScenariosArgs),
}

#[derive(Debug, Args)]
pub struct GenerateInstanceArgs {
    /// Topology file (instance format or SNDlib native) or `us14` for the
    /// built-in 14-node backbone.
    #[arg(long)]
    pub topology: String,
    #[arg(long)]
    pub commodities: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    pub penalty: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateScenariosArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 4.0)]
    pub shape: f64,
    #[arg(long, default_value_t = 5.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 50.0)]
    pub cap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_planning_model(s: &str) -> Result<PlanningModel, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

fn formulation_failed(e: &FormulationError) -> bool {
    matches!(e, FormulationError::NotOptimal { .. })
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FormulationError> for CliError {
    fn from(e: FormulationError) -> Self {
        if formulation_failed(&e) {
            CliError::Solver(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<DrsoError> for CliError {
    fn from(e: DrsoError) -> Self {
        match &e {
            DrsoError::Formulation(f) if formulation_failed(f) => CliError::Solver(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RobustError> for CliError {
    fn from(e: RobustError) -> Self {
        let failed = match &e {
            RobustError::Formulation(f) | RobustError::Scenario { source: f, .. } => formulation_failed(f),
            RobustError::NoProgress(_) => true,
        };
        if failed {
            CliError::Solver(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Formulation(f) => f.into(),
            EvaluationError::Drso(d) => d.into(),
            EvaluationError::Robust(r) => r.into(),
            EvaluationError::Scenario { ref source, .. } if formulation_failed(source) => {
                CliError::Solver(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("netplan: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(input("--threads must be at least 1")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate(a, threads),
        Command::Experiment(a) => experiment(a, threads),
        Command::Generate(GenerateCommand::Instance(a)) => generate_instance(a),
        Command::Generate(GenerateCommand::Scenarios(a)) => generate_scenarios(a),
    }
}

fn load_instance(path: &Path) -> Result<crate::network::Instance, CliError> {
    let text = io::read_file(path)?;
    parse_instance(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_scenarios(path: &Path, k: usize) -> Result<Vec<Scenario>, CliError> {
    let scenarios =
        io::read_scenarios_csv(&io::read_file(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    if let Some(s) = scenarios.iter().find(|s| s.demands.len() != k) {
        return Err(input(format!(
            "{}: scenarios have {} demands, instance has {k} commodities",
            path.display(),
            s.demands.len()
        )));
    }
    Ok(scenarios)
}

fn load_moments(path: &Path) -> Result<Vec<MomentInfo>, CliError> {
    io::read_moments_csv(&io::read_file(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn dump(path: &Option<PathBuf>, lp: &LinearProgram) -> Result<(), CliError> {
    match path {
        Some(p) => Ok(io::write_atomic(p, &lp.dump())?),
        None => Ok(()),
    }
}

fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let k = inst.num_commodities();
    let mode = CapacityMode::from(a.capacity_mode);
    let scenarios = a.scenarios.as_deref().map(|p| load_scenarios(p, k)).transpose()?;
    let moments = a.moments.as_deref().map(load_moments).transpose()?;
    let file = match a.model {
        SolveModel::Drso => {
            let moments = match (moments, &scenarios) {
                (Some(m), _) => m,
                (None, Some(s)) => empirical_moments(s)?,
                (None, None) => return Err(input("drso needs --moments or --scenarios")),
            };
            let cfg = DrsoConfig { capacity_mode: mode, ..DrsoConfig::default() };
            let sol = solve_drso(&inst, &moments, &cfg)?;
            if a.dump_lp.is_some() {
                dump(&a.dump_lp, &build_capacity_subproblem(&inst, &sol.d_tilde, mode)?)?;
            }
            SolutionFile {
                model: "drso".into(),
                capacity_mode: mode.to_string(),
                x: io::expansion_map(&inst, &sol.plan.expansions),
                d_tilde: Some(sol.d_tilde.clone()),
                capacity_cost: sol.plan.capacity_cost,
                outsourcing_value: sol.plan.outsourcing_value,
                objective: sol.objective,
                nature_value: Some(sol.nature_value),
                seed: a.seed,
                stats: SolverStats {
                    iterations: Some(sol.iterations),
                    f_evaluations: Some(sol.f_evaluations),
                    converged: Some(sol.converged),
                    ..SolverStats::default()
                },
            }
        }
        SolveModel::Robust => {
            let scenarios = scenarios.ok_or_else(|| input("robust needs --scenarios"))?;
            let set = UncertaintySet::new(scenarios)?;
            if a.dump_lp.is_some() {
                dump(&a.dump_lp, &build_robust(&inst, &set, mode)?)?;
            }
            let cfg = RobustConfig { capacity_mode: mode, ..RobustConfig::default() };
            let sol = solve_robust(&inst, &set, &cfg)?;
            SolutionFile {
                model: "robust".into(),
                capacity_mode: mode.to_string(),
                x: io::expansion_map(&inst, &sol.plan.expansions),
                d_tilde: None,
                capacity_cost: sol.plan.capacity_cost,
                outsourcing_value: sol.omega,
                objective: sol.plan.total_objective,
                nature_value: None,
                seed: a.seed,
                stats: SolverStats {
                    generation_rounds: Some(sol.rounds),
                    active_scenarios: Some(sol.active_scenarios.len()),
                    ..SolverStats::default()
                },
            }
        }
        SolveModel::Nominal => {
            let demand = match (&scenarios, &moments) {
                (Some(s), _) => mean_scenario(s),
                (None, Some(m)) => Scenario::new(m.iter().map(|m| m.mean).collect()),
                (None, None) => return Err(input("nominal needs --scenarios or --moments")),
            };
            let lp = build_nominal(&inst, &demand, mode)?;
            dump(&a.dump_lp, &lp)?;
            let plan = solve_and_extract(&inst, &lp, ModelKind::Nominal, Backend::Auto, "nominal model")?;
            SolutionFile {
                model: "nominal".into(),
                capacity_mode: mode.to_string(),
                x: io::expansion_map(&inst, &plan.expansions),
                d_tilde: None,
                capacity_cost: plan.capacity_cost,
                outsourcing_value: plan.outsourcing_value,
                objective: plan.total_objective,
                nature_value: None,
                seed: a.seed,
                stats: SolverStats::default(),
            }
        }
    };
    Ok(io::write_atomic(&a.out, &file.to_json())?)
}

fn evaluate(a: &EvaluateArgs, threads: usize) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let sol = SolutionFile::from_json(&io::read_file(&a.solution)?)
        .map_err(|e| input(format!("{}: {e}", a.solution.display())))?;
    let mode: CapacityMode = sol.capacity_mode.parse().map_err(|e: String| input(e))?;
    let x = sol.expansion_for(&inst)?;
    let scenarios = load_scenarios(&a.scenarios, inst.num_commodities())?;
    let report = evaluate_plan_with(&inst, &x, &scenarios, &EvalOptions { capacity_mode: mode, threads })?;
    if let Some(p) = &a.per_scenario_csv {
        io::write_atomic(p, &io::per_scenario_csv(&report))?;
    }
    Ok(io::write_atomic(&a.out, &io::report_csv(&report))?)
}

fn default_sweep_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_sweep.csv"))
}

fn experiment(a: &ExperimentArgs, threads: usize) -> Result<(), CliError> {
    if a.reps == 0 {
        return Err(input("--reps must be at least 1"));
    }
    let inst = load_instance(&a.instance)?;
    let mut cfg = ExperimentConfig::new(a.model, a.reps, a.eval_n, a.seed).with_capacity_mode(a.capacity_mode.into());
    cfg.train_n = a.train_n;
    cfg.eval.threads = threads;
    cfg.scale_sweep = a.scale_sweep;
    let result = run_experiment(&inst, &cfg)?;
    let comments = vec![
        format!("seed={}", a.seed),
        format!("model={} reps={} train_n={} eval_n={}", a.model, a.reps, a.train_n, a.eval_n),
        format!("capacity_mode={}", CapacityMode::from(a.capacity_mode)),
    ];
    if let Some(rows) = &result.sweep {
        let path = a.sweep_out.clone().unwrap_or_else(|| default_sweep_path(&a.out));
        io::write_atomic(&path, &io::sweep_csv(rows, &comments))?;
    }
    Ok(io::write_atomic(&a.out, &io::experiment_csv(&result.rows, &comments))?)
}

fn load_topology(spec: &str) -> Result<Network, CliError> {
    if spec == "us14" {
        return Ok(us_backbone_topology());
    }
    let text = io::read_file(Path::new(spec))?;
    let parsed = if text.lines().any(|l| l.trim_start().starts_with("NODES (")) {
        import_sndlib_native(&text)
    } else {
        parse_topology(&text)
    };
    parsed.map_err(|e| input(format!("{spec}: {e}")))
}

fn generate_instance(a: &GenerateInstanceArgs) -> Result<(), CliError> {
    let topo = load_topology(&a.topology)?;
    let inst = generate_random_instance(&topo, a.commodities, a.seed, a.penalty).map_err(|e| input(e.to_string()))?;
    let header = format!("# generated from {} with seed={} commodities={}\n", a.topology, a.seed, a.commodities);
    Ok(io::write_atomic(&a.out, &(header + &write_instance(&inst)))?)
}

fn generate_scenarios(a: &GenerateScenariosArgs) -> Result<(), CliError> {
    if a.n == 0 || a.k == 0 {
        return Err(input("--n and --k must be at least 1"));
    }
    let cfg = SamplerConfig { shape: a.shape, scale: a.scale, cap: a.cap, seed: a.seed };
    let scenarios = sample_scenarios(&cfg, a.n, a.k)?;
    let comments = vec![format!("seed={} shape={} scale={} cap={}", a.seed, a.shape, a.scale, a.cap)];
    Ok(io::write_atomic(&a.out, &io::write_scenarios_csv(&scenarios, &comments))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;

    #[test]
    fn solver_failures_exit_with_two() {
        let failed = FormulationError::NotOptimal { context: "nominal model".into(), status: LpStatus::NumericFailure };
        assert_eq!(CliError::from(failed).exit_code(), 2);
        let bad = FormulationError::DimensionMismatch { what: "x", expected: 3, got: 2 };
        assert_eq!(CliError::from(bad).exit_code(), 1);
        assert_eq!(CliError::from(RobustError::NoProgress(7)).exit_code(), 2);
    }

    #[test]
    fn sweep_path_sits_next_to_output() {
        assert_eq!(default_sweep_path(Path::new("out/exp.csv")), PathBuf::from("out/exp_sweep.csv"));
    }
}
