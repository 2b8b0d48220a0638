//! LP builders for the expansion models and decoding of their solutions.
//!
//! Variable names are fixed so a solution can be decoded from the LP
//! alone: `x[arc]`, `f[k][arc]` (robust: `f[k][scenario][arc]`),
//! `tau[k]` (robust: `tau[k][scenario]`), `omega`, `dt[k]` for routed
//! demand and `dev+[k]` / `dev-[k]` for the penalty-form deviations.
//! `k` and `scenario` are zero-based positions; `arc` is the arc id.
//!
//! Flow conservation is written at every node except the commodity
//! source, whose balance is implied by the others.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lp::{
    solve_lp, Backend, DenseSimplex, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense, SimplexOptions,
    VarId,
};
use crate::network::Instance;

/// Tableaus above this size are not kept around for warm starts.
const WARM_ENTRY_LIMIT: usize = 6_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("{what}[{index}] = {value} is not a finite nonnegative number")]
    InvalidValue { what: &'static str, index: usize, value: f64 },
    #[error("uncertainty set is empty")]
    EmptyUncertaintySet,
    #[error("{context}: LP status {status:?}")]
    NotOptimal { context: String, status: LpStatus },
    #[error("variable `{0}` does not belong to this model")]
    UnmappedVariable(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum CapacityMode {
    /// One capacity bound per arc shared by all commodities.
    #[default]
    Shared,
    /// Every commodity may use the full expanded capacity of an arc.
    PerCommodity,
}

impl fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapacityMode::Shared => "shared",
            CapacityMode::PerCommodity => "per-commodity",
        })
    }
}

impl FromStr for CapacityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(CapacityMode::Shared),
            "per-commodity" => Ok(CapacityMode::PerCommodity),
            _ => Err(format!("unknown capacity mode `{s}` (expected shared or per-commodity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub demands: Vec<f64>,
}

impl Scenario {
    pub fn new(demands: Vec<f64>) -> Self {
        Self { demands }
    }

    pub fn validate(&self, k: usize) -> Result<(), FormulationError> {
        check_vector("demand", &self.demands, k)
    }

    pub fn total(&self) -> f64 {
        self.demands.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    scenarios: Vec<Scenario>,
}

impl UncertaintySet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, FormulationError> {
        let first = scenarios.first().ok_or(FormulationError::EmptyUncertaintySet)?;
        let k = first.demands.len();
        for s in &scenarios {
            s.validate(k)?;
        }
        Ok(Self { scenarios })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.scenarios[0].demands.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Nominal,
    Robust,
    /// `G(d̃)`: route exactly `d̃` at minimum expansion cost.
    CapacitySubproblem,
    /// `G′(d̃)`: soft version of `G` with an absolute-deviation penalty.
    CapacityPenalty,
    /// Minimum total outsourcing for a fixed plan and scenario.
    Evaluation,
    /// `G(d̃*)` plan of the moment-ambiguity model; decoded like
    /// `CapacitySubproblem`.
    Drso,
}

/// Decoded model solution. Per-scenario vectors have one entry for all
/// models except the robust one.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSolution {
    pub kind: ModelKind,
    /// `x_a` per arc. Empty for evaluation models, where `x` is data.
    pub expansions: Vec<f64>,
    /// `flows[scenario][k][arc]`.
    pub flows: Vec<Vec<Vec<f64>>>,
    /// Demand delivered at each sink, `satisfied[scenario][k]`.
    pub satisfied: Vec<Vec<f64>>,
    /// Shortfall `τ`, `outsourced[scenario][k]`; zero for `G`.
    pub outsourced: Vec<Vec<f64>>,
    pub capacity_cost: f64,
    pub outsourcing_value: f64,
    pub total_objective: f64,
}

impl PlanSolution {
    pub fn capacity_added(&self) -> f64 {
        self.expansions.iter().sum()
    }
}

fn check_vector(what: &'static str, v: &[f64], expected: usize) -> Result<(), FormulationError> {
    if v.len() != expected {
        return Err(FormulationError::DimensionMismatch { what, expected, got: v.len() });
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !x.is_finite() || **x < 0.0) {
        return Err(FormulationError::InvalidValue { what, index, value });
    }
    Ok(())
}

/// Row indices whose right-hand sides carry the data of a model.
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    /// Per commodity: sink balance row (`G`) or demand row (evaluation).
    pub demand_rows: Vec<usize>,
    /// Evaluation only: `dt[k] ≤ d_k` rows.
    pub bound_rows: Vec<usize>,
    /// Capacity rows with the arc each belongs to.
    pub cap_rows: Vec<(usize, usize)>,
}

/// Commodities routed by one flow variable per arc.
///
/// Under shared capacities, commodities with a common source and distinct
/// sinks may share a flow: a single-source flow with several sinks splits
/// into paths per sink, so the optimal values do not change. Internal
/// re-solved models use this to cut their size.
#[derive(Debug, Clone)]
pub(crate) struct Group {
    name: String,
    source: usize,
    members: Vec<usize>,
}

pub(crate) fn commodity_groups(inst: &Instance, aggregate: bool) -> Vec<Group> {
    let coms = &inst.commodities;
    if !aggregate {
        return coms
            .iter()
            .enumerate()
            .map(|(k, c)| Group { name: format!("f[{k}]"), source: c.source, members: vec![k] })
            .collect();
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); inst.network.num_nodes()];
    for (k, c) in coms.iter().enumerate() {
        let slot =
            by_source[c.source].iter().copied().find(|&g| groups[g].members.iter().all(|&j| coms[j].sink != c.sink));
        match slot {
            Some(g) => groups[g].members.push(k),
            None => {
                by_source[c.source].push(groups.len());
                groups.push(Group { name: format!("F[{}]", groups.len()), source: c.source, members: vec![k] });
            }
        }
    }
    groups
}

/// Sink-row terms of one commodity: the row reads
/// `inflow − outflow + extra  (rel)  rhs`.
struct Sink {
    extra: Vec<(VarId, f64)>,
    rel: Relation,
    rhs: f64,
}

/// Adds the flow variables of one group and its balance rows. Returns the
/// flows and the sink row of each member, in member order.
fn flow_block(
    lp: &mut LinearProgram,
    inst: &Instance,
    group: &Group,
    label: &str,
    sinks: Vec<Sink>,
) -> (Vec<VarId>, Vec<usize>) {
    let net = &inst.network;
    let flows: Vec<VarId> = net
        .arcs()
        .iter()
        .map(|a| lp.add_var(format!("{}{label}[{}]", group.name, a.id), 0.0, f64::INFINITY, 0.0))
        .collect();
    let mut at_node: Vec<Option<(usize, Sink)>> = (0..net.num_nodes()).map(|_| None).collect();
    for (i, (&k, sink)) in group.members.iter().zip(sinks).enumerate() {
        at_node[inst.commodities[k].sink] = Some((i, sink));
    }
    let mut sink_rows = vec![0; group.members.len()];
    for (v, entry) in at_node.into_iter().enumerate() {
        if v == group.source {
            continue;
        }
        let mut row: Vec<(VarId, f64)> = net.incoming(v).iter().map(|&a| (flows[a], 1.0)).collect();
        row.extend(net.outgoing(v).iter().map(|&a| (flows[a], -1.0)));
        match entry {
            Some((i, sink)) => {
                row.extend(sink.extra);
                sink_rows[i] = lp.add_constraint(row, sink.rel, sink.rhs);
            }
            None => {
                lp.add_constraint(row, Relation::Eq, 0.0);
            }
        }
    }
    (flows, sink_rows)
}

fn expansion_vars(lp: &mut LinearProgram, inst: &Instance) -> Vec<VarId> {
    inst.network
        .arcs()
        .iter()
        .map(|a| lp.add_var(format!("x[{}]", a.id), 0.0, f64::INFINITY, a.expansion_cost))
        .collect()
}

/// Capacity rows `Σ_k f − x ≤ u` (or per commodity). With `x = None` the
/// expansion is data and the rows read `Σ_k f ≤ u + x`.
fn capacity_rows(
    lp: &mut LinearProgram,
    inst: &Instance,
    flows: &[Vec<VarId>],
    x_vars: Option<&[VarId]>,
    x_data: &[f64],
    mode: CapacityMode,
    layout: &mut Layout,
) {
    for (a, arc) in inst.network.arcs().iter().enumerate() {
        let rhs = arc.base_capacity + x_data.get(a).copied().unwrap_or(0.0);
        let x_term = x_vars.map(|x| (x[a], -1.0));
        match mode {
            CapacityMode::Shared => {
                let mut row: Vec<(VarId, f64)> = flows.iter().map(|f| (f[a], 1.0)).collect();
                row.extend(x_term);
                layout.cap_rows.push((lp.add_constraint(row, Relation::Le, rhs), a));
            }
            CapacityMode::PerCommodity => {
                for f in flows {
                    let mut row = vec![(f[a], 1.0)];
                    row.extend(x_term);
                    layout.cap_rows.push((lp.add_constraint(row, Relation::Le, rhs), a));
                }
            }
        }
    }
}

/// Nominal model for a single demand vector.
pub fn build_nominal(inst: &Instance, d: &Scenario, mode: CapacityMode) -> Result<LinearProgram, FormulationError> {
    d.validate(inst.num_commodities())?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = expansion_vars(&mut lp, inst);
    let mut flows = Vec::new();
    for g in commodity_groups(inst, false) {
        let sinks = g
            .members
            .iter()
            .map(|&k| {
                let tau = lp.add_var(format!("tau[{k}]"), 0.0, f64::INFINITY, inst.penalty);
                Sink { extra: vec![(tau, 1.0)], rel: Relation::Ge, rhs: d.demands[k] }
            })
            .collect();
        flows.push(flow_block(&mut lp, inst, &g, "", sinks).0);
    }
    capacity_rows(&mut lp, inst, &flows, Some(&x), &[], mode, &mut Layout::default());
    Ok(lp)
}

/// Robust model over a finite scenario set with epigraph variable `omega`.
pub fn build_robust(
    inst: &Instance,
    set: &UncertaintySet,
    mode: CapacityMode,
) -> Result<LinearProgram, FormulationError> {
    let labels: Vec<usize> = (0..set.len()).collect();
    build_robust_subset(inst, set, &labels, mode, false)
}

/// Robust model restricted to the scenarios in `subset` (indices into
/// `set`); names keep the original scenario indices. The expansion
/// variables come first, then `omega`.
pub(crate) fn build_robust_subset(
    inst: &Instance,
    set: &UncertaintySet,
    subset: &[usize],
    mode: CapacityMode,
    aggregate: bool,
) -> Result<LinearProgram, FormulationError> {
    let kk = inst.num_commodities();
    if set.dimension() != kk {
        return Err(FormulationError::DimensionMismatch { what: "scenario", expected: kk, got: set.dimension() });
    }
    let groups = commodity_groups(inst, aggregate && mode == CapacityMode::Shared);
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = expansion_vars(&mut lp, inst);
    let omega = lp.add_var("omega", 0.0, f64::INFINITY, 1.0);
    let mut layout = Layout::default();
    for &s in subset {
        let d = &set.scenarios()[s];
        let mut flows = Vec::new();
        let mut taus = Vec::new();
        for g in &groups {
            let sinks = g
                .members
                .iter()
                .map(|&k| {
                    let tau = lp.add_var(format!("tau[{k}][{s}]"), 0.0, f64::INFINITY, 0.0);
                    taus.push(tau);
                    Sink { extra: vec![(tau, 1.0)], rel: Relation::Ge, rhs: d.demands[k] }
                })
                .collect();
            flows.push(flow_block(&mut lp, inst, g, &format!("[{s}]"), sinks).0);
        }
        capacity_rows(&mut lp, inst, &flows, Some(&x), &[], mode, &mut layout);
        let mut row = vec![(omega, 1.0)];
        row.extend(taus.iter().map(|&t| (t, -inst.penalty)));
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    Ok(lp)
}

/// `G(d̃)`: minimum expansion cost to deliver exactly `d̃ᵏ` at every sink.
pub fn build_capacity_subproblem(
    inst: &Instance,
    d_tilde: &[f64],
    mode: CapacityMode,
) -> Result<LinearProgram, FormulationError> {
    Ok(capacity_subproblem_with_layout(inst, d_tilde, mode, false)?.0)
}

pub(crate) fn capacity_subproblem_with_layout(
    inst: &Instance,
    d_tilde: &[f64],
    mode: CapacityMode,
    aggregate: bool,
) -> Result<(LinearProgram, Layout), FormulationError> {
    check_vector("d_tilde", d_tilde, inst.num_commodities())?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut layout = Layout { demand_rows: vec![0; d_tilde.len()], ..Layout::default() };
    let x = expansion_vars(&mut lp, inst);
    let mut flows = Vec::new();
    for g in commodity_groups(inst, aggregate && mode == CapacityMode::Shared) {
        let sinks = g.members.iter().map(|&k| Sink { extra: Vec::new(), rel: Relation::Eq, rhs: d_tilde[k] }).collect();
        let (f, rows) = flow_block(&mut lp, inst, &g, "", sinks);
        for (&k, r) in g.members.iter().zip(rows) {
            layout.demand_rows[k] = r;
        }
        flows.push(f);
    }
    capacity_rows(&mut lp, inst, &flows, Some(&x), &[], mode, &mut layout);
    Ok((lp, layout))
}

/// `G′(d̃)`: like `G` but the sink balance may deviate from `d̃` at cost
/// `psi` per unit in either direction.
pub fn build_capacity_penalty(
    inst: &Instance,
    d_tilde: &[f64],
    psi: f64,
    mode: CapacityMode,
) -> Result<LinearProgram, FormulationError> {
    check_vector("d_tilde", d_tilde, inst.num_commodities())?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = expansion_vars(&mut lp, inst);
    let mut flows = Vec::new();
    for g in commodity_groups(inst, false) {
        let sinks = g
            .members
            .iter()
            .map(|&k| {
                let up = lp.add_var(format!("dev+[{k}]"), 0.0, f64::INFINITY, psi);
                let down = lp.add_var(format!("dev-[{k}]"), 0.0, f64::INFINITY, psi);
                Sink { extra: vec![(up, 1.0), (down, -1.0)], rel: Relation::Eq, rhs: d_tilde[k] }
            })
            .collect();
        flows.push(flow_block(&mut lp, inst, &g, "", sinks).0);
    }
    capacity_rows(&mut lp, inst, &flows, Some(&x), &[], mode, &mut Layout::default());
    Ok(lp)
}

/// Penalty weight used with [`build_capacity_penalty`]: twice the sum of
/// all arc costs.
pub fn default_psi(inst: &Instance) -> f64 {
    2.0 * inst.network.total_expansion_cost()
}

/// Evaluation model: for fixed expansion `x` and demand `d`, route as much
/// as possible and minimize `Σ_k τᵏ`.
pub fn build_evaluation(
    inst: &Instance,
    x: &[f64],
    d: &Scenario,
    mode: CapacityMode,
) -> Result<LinearProgram, FormulationError> {
    Ok(evaluation_with_layout(inst, x, d, mode, false)?.0)
}

pub(crate) fn evaluation_with_layout(
    inst: &Instance,
    x: &[f64],
    d: &Scenario,
    mode: CapacityMode,
    aggregate: bool,
) -> Result<(LinearProgram, Layout), FormulationError> {
    check_vector("x", x, inst.network.num_arcs())?;
    let kk = inst.num_commodities();
    d.validate(kk)?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut layout = Layout { demand_rows: vec![0; kk], bound_rows: vec![0; kk], ..Layout::default() };
    let mut flows = Vec::new();
    for g in commodity_groups(inst, aggregate && mode == CapacityMode::Shared) {
        let mut routed = Vec::new();
        let sinks = g
            .members
            .iter()
            .map(|&k| {
                let dt = lp.add_var(format!("dt[{k}]"), 0.0, f64::INFINITY, 0.0);
                let tau = lp.add_var(format!("tau[{k}]"), 0.0, f64::INFINITY, 1.0);
                routed.push((k, dt, tau));
                Sink { extra: vec![(dt, -1.0)], rel: Relation::Eq, rhs: 0.0 }
            })
            .collect();
        flows.push(flow_block(&mut lp, inst, &g, "", sinks).0);
        for (k, dt, tau) in routed {
            layout.demand_rows[k] = lp.add_constraint(vec![(tau, 1.0), (dt, 1.0)], Relation::Ge, d.demands[k]);
            layout.bound_rows[k] = lp.add_constraint(vec![(dt, 1.0)], Relation::Le, d.demands[k]);
        }
    }
    capacity_rows(&mut lp, inst, &flows, None, x, mode, &mut layout);
    Ok((lp, layout))
}

enum Name {
    X(usize),
    Flow { k: usize, s: usize, arc: usize },
    Tau { k: usize, s: usize },
    Routed(usize),
    Deviation(usize),
    Omega,
}

fn brackets(rest: &str) -> Option<Vec<&str>> {
    let mut parts = Vec::new();
    let mut r = rest;
    while !r.is_empty() {
        let inner = r.strip_prefix('[')?;
        let end = inner.find(']')?;
        parts.push(&inner[..end]);
        r = &inner[end + 1..];
    }
    Some(parts)
}

fn decode(name: &str, arcs: &HashMap<&str, usize>, kind: ModelKind) -> Option<Name> {
    if name == "omega" {
        return Some(Name::Omega);
    }
    let open = name.find('[')?;
    let (head, rest) = name.split_at(open);
    let parts = brackets(rest)?;
    let idx = |s: &str| s.parse::<usize>().ok();
    let robust = kind == ModelKind::Robust;
    match (head, parts.as_slice()) {
        ("x", [a]) => arcs.get(a).map(|&a| Name::X(a)),
        ("f", [k, a]) if !robust => Some(Name::Flow { k: idx(k)?, s: 0, arc: *arcs.get(a)? }),
        ("f", [k, s, a]) if robust => Some(Name::Flow { k: idx(k)?, s: idx(s)?, arc: *arcs.get(a)? }),
        ("tau", [k]) if !robust => Some(Name::Tau { k: idx(k)?, s: 0 }),
        ("tau", [k, s]) if robust => Some(Name::Tau { k: idx(k)?, s: idx(s)? }),
        ("dt", [k]) => Some(Name::Routed(idx(k)?)),
        ("dev+" | "dev-", [k]) => Some(Name::Deviation(idx(k)?)),
        _ => None,
    }
}

/// Decodes an optimal solution of any builder in this module by variable
/// name. Robust scenario indices that never appear (a restricted model)
/// yield empty per-scenario entries.
pub fn extract_plan(
    inst: &Instance,
    lp: &LinearProgram,
    sol: &LpSolution,
    kind: ModelKind,
) -> Result<PlanSolution, FormulationError> {
    if !sol.is_optimal() {
        return Err(FormulationError::NotOptimal { context: format!("{kind:?} model"), status: sol.status });
    }
    let net = &inst.network;
    let kk = inst.num_commodities();
    let na = net.num_arcs();
    let arc_index: HashMap<&str, usize> = net.arcs().iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();

    let mut x = if kind == ModelKind::Evaluation { Vec::new() } else { vec![0.0; na] };
    let mut flows: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut taus: Vec<Vec<f64>> = Vec::new();
    let mut routed = vec![f64::NAN; kk];
    let mut omega = 0.0;
    let mut present: Vec<bool> = Vec::new();
    let ensure = |flows: &mut Vec<Vec<Vec<f64>>>, taus: &mut Vec<Vec<f64>>, present: &mut Vec<bool>, s: usize| {
        while flows.len() <= s {
            flows.push(Vec::new());
            taus.push(Vec::new());
            present.push(false);
        }
        if !present[s] {
            flows[s] = vec![vec![0.0; na]; kk];
            taus[s] = vec![0.0; kk];
            present[s] = true;
        }
    };
    if kind != ModelKind::Robust {
        ensure(&mut flows, &mut taus, &mut present, 0);
    }
    // Values of nonnegative variables come back within solver tolerance of
    // the bound; they are projected onto it.
    for (var, &val) in lp.variables.iter().zip(&sol.primal) {
        let name =
            decode(&var.name, &arc_index, kind).ok_or_else(|| FormulationError::UnmappedVariable(var.name.clone()))?;
        match name {
            Name::X(a) if kind != ModelKind::Evaluation => x[a] = val.max(0.0),
            Name::Flow { k, s, arc } if k < kk => {
                ensure(&mut flows, &mut taus, &mut present, s);
                flows[s][k][arc] = val.max(0.0);
            }
            Name::Tau { k, s } if k < kk => {
                ensure(&mut flows, &mut taus, &mut present, s);
                taus[s][k] = val.max(0.0);
            }
            Name::Routed(k) if k < kk => routed[k] = val,
            Name::Deviation(k) if k < kk => {}
            Name::Omega if kind == ModelKind::Robust => omega = val,
            _ => return Err(FormulationError::UnmappedVariable(var.name.clone())),
        }
    }

    let satisfied: Vec<Vec<f64>> = flows
        .iter()
        .zip(&present)
        .map(|(fs, &p)| {
            if !p {
                return Vec::new();
            }
            (0..kk)
                .map(|k| {
                    if kind == ModelKind::Evaluation {
                        return routed[k];
                    }
                    let t = inst.commodities[k].sink;
                    let inflow: f64 = net.incoming(t).iter().map(|&a| fs[k][a]).sum::<f64>()
                        - net.outgoing(t).iter().map(|&a| fs[k][a]).sum::<f64>();
                    match kind {
                        ModelKind::Nominal | ModelKind::Robust => inflow.max(0.0),
                        _ => inflow,
                    }
                })
                .collect()
        })
        .collect();

    let capacity_cost: f64 = x.iter().zip(net.arcs()).map(|(v, a)| v * a.expansion_cost).sum();
    let total_objective = sol.objective_value;
    let outsourcing_value = match kind {
        ModelKind::Nominal => inst.penalty * taus[0].iter().sum::<f64>(),
        ModelKind::Robust => omega,
        ModelKind::CapacitySubproblem | ModelKind::Drso => 0.0,
        ModelKind::CapacityPenalty => total_objective - capacity_cost,
        ModelKind::Evaluation => taus[0].iter().sum::<f64>(),
    };
    Ok(PlanSolution {
        kind,
        expansions: x,
        flows,
        satisfied,
        outsourced: taus,
        capacity_cost,
        outsourcing_value,
        total_objective,
    })
}

/// Solves a model and decodes it, turning a non-optimal status into an
/// error carrying `context`.
pub fn solve_and_extract(
    inst: &Instance,
    lp: &LinearProgram,
    kind: ModelKind,
    backend: Backend,
    context: &str,
) -> Result<PlanSolution, FormulationError> {
    let sol = crate::lp::solve_with(lp, backend)?;
    if !sol.is_optimal() {
        return Err(FormulationError::NotOptimal { context: context.to_string(), status: sol.status });
    }
    extract_plan(inst, lp, &sol, kind)
}

/// A model whose right-hand side is re-solved many times. Each solve starts
/// from the same optimal reference basis, so results do not depend on the
/// order of calls.
#[derive(Debug, Clone)]
struct WarmModel {
    lp: LinearProgram,
    layout: Layout,
    base: Option<DenseSimplex>,
}

impl WarmModel {
    fn new(lp: LinearProgram, layout: Layout, context: &str) -> Result<Self, FormulationError> {
        let m = lp.num_constraints();
        let base = if m.saturating_mul(lp.num_vars() + 2 * m) <= WARM_ENTRY_LIMIT {
            lp.validate()?;
            let (state, sol) = DenseSimplex::solve(&lp, SimplexOptions::default());
            if !sol.is_optimal() {
                return Err(FormulationError::NotOptimal { context: context.to_string(), status: sol.status });
            }
            Some(state)
        } else {
            None
        };
        Ok(Self { lp, layout, base })
    }

    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution, FormulationError> {
        match &self.base {
            Some(base) => {
                let mut state = base.clone();
                Ok(state.resolve_with_rhs(lp))
            }
            None => Ok(solve_lp(lp)?),
        }
    }
}

/// Repeated `G(d̃)` solves on one instance. Under shared capacities the
/// model routes commodities with a common source as one flow, so its
/// solutions are not decodable with [`extract_plan`]; only values are.
#[derive(Debug, Clone)]
pub struct CapacitySubproblem {
    model: WarmModel,
}

impl CapacitySubproblem {
    /// Prepares the model with a reference `d̃` (typically the demand means).
    pub fn new(inst: &Instance, reference: &[f64], mode: CapacityMode) -> Result<Self, FormulationError> {
        let (lp, layout) = capacity_subproblem_with_layout(inst, reference, mode, true)?;
        Ok(Self { model: WarmModel::new(lp, layout, "capacity subproblem")? })
    }

    /// The LP for `d_tilde`, structurally identical to the reference one.
    pub fn lp_for(&self, d_tilde: &[f64]) -> Result<LinearProgram, FormulationError> {
        let rows = &self.model.layout.demand_rows;
        check_vector("d_tilde", d_tilde, rows.len())?;
        let mut lp = self.model.lp.clone();
        for (&r, &d) in rows.iter().zip(d_tilde) {
            lp.constraints[r].rhs = d;
        }
        Ok(lp)
    }

    pub fn solve(&self, d_tilde: &[f64]) -> Result<(LinearProgram, LpSolution), FormulationError> {
        let lp = self.lp_for(d_tilde)?;
        let sol = self.model.solve(&lp)?;
        if !sol.is_optimal() {
            return Err(FormulationError::NotOptimal { context: "capacity subproblem".into(), status: sol.status });
        }
        Ok((lp, sol))
    }

    /// `G(d̃)`.
    pub fn value(&self, d_tilde: &[f64]) -> Result<f64, FormulationError> {
        Ok(self.solve(d_tilde)?.1.objective_value)
    }
}

/// Outcome of one evaluation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub outsourced: Vec<f64>,
    pub satisfied: Vec<f64>,
}

impl ScenarioOutcome {
    pub fn total_outsourced(&self) -> f64 {
        self.outsourced.iter().sum()
    }

    pub fn total_satisfied(&self) -> f64 {
        self.satisfied.iter().sum()
    }
}

/// Repeated evaluation solves for varying expansion and demand.
#[derive(Debug, Clone)]
pub struct Evaluator {
    model: WarmModel,
    base_capacity: Vec<f64>,
    num_arcs: usize,
    tau: Vec<usize>,
    dt: Vec<usize>,
}

impl Evaluator {
    /// Prepares the model at a reference plan and demand vector. Commodities
    /// with a common source share a flow under shared capacities.
    pub fn new(inst: &Instance, x: &[f64], reference: &Scenario, mode: CapacityMode) -> Result<Self, FormulationError> {
        Self::build(inst, x, reference, mode, true)
    }

    /// Like [`Evaluator::new`] but with one flow per commodity, so that
    /// [`Evaluator::solve`] results decode with [`extract_plan`].
    pub fn detailed(
        inst: &Instance,
        x: &[f64],
        reference: &Scenario,
        mode: CapacityMode,
    ) -> Result<Self, FormulationError> {
        Self::build(inst, x, reference, mode, false)
    }

    fn build(
        inst: &Instance,
        x: &[f64],
        reference: &Scenario,
        mode: CapacityMode,
        aggregate: bool,
    ) -> Result<Self, FormulationError> {
        let (lp, layout) = evaluation_with_layout(inst, x, reference, mode, aggregate)?;
        let kk = inst.num_commodities();
        let find = |name: String| lp.var_by_name(&name).map(|v| v.0).expect("evaluation variable");
        let tau = (0..kk).map(|k| find(format!("tau[{k}]"))).collect();
        let dt = (0..kk).map(|k| find(format!("dt[{k}]"))).collect();
        Ok(Self {
            model: WarmModel::new(lp, layout, "evaluation model")?,
            base_capacity: inst.network.arcs().iter().map(|a| a.base_capacity).collect(),
            num_arcs: inst.network.num_arcs(),
            tau,
            dt,
        })
    }

    pub fn lp_for(&self, x: &[f64], d: &Scenario) -> Result<LinearProgram, FormulationError> {
        check_vector("x", x, self.num_arcs)?;
        d.validate(self.tau.len())?;
        let mut lp = self.model.lp.clone();
        let layout = &self.model.layout;
        for (k, &dk) in d.demands.iter().enumerate() {
            lp.constraints[layout.demand_rows[k]].rhs = dk;
            lp.constraints[layout.bound_rows[k]].rhs = dk;
        }
        for &(r, a) in &layout.cap_rows {
            lp.constraints[r].rhs = self.base_capacity[a] + x[a];
        }
        Ok(lp)
    }

    /// Solved evaluation model; decodable with [`extract_plan`] when built
    /// by [`Evaluator::detailed`].
    pub fn solve(&self, x: &[f64], d: &Scenario) -> Result<(LinearProgram, LpSolution), FormulationError> {
        let lp = self.lp_for(x, d)?;
        let sol = self.model.solve(&lp)?;
        if !sol.is_optimal() {
            return Err(FormulationError::NotOptimal { context: "evaluation model".into(), status: sol.status });
        }
        Ok((lp, sol))
    }

    pub fn evaluate(&self, x: &[f64], d: &Scenario) -> Result<ScenarioOutcome, FormulationError> {
        let (_, sol) = self.solve(x, d)?;
        Ok(ScenarioOutcome {
            outsourced: self.tau.iter().map(|&j| sol.primal[j].max(0.0)).collect(),
            satisfied: self.dt.iter().map(|&j| sol.primal[j].max(0.0)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_instance;

    fn single_arc(u: f64, c: f64, phi: f64) -> Instance {
        parse_instance(&format!("NODES 2\ns\nt\nARCS 1\na s t {u} {c}\nCOMMODITIES 1\nk s t\nPENALTY {phi}\n")).unwrap()
    }

    fn parallel() -> Instance {
        parse_instance("NODES 2\ns\nt\nARCS 2\ncheap s t 0 1\ndear s t 0 4\nCOMMODITIES 1\nk s t\nPENALTY 100\n")
            .unwrap()
    }

    fn solve(inst: &Instance, lp: &LinearProgram, kind: ModelKind) -> PlanSolution {
        solve_and_extract(inst, lp, kind, Backend::Auto, "test").unwrap()
    }

    #[test]
    fn nominal_examples() {
        let inst = single_arc(0.0, 1.0, 10.0);
        let p = solve(
            &inst,
            &build_nominal(&inst, &Scenario::new(vec![5.0]), CapacityMode::Shared).unwrap(),
            ModelKind::Nominal,
        );
        assert!((p.expansions[0] - 5.0).abs() < 1e-9 && (p.total_objective - 5.0).abs() < 1e-9);
        assert!((p.capacity_cost + p.outsourcing_value - p.total_objective).abs() < 1e-9);

        let inst = single_arc(0.0, 20.0, 10.0);
        let p = solve(
            &inst,
            &build_nominal(&inst, &Scenario::new(vec![5.0]), CapacityMode::Shared).unwrap(),
            ModelKind::Nominal,
        );
        assert!(p.expansions[0].abs() < 1e-9 && (p.total_objective - 50.0).abs() < 1e-9);
        assert!((p.outsourced[0][0] - 5.0).abs() < 1e-9);

        let p = solve(
            &inst,
            &build_nominal(&inst, &Scenario::new(vec![0.0]), CapacityMode::Shared).unwrap(),
            ModelKind::Nominal,
        );
        assert!(p.total_objective.abs() < 1e-12 && p.expansions[0].abs() < 1e-12);
    }

    #[test]
    fn dimension_checks() {
        let inst = single_arc(0.0, 1.0, 10.0);
        assert!(matches!(
            build_nominal(&inst, &Scenario::new(vec![1.0, 2.0]), CapacityMode::Shared),
            Err(FormulationError::DimensionMismatch { expected: 1, got: 2, .. })
        ));
        assert!(build_evaluation(&inst, &[1.0, 1.0], &Scenario::new(vec![1.0]), CapacityMode::Shared).is_err());
        assert!(build_capacity_subproblem(&inst, &[-1.0], CapacityMode::Shared).is_err());
        assert!(UncertaintySet::new(vec![]).is_err());
        assert!(UncertaintySet::new(vec![Scenario::new(vec![1.0]), Scenario::new(vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn robust_examples() {
        let inst = single_arc(0.0, 1.0, 10.0);
        let set = UncertaintySet::new(vec![Scenario::new(vec![3.0]), Scenario::new(vec![7.0])]).unwrap();
        let p = solve(&inst, &build_robust(&inst, &set, CapacityMode::Shared).unwrap(), ModelKind::Robust);
        assert!((p.expansions[0] - 7.0).abs() < 1e-9 && (p.total_objective - 7.0).abs() < 1e-9);
        assert_eq!(p.flows.len(), 2);
        let worst = p.outsourced.iter().map(|t| inst.penalty * t.iter().sum::<f64>()).fold(0.0, f64::max);
        assert!((p.outsourcing_value - worst).abs() < 1e-9);

        let single = UncertaintySet::new(vec![Scenario::new(vec![4.0])]).unwrap();
        let r = solve(&inst, &build_robust(&inst, &single, CapacityMode::Shared).unwrap(), ModelKind::Robust);
        let n = solve(
            &inst,
            &build_nominal(&inst, &Scenario::new(vec![4.0]), CapacityMode::Shared).unwrap(),
            ModelKind::Nominal,
        );
        assert!((r.total_objective - n.total_objective).abs() < 1e-9);
    }

    #[test]
    fn subproblem_examples() {
        let inst = single_arc(2.0, 3.0, 10.0);
        let p = solve(
            &inst,
            &build_capacity_subproblem(&inst, &[5.0], CapacityMode::Shared).unwrap(),
            ModelKind::CapacitySubproblem,
        );
        assert!((p.total_objective - 9.0).abs() < 1e-9);
        assert_eq!(p.outsourcing_value, 0.0);
        assert!((p.satisfied[0][0] - 5.0).abs() < 1e-9);
        let p = solve(
            &inst,
            &build_capacity_subproblem(&inst, &[0.0], CapacityMode::Shared).unwrap(),
            ModelKind::CapacitySubproblem,
        );
        assert!(p.total_objective.abs() < 1e-12);

        let inst = parallel();
        let p = solve(
            &inst,
            &build_capacity_subproblem(&inst, &[6.0], CapacityMode::Shared).unwrap(),
            ModelKind::CapacitySubproblem,
        );
        assert!((p.total_objective - 6.0).abs() < 1e-9);
        assert!((p.flows[0][0][0] - 6.0).abs() < 1e-9 && p.flows[0][0][1].abs() < 1e-9);

        let lp = build_capacity_penalty(&inst, &[6.0], default_psi(&inst), CapacityMode::Shared).unwrap();
        let p = solve(&inst, &lp, ModelKind::CapacityPenalty);
        assert!((p.total_objective - 6.0).abs() < 1e-9);
        assert!(p.outsourcing_value.abs() < 1e-9);
    }

    #[test]
    fn evaluation_examples() {
        let inst = single_arc(0.0, 1.0, 10.0);
        let lp = build_evaluation(&inst, &[4.0], &Scenario::new(vec![7.0]), CapacityMode::Shared).unwrap();
        let p = solve(&inst, &lp, ModelKind::Evaluation);
        assert!((p.outsourced[0][0] - 3.0).abs() < 1e-9 && (p.satisfied[0][0] - 4.0).abs() < 1e-9);
        assert!(p.expansions.is_empty());

        let lp = build_evaluation(&inst, &[100.0], &Scenario::new(vec![7.0]), CapacityMode::Shared).unwrap();
        let p = solve(&inst, &lp, ModelKind::Evaluation);
        assert!(p.outsourcing_value.abs() < 1e-9 && (p.satisfied[0][0] - 7.0).abs() < 1e-9);

        let ev = Evaluator::new(&inst, &[0.0], &Scenario::new(vec![5.0]), CapacityMode::Shared).unwrap();
        for (d, want) in [(2.0, 0.0), (5.0, 1.0), (9.0, 5.0)] {
            let o = ev.evaluate(&[4.0], &Scenario::new(vec![d])).unwrap();
            assert!((o.total_outsourced() - want).abs() < 1e-9, "d={d}");
            assert!((o.total_satisfied() - (d - want)).abs() < 1e-9);
        }
    }

    #[test]
    fn shared_versus_per_commodity() {
        let text = "NODES 2\ns\nt\nARCS 1\na s t 0 1\nCOMMODITIES 2\nk0 s t\nk1 s t\nPENALTY 10\n";
        let inst = parse_instance(text).unwrap();
        let shared = solve(
            &inst,
            &build_capacity_subproblem(&inst, &[3.0, 4.0], CapacityMode::Shared).unwrap(),
            ModelKind::CapacitySubproblem,
        );
        assert!((shared.total_objective - 7.0).abs() < 1e-9);
        let per = solve(
            &inst,
            &build_capacity_subproblem(&inst, &[3.0, 4.0], CapacityMode::PerCommodity).unwrap(),
            ModelKind::CapacitySubproblem,
        );
        assert!((per.total_objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn shared_source_groups_keep_values() {
        let text =
            "NODES 4\na\nb\nc\nd\nARCS 6\nab a b 2 3\nbd b d 0 2\nac a c 1 4\ncd c d 2 1\nbc b c 0 1\ndb d b 1 1\n\
                    COMMODITIES 4\nk0 a d\nk1 a c\nk2 a d\nk3 b c\nPENALTY 12\n";
        let inst = parse_instance(text).unwrap();
        let groups = commodity_groups(&inst, true);
        assert_eq!(groups.len(), 3);
        let mode = CapacityMode::Shared;
        let value = |lp: &LinearProgram| solve_lp(lp).unwrap().objective_value;
        let d = [3.0, 1.5, 2.0, 4.0];
        let g = value(&capacity_subproblem_with_layout(&inst, &d, mode, true).unwrap().0);
        assert!((g - value(&build_capacity_subproblem(&inst, &d, mode).unwrap())).abs() < 1e-9);
        let x = [0.5, 1.0, 0.0, 2.0, 0.0, 0.0];
        let s = Scenario::new(d.to_vec());
        let e = value(&evaluation_with_layout(&inst, &x, &s, mode, true).unwrap().0);
        assert!((e - value(&build_evaluation(&inst, &x, &s, mode).unwrap())).abs() < 1e-9);
        let set = UncertaintySet::new(vec![s, Scenario::new(vec![0.5, 4.0, 1.0, 2.0])]).unwrap();
        let r = value(&build_robust_subset(&inst, &set, &[0, 1], mode, true).unwrap());
        assert!((r - value(&build_robust(&inst, &set, mode).unwrap())).abs() < 1e-9);
    }

    #[test]
    fn warm_subproblem_matches_cold() {
        let inst =
            crate::network::generate_random_instance(&crate::network::us_backbone_topology(), 5, 3, 130.0).unwrap();
        let sub = CapacitySubproblem::new(&inst, &[20.0; 5], CapacityMode::Shared).unwrap();
        for d in [[0.0, 1.0, 2.0, 3.0, 4.0], [30.0, 10.0, 5.0, 0.0, 45.0], [20.0; 5]] {
            let warm = sub.value(&d).unwrap();
            let cold = solve_lp(&build_capacity_subproblem(&inst, &d, CapacityMode::Shared).unwrap()).unwrap();
            assert!(
                (warm - cold.objective_value).abs() <= 1e-7 * (1.0 + warm.abs()),
                "{warm} vs {}",
                cold.objective_value
            );
        }
    }

    #[test]
    fn unmapped_variable_rejected() {
        let inst = single_arc(0.0, 1.0, 10.0);
        let mut lp = build_nominal(&inst, &Scenario::new(vec![1.0]), CapacityMode::Shared).unwrap();
        lp.add_var("mystery", 0.0, 1.0, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert!(matches!(
            extract_plan(&inst, &lp, &sol, ModelKind::Nominal),
            Err(FormulationError::UnmappedVariable(_))
        ));
    }
}
