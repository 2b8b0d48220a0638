//! Directed networks, expansion instances and their text format.
//!
//! ```text
//! # comment
//! NODES 2
//! s
//! t
//! ARCS 1
//! a1 s t 5 3
//! COMMODITIES 1
//! k0 s t
//! PENALTY 10
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Default outsourcing penalty per unit of unmet demand.
pub const DEFAULT_PENALTY: f64 = 130.0;
/// Mean of the per-unit arc expansion cost.
pub const COST_MEAN: f64 = 40.0;
/// Variance of the per-unit arc expansion cost.
pub const COST_VARIANCE: f64 = 36.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("duplicate arc id `{0}`")]
    DuplicateArc(String),
    #[error("negative {what} {value} on arc `{arc}`")]
    Negative { what: &'static str, value: f64, arc: String },
    #[error("arc `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("commodity `{0}` has identical source and sink")]
    SourceIsSink(String),
    #[error("penalty must be > 0, got {0}")]
    BadPenalty(f64),
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("identifier `{0}` contains a reserved character")]
    BadIdentifier(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("requested {requested} commodities but only {available} ordered node pairs exist")]
    TooManyCommodities { requested: usize, available: usize },
    #[error("network needs at least 2 nodes, has {0}")]
    TooFewNodes(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    /// Installed capacity `u_a`.
    pub base_capacity: f64,
    /// Cost per unit of added capacity `c_a`.
    pub expansion_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<String>,
    arcs: Vec<Arc>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network from node names and `(id, tail, head, u, c)` arcs
    /// given by node name.
    pub fn new(nodes: Vec<String>, arcs: Vec<(String, String, String, f64, f64)>) -> Result<Self, NetworkError> {
        let mut b = Builder::default();
        for n in nodes {
            b.node(&n, 0)?;
        }
        for (id, t, h, u, c) in arcs {
            b.arc(&id, &t, &h, u, c, 0)?;
        }
        Ok(b.network())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Arcs entering `v` (δ⁻).
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    /// Arcs leaving `v` (δ⁺).
    pub fn outgoing(&self, v: usize) -> &[usize] {
        &self.outgoing[v]
    }

    fn rebuild_adjacency(nodes: usize, arcs: &[Arc]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut inc = vec![Vec::new(); nodes];
        let mut out = vec![Vec::new(); nodes];
        for (i, a) in arcs.iter().enumerate() {
            out[a.tail].push(i);
            inc[a.head].push(i);
        }
        (inc, out)
    }

    /// True when the stored adjacency matches one rebuilt from the arc list.
    pub fn adjacency_consistent(&self) -> bool {
        let (inc, out) = Self::rebuild_adjacency(self.nodes.len(), &self.arcs);
        inc == self.incoming && out == self.outgoing
    }

    /// Replaces every arc's expansion cost.
    pub fn with_costs(&self, costs: &[f64]) -> Self {
        let mut n = self.clone();
        for (a, &c) in n.arcs.iter_mut().zip(costs) {
            a.expansion_cost = c;
        }
        n
    }

    pub fn total_expansion_cost(&self) -> f64 {
        self.arcs.iter().map(|a| a.expansion_cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub id: String,
    pub source: usize,
    pub sink: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub commodities: Vec<Commodity>,
    /// Cost per unit of outsourced demand (φ).
    pub penalty: f64,
}

impl Instance {
    pub fn new(network: Network, commodities: Vec<Commodity>, penalty: f64) -> Result<Self, NetworkError> {
        if !(penalty.is_finite() && penalty > 0.0) {
            return Err(NetworkError::Invalid(format!("penalty must be > 0, got {penalty}")));
        }
        if commodities.is_empty() {
            return Err(NetworkError::Invalid("at least one commodity is required".into()));
        }
        for c in &commodities {
            if c.source >= network.num_nodes() || c.sink >= network.num_nodes() {
                return Err(NetworkError::Invalid(format!("commodity `{}` references a missing node", c.id)));
            }
            if c.source == c.sink {
                return Err(NetworkError::Invalid(format!("commodity `{}` has identical source and sink", c.id)));
            }
        }
        Ok(Self { network, commodities, penalty })
    }

    pub fn num_commodities(&self) -> usize {
        self.commodities.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.network.arcs.iter().map(|a| a.expansion_cost).collect()
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    arcs: Vec<Arc>,
    arc_ids: HashSet<String>,
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn check_ident(s: &str, line: usize) -> Result<(), ParseError> {
    if s.contains(['[', ']', '#', ',']) || s.is_empty() {
        return Err(err(line, ParseErrorKind::BadIdentifier(s.to_string())));
    }
    Ok(())
}

impl Builder {
    fn node(&mut self, name: &str, line: usize) -> Result<(), ParseError> {
        check_ident(name, line)?;
        if self.index.contains_key(name) {
            return Err(err(line, ParseErrorKind::DuplicateNode(name.into())));
        }
        self.index.insert(name.to_string(), self.nodes.len());
        self.nodes.push(name.to_string());
        Ok(())
    }

    fn lookup(&self, name: &str, line: usize) -> Result<usize, ParseError> {
        self.index.get(name).copied().ok_or_else(|| err(line, ParseErrorKind::UnknownNode(name.into())))
    }

    fn arc(&mut self, id: &str, tail: &str, head: &str, u: f64, c: f64, line: usize) -> Result<(), ParseError> {
        check_ident(id, line)?;
        let t = self.lookup(tail, line)?;
        let h = self.lookup(head, line)?;
        if t == h {
            return Err(err(line, ParseErrorKind::SelfLoop(id.into())));
        }
        for (what, value) in [("capacity", u), ("cost", c)] {
            if !value.is_finite() || value < 0.0 {
                return Err(err(line, ParseErrorKind::Negative { what, value, arc: id.into() }));
            }
        }
        if !self.arc_ids.insert(id.to_string()) {
            return Err(err(line, ParseErrorKind::DuplicateArc(id.into())));
        }
        self.arcs.push(Arc { id: id.into(), tail: t, head: h, base_capacity: u, expansion_cost: c });
        Ok(())
    }

    fn network(self) -> Network {
        let (incoming, outgoing) = Network::rebuild_adjacency(self.nodes.len(), &self.arcs);
        Network { nodes: self.nodes, arcs: self.arcs, incoming, outgoing }
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line with comments stripped, as tokens.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = body.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, ParseError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| err(line, ParseErrorKind::Syntax(format!("expected a number, found `{tok}`"))))
}

fn parse_count(toks: &[&str], keyword: &'static str, line: usize) -> Result<usize, ParseError> {
    if toks.len() != 2 || toks[0] != keyword {
        return Err(err(line, ParseErrorKind::Syntax(format!("expected `{keyword} <count>`"))));
    }
    toks[1].parse().map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad count `{}`", toks[1]))))
}

fn expect_arity(toks: &[&str], n: usize, what: &str, line: usize) -> Result<(), ParseError> {
    if toks.len() != n {
        return Err(err(line, ParseErrorKind::Syntax(format!("{what} line needs {n} fields, found {}", toks.len()))));
    }
    Ok(())
}

fn parse_sections(
    text: &str,
    need_demand_sections: bool,
) -> Result<(Network, Vec<Commodity>, Option<f64>), ParseError> {
    let mut lines = Lines::new(text);
    let mut b = Builder::default();

    let (line, toks) = lines.next_tokens().ok_or_else(|| err(1, ParseErrorKind::MissingSection("NODES")))?;
    let n = parse_count(&toks, "NODES", line)?;
    for _ in 0..n {
        let (line, toks) = lines
            .next_tokens()
            .ok_or_else(|| err(lines.last, ParseErrorKind::Syntax("unexpected end of file in NODES".into())))?;
        expect_arity(&toks, 1, "node", line)?;
        b.node(toks[0], line)?;
    }

    let (line, toks) = lines.next_tokens().ok_or_else(|| err(lines.last, ParseErrorKind::MissingSection("ARCS")))?;
    let m = parse_count(&toks, "ARCS", line)?;
    for _ in 0..m {
        let (line, toks) = lines
            .next_tokens()
            .ok_or_else(|| err(lines.last, ParseErrorKind::Syntax("unexpected end of file in ARCS".into())))?;
        expect_arity(&toks, 5, "arc", line)?;
        let u = parse_num(toks[3], line)?;
        let c = parse_num(toks[4], line)?;
        b.arc(toks[0], toks[1], toks[2], u, c, line)?;
    }

    let mut commodities = Vec::new();
    let mut penalty = None;
    match lines.next_tokens() {
        None if !need_demand_sections => {}
        None => return Err(err(lines.last, ParseErrorKind::MissingSection("COMMODITIES"))),
        Some((line, toks)) => {
            let k = parse_count(&toks, "COMMODITIES", line)?;
            let mut ids = HashSet::new();
            for _ in 0..k {
                let (line, toks) = lines.next_tokens().ok_or_else(|| {
                    err(lines.last, ParseErrorKind::Syntax("unexpected end of file in COMMODITIES".into()))
                })?;
                expect_arity(&toks, 3, "commodity", line)?;
                check_ident(toks[0], line)?;
                if !ids.insert(toks[0]) {
                    return Err(err(line, ParseErrorKind::Syntax(format!("duplicate commodity id `{}`", toks[0]))));
                }
                let s = b.lookup(toks[1], line)?;
                let t = b.lookup(toks[2], line)?;
                if s == t {
                    return Err(err(line, ParseErrorKind::SourceIsSink(toks[0].into())));
                }
                commodities.push(Commodity { id: toks[0].into(), source: s, sink: t });
            }
            let (line, toks) =
                lines.next_tokens().ok_or_else(|| err(lines.last, ParseErrorKind::MissingSection("PENALTY")))?;
            if toks.len() != 2 || toks[0] != "PENALTY" {
                return Err(err(line, ParseErrorKind::Syntax("expected `PENALTY <phi>`".into())));
            }
            let phi = parse_num(toks[1], line)?;
            if phi <= 0.0 {
                return Err(err(line, ParseErrorKind::BadPenalty(phi)));
            }
            penalty = Some(phi);
            if need_demand_sections && commodities.is_empty() {
                return Err(err(line, ParseErrorKind::Syntax("at least one commodity is required".into())));
            }
        }
    }
    if let Some((line, toks)) = lines.next_tokens() {
        return Err(err(line, ParseErrorKind::Syntax(format!("unexpected trailing content `{}`", toks.join(" ")))));
    }
    Ok((b.network(), commodities, penalty))
}

/// Parses an instance file. Arc and commodity order follow the file.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let (network, commodities, penalty) = parse_sections(text, true)?;
    Ok(Instance { network, commodities, penalty: penalty.expect("penalty parsed") })
}

/// Parses only the `NODES` and `ARCS` sections; demand sections, if
/// present, are validated and dropped.
pub fn parse_topology(text: &str) -> Result<Network, ParseError> {
    parse_sections(text, false).map(|(n, _, _)| n)
}

/// Serializes an instance. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn write_instance(inst: &Instance) -> String {
    let mut out = write_network(&inst.network);
    let nodes = inst.network.nodes();
    let _ = writeln!(out, "COMMODITIES {}", inst.commodities.len());
    for c in &inst.commodities {
        let _ = writeln!(out, "{} {} {}", c.id, nodes[c.source], nodes[c.sink]);
    }
    let _ = writeln!(out, "PENALTY {}", inst.penalty);
    out
}

pub fn write_network(net: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NODES {}", net.num_nodes());
    for n in net.nodes() {
        let _ = writeln!(out, "{n}");
    }
    let _ = writeln!(out, "ARCS {}", net.num_arcs());
    for a in net.arcs() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            a.id, net.nodes[a.tail], net.nodes[a.head], a.base_capacity, a.expansion_cost
        );
    }
    out
}

/// Imports the topology part of an SNDlib native-format file.
///
/// Each undirected link becomes two arcs, `<id>` in the written direction
/// and `<id>_rev` in the opposite one. The pre-installed capacity becomes
/// `u_a`; the per-unit cost is taken from the first capacity module
/// (`cost / capacity`) when one is listed, else 0. Demands and all other
/// sections are ignored.
pub fn import_sndlib_native(text: &str) -> Result<Network, ParseError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Nodes,
        Links,
        Other,
    }
    let mut section = Section::None;
    let mut b = Builder::default();
    let mut links = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if section == Section::None || section == Section::Other {
            if body.ends_with('(') {
                let name = body.trim_end_matches('(').trim();
                section = match name {
                    "NODES" => Section::Nodes,
                    "LINKS" => Section::Links,
                    _ => Section::Other,
                };
            } else if body == ")" {
                section = Section::None;
            }
            continue;
        }
        if body == ")" {
            section = Section::None;
            continue;
        }
        let toks: Vec<&str> =
            body.split(|c: char| c.is_whitespace() || c == '(' || c == ')').filter(|t| !t.is_empty()).collect();
        match section {
            Section::Nodes => {
                let name = toks.first().ok_or_else(|| err(line, ParseErrorKind::Syntax("empty node line".into())))?;
                b.node(name, line)?;
            }
            Section::Links => {
                if toks.len() < 7 {
                    return Err(err(
                        line,
                        ParseErrorKind::Syntax("link line needs id, endpoints and 4 numeric fields".into()),
                    ));
                }
                let cap = parse_num(toks[3], line)?;
                let unit = if toks.len() >= 9 {
                    let mcap = parse_num(toks[7], line)?;
                    let mcost = parse_num(toks[8], line)?;
                    if mcap > 0.0 {
                        mcost / mcap
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                links.push((line, toks[0].to_string(), toks[1].to_string(), toks[2].to_string(), cap, unit));
            }
            _ => {}
        }
    }
    for (line, id, s, t, cap, unit) in links {
        b.arc(&id, &s, &t, cap, unit, line)?;
        b.arc(&format!("{id}_rev"), &t, &s, cap, unit, line)?;
    }
    Ok(b.network())
}

/// Draws one expansion cost from Normal(40, variance 36), redrawing
/// non-positive values.
pub fn sample_arc_cost<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal = Normal::new(COST_MEAN, COST_VARIANCE.sqrt()).expect("valid normal");
    loop {
        let c = normal.sample(rng);
        if c > 0.0 {
            return c;
        }
    }
}

/// Random instance on `topology`: fresh arc costs and `k` distinct
/// ordered (source, sink) pairs. Deterministic in `seed`.
pub fn generate_random_instance(
    topology: &Network,
    k: usize,
    seed: u64,
    penalty: f64,
) -> Result<Instance, NetworkError> {
    let n = topology.num_nodes();
    if n < 2 {
        return Err(NetworkError::TooFewNodes(n));
    }
    let pairs = n * (n - 1);
    if k == 0 || k > pairs {
        return Err(NetworkError::TooManyCommodities { requested: k, available: pairs });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<f64> = (0..topology.num_arcs()).map(|_| sample_arc_cost(&mut rng)).collect();
    let network = topology.with_costs(&costs);
    let commodities = sample(&mut rng, pairs, k)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let s = p / (n - 1);
            let mut t = p % (n - 1);
            if t >= s {
                t += 1;
            }
            Commodity { id: format!("k{i}"), source: s, sink: t }
        })
        .collect();
    Instance::new(network, commodities, penalty)
}

/// 14-node, 21-link US research backbone with both link directions as
/// arcs (42 arcs). Base capacities are 0 and costs 40 until a random
/// instance is drawn on it.
pub fn us_backbone_topology() -> Network {
    parse_topology(include_str!("../data/us14.net")).expect("bundled topology parses")
}
