//! File formats: scenario and moment CSVs, solution JSON, report CSVs.
//!
//! Lines starting with `#` are comments in every CSV. Report numbers are
//! printed with six decimals.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ambiguity::MomentInfo;
use crate::evaluation::{EvaluationReport, ExperimentRow, SweepRow};
use crate::formulations::Scenario;
use crate::network::Instance;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record {record}: {message}")]
    Format { record: usize, message: String },
}

fn format_err(record: usize, message: impl Into<String>) -> IoError {
    IoError::Format { record, message: message.into() }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn number(field: &str, record: usize) -> Result<f64, IoError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format_err(record, format!("`{field}` is not a finite number")))
}

/// Reads `scenario_id,d_1,…,d_K`.
pub fn read_scenarios_csv(text: &str) -> Result<Vec<Scenario>, IoError> {
    let mut rdr = reader(text);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(format_err(0, "header needs scenario_id and at least one demand column"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let demands = rec.iter().skip(1).map(|f| number(f, i + 1)).collect::<Result<Vec<_>, _>>()?;
        if let Some(d) = demands.iter().find(|d| **d < 0.0) {
            return Err(format_err(i + 1, format!("negative demand {d}")));
        }
        out.push(Scenario::new(demands));
    }
    if out.is_empty() {
        return Err(format_err(0, "no scenarios"));
    }
    Ok(out)
}

fn comment_block(comments: &[String]) -> String {
    comments.iter().map(|c| format!("# {c}\n")).collect()
}

fn finish(comments: &[String], wtr: csv::Writer<Vec<u8>>) -> String {
    let body = String::from_utf8(wtr.into_inner().expect("in-memory writer")).expect("utf-8 CSV");
    comment_block(comments) + &body
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_scenarios_csv(scenarios: &[Scenario], comments: &[String]) -> String {
    let k = scenarios.first().map_or(0, |s| s.demands.len());
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario_id".to_string()];
    header.extend((1..=k).map(|j| format!("d_{j}")));
    wtr.write_record(&header).expect("in-memory write");
    for (i, s) in scenarios.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(s.demands.iter().map(|&d| f6(d)));
        wtr.write_record(&rec).expect("in-memory write");
    }
    finish(comments, wtr)
}

/// Reads `commodity,mean,variance` rows in commodity order.
pub fn read_moments_csv(text: &str) -> Result<Vec<MomentInfo>, IoError> {
    let mut rdr = reader(text);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 {
        return Err(format_err(0, "expected header commodity,mean,variance"));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let m = MomentInfo::new(number(&rec[1], i + 1)?, number(&rec[2], i + 1)?)
            .map_err(|e| format_err(i + 1, e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

/// Moments are written with full precision so they read back exactly.
pub fn write_moments_csv(moments: &[MomentInfo], comments: &[String]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["commodity", "mean", "variance"]).expect("in-memory write");
    for (k, m) in moments.iter().enumerate() {
        wtr.write_record([k.to_string(), m.mean.to_string(), m.variance.to_string()]).expect("in-memory write");
    }
    finish(comments, wtr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SolverStats {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_evaluations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation_rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub active_scenarios: Option<usize>,
}

/// Solution file. `x` is keyed by arc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub model: String,
    pub capacity_mode: String,
    pub x: BTreeMap<String, f64>,
    pub d_tilde: Option<Vec<f64>>,
    pub capacity_cost: f64,
    pub outsourcing_value: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nature_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stats: SolverStats,
}

impl SolutionFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable solution");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Expansion in the instance's arc order.
    pub fn expansion_for(&self, inst: &Instance) -> Result<Vec<f64>, IoError> {
        inst.network
            .arcs()
            .iter()
            .map(|a| {
                let v = *self
                    .x
                    .get(&a.id)
                    .ok_or_else(|| format_err(0, format!("solution has no value for arc `{}`", a.id)))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(format_err(0, format!("x[{}] = {v} is not a nonnegative number", a.id)));
                }
                Ok(v)
            })
            .collect()
    }
}

pub fn expansion_map(inst: &Instance, x: &[f64]) -> BTreeMap<String, f64> {
    inst.network.arcs().iter().zip(x).map(|(a, &v)| (a.id.clone(), v)).collect()
}

const REPORT_HEADER: [&str; 6] = ["n", "expected_os", "max_os", "cvar95", "cvar75", "expected_satisfied"];

fn report_fields(r: &EvaluationReport) -> Vec<String> {
    vec![
        r.n_scenarios.to_string(),
        f6(r.expected_outsourced),
        f6(r.max_outsourced),
        f6(r.cvar95),
        f6(r.cvar75),
        f6(r.expected_satisfied),
    ]
}

pub fn report_csv(r: &EvaluationReport) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(REPORT_HEADER).expect("in-memory write");
    wtr.write_record(report_fields(r)).expect("in-memory write");
    finish(&[], wtr)
}

pub fn per_scenario_csv(r: &EvaluationReport) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["scenario_id", "total_outsourced", "total_satisfied"]).expect("in-memory write");
    for (i, t) in r.per_scenario.iter().enumerate() {
        wtr.write_record([(i + 1).to_string(), f6(t.outsourced), f6(t.satisfied)]).expect("in-memory write");
    }
    finish(&[], wtr)
}

fn opt6(v: Option<f64>) -> String {
    v.map(f6).unwrap_or_default()
}

pub fn experiment_csv(rows: &[ExperimentRow], comments: &[String]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "rep",
        "model",
        "train_seed",
        "eval_seed",
        "cap_inv",
        "in_sample_os",
        "nature",
        "d_tilde",
        "expected_os",
        "max_os",
        "cvar95",
        "cvar75",
        "expected_satisfied",
        "cap_add",
        "unit_cost",
    ])
    .expect("in-memory write");
    for r in rows {
        let rep = &r.report;
        wtr.write_record([
            r.repetition.to_string(),
            r.model.to_string(),
            r.train_seed.to_string(),
            r.eval_seed.to_string(),
            f6(r.capacity_investment),
            opt6(r.in_sample_outsourced),
            opt6(r.nature),
            opt6(r.d_tilde_total),
            f6(rep.expected_outsourced),
            f6(rep.max_outsourced),
            f6(rep.cvar95),
            f6(rep.cvar75),
            f6(rep.expected_satisfied),
            f6(r.capacity_added),
            f6(r.unit_cost),
        ])
        .expect("in-memory write");
    }
    finish(comments, wtr)
}

pub fn sweep_csv(rows: &[SweepRow], comments: &[String]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lambda", "cap_cost"];
    header.extend(REPORT_HEADER);
    wtr.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![format!("{:.2}", r.lambda), f6(r.capacity_cost)];
        rec.extend(report_fields(&r.report));
        wtr.write_record(&rec).expect("in-memory write");
    }
    finish(comments, wtr)
}

/// `d_tilde,shortfall` rows of a worst-case shortfall curve.
pub fn curve_csv(points: &[(f64, f64)], comments: &[String]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["d_tilde", "shortfall"]).expect("in-memory write");
    for &(d, n) in points {
        wtr.write_record([f6(d), f6(n)]).expect("in-memory write");
    }
    finish(comments, wtr)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let file_err = |source| IoError::File { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err)?;
    tmp.write_all(contents.as_bytes()).map_err(file_err)?;
    tmp.as_file().sync_all().map_err(file_err)?;
    tmp.persist(path).map_err(|e| file_err(e.error))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenarios_round_trip() {
        let s = vec![Scenario::new(vec![1.5, 2.0]), Scenario::new(vec![0.0, 49.25])];
        let text = write_scenarios_csv(&s, &["seed=7".into()]);
        assert!(text.starts_with("# seed=7\nscenario_id,d_1,d_2\n1,1.500000,2.000000\n"));
        assert_eq!(read_scenarios_csv(&text).unwrap(), s);
        assert!(read_scenarios_csv("scenario_id,d_1\n1,-2\n").is_err());
        assert!(read_scenarios_csv("scenario_id,d_1\n1,abc\n").is_err());
        assert!(read_scenarios_csv("scenario_id,d_1\n").is_err());
    }

    #[test]
    fn moments_round_trip() {
        let m = vec![MomentInfo::new(19.4, 80.123456789012).unwrap(), MomentInfo::new(1.0, 0.0).unwrap()];
        assert_eq!(read_moments_csv(&write_moments_csv(&m, &[])).unwrap(), m);
        assert!(read_moments_csv("commodity,mean,variance\n0,-1,2\n").is_err());
    }

    #[test]
    fn solution_round_trip() {
        let sol = SolutionFile {
            model: "drso".into(),
            capacity_mode: "shared".into(),
            x: [("a".to_string(), 1.25)].into_iter().collect(),
            d_tilde: Some(vec![3.0]),
            capacity_cost: 2.5,
            outsourcing_value: 1.0,
            objective: 3.5,
            nature_value: Some(0.1),
            seed: None,
            stats: SolverStats { iterations: Some(4), ..Default::default() },
        };
        let text = sol.to_json();
        assert!(text.contains("\"d_tilde\""));
        assert_eq!(SolutionFile::from_json(&text).unwrap(), sol);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert!(write_atomic(&dir.path().join("missing/out.csv"), "x").is_err());
    }
}
