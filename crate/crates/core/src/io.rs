//! File formats: slice traces, sweep observations, fit reports, task lists
//! and schedules.
//!
//! Multi-section CSV files (reports, schedules) separate sections with a
//! single blank line. Floats are written with Rust's shortest round-trip
//! formatting, so reading a file back reproduces every value bit for bit.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{CoefficientVector, Constituent, ConstituentFlowVector, ConstituentMask};
use crate::error::{Error, Result};
use crate::estimate::{Annotation, ObservationSet};
use crate::pipeline::{FitReport, Split, SweepRow};
use crate::policy::{BudgetProblem, Schedule, TaskDescriptor};
use crate::sim::{Phase, SliceRecord, Trace};

pub const TRACE_HEADER: [&str; 9] = [
    "slice",
    "phase",
    "b_individual",
    "b_local",
    "b_global",
    "b_environment",
    "b_snk",
    "energy_j",
    "alive_nodes",
];

const FLOW_COLUMNS: [&str; 5] = ["b_individual", "b_local", "b_global", "b_environment", "b_snk"];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(true).from_writer(w)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.to_string()))?.flush()?;
    Ok(())
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {what} '{field}' is not a number")))
}

pub fn write_trace<W: Write>(trace: &Trace, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        let mut row = vec![r.slice.to_string(), r.phase.to_string()];
        row.extend(r.flows.0.iter().map(|v| v.to_string()));
        row.push(r.energy_j.to_string());
        row.push(r.alive_nodes.to_string());
        out.write_record(&row)?;
    }
    finish(out)
}

/// Reads a trace. The header must match [`TRACE_HEADER`] exactly and slice
/// indices must strictly increase. The slice width is not stored and is set
/// to 1.
pub fn read_trace<R: Read>(r: R) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "trace header must be '{}', found '{}'",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records: Vec<SliceRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let slice: u32 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad slice index '{}'", &rec[0])))?;
        if let Some(prev) = records.last() {
            if slice <= prev.slice {
                return Err(Error::Parse(format!(
                    "line {line}: slice {slice} does not follow slice {}",
                    prev.slice
                )));
            }
        }
        let phase: Phase = rec[1].parse()?;
        let mut flows = [0.0; 5];
        for (k, f) in flows.iter_mut().enumerate() {
            *f = parse_f64(&rec[2 + k], FLOW_COLUMNS[k], line)?;
        }
        let flows = ConstituentFlowVector::new(flows)?;
        let energy_j = parse_f64(&rec[7], "energy_j", line)?;
        let alive_nodes = rec[8]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad alive_nodes '{}'", &rec[8])))?;
        records.push(SliceRecord {
            slice,
            phase,
            flows,
            energy_j,
            alive_nodes,
        });
    }
    Ok(Trace { dt: 1.0, records })
}

pub fn write_trace_file(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, fs::File::create(path)?)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Trace> {
    read_trace(fs::File::open(path)?)
}

/// Writes sweep rows: run, seed, the sampled parameters in `params` order,
/// the five flow totals and the run's energy.
pub fn write_observations<W: Write>(rows: &[SweepRow], params: &[String], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["run".to_string(), "seed".to_string()];
    header.extend(params.iter().cloned());
    header.extend(FLOW_COLUMNS.iter().map(|s| s.to_string()));
    header.push("energy_j".into());
    header.push("slices".into());
    out.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.run.to_string(), r.seed.to_string()];
        row.extend(r.params.iter().map(|(_, v)| v.to_string()));
        row.extend(r.flows.0.iter().map(|v| v.to_string()));
        row.push(r.energy_j.to_string());
        row.push(r.slices.to_string());
        out.write_record(&row)?;
    }
    finish(out)
}

/// Reads any CSV carrying the five flow columns and `energy_j` (a trace or a
/// sweep file) as an observation set. Phases are kept when present.
pub fn read_observations<R: Read>(r: R, mask: ConstituentMask) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let mut flow_idx = [0usize; 5];
    for (k, name) in FLOW_COLUMNS.iter().enumerate() {
        flow_idx[k] = find(name).ok_or_else(|| Error::Parse(format!("missing column '{name}'")))?;
    }
    let energy_idx = find("energy_j").ok_or_else(|| Error::Parse("missing column 'energy_j'".into()))?;
    let phase_idx = find("phase");
    let index_idx = find("slice").or_else(|| find("run"));
    let mut rows = Vec::new();
    let mut energy = Vec::new();
    let mut annotations = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut flows = [0.0; 5];
        for k in 0..5 {
            flows[k] = parse_f64(&rec[flow_idx[k]], FLOW_COLUMNS[k], line)?;
        }
        rows.push(ConstituentFlowVector::new(flows)?);
        energy.push(parse_f64(&rec[energy_idx], "energy_j", line)?);
        let index = match index_idx {
            Some(j) => rec[j]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad index '{}'", &rec[j])))?,
            None => i as u32,
        };
        let phase = phase_idx.map(|j| rec[j].parse::<Phase>()).transpose()?;
        annotations.push(Annotation { index, phase });
    }
    let mut obs = ObservationSet::new(rows, energy, mask)?;
    obs.annotations = annotations;
    Ok(obs)
}

fn fmt_opt(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

/// Report sections: coefficients, predictions, summary, per-phase shares.
pub fn write_report<W: Write>(report: &FitReport, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut out = csv_writer(&mut buf);
        out.write_record(["constituent", "alpha", "rel_stderr", "energy_share"])?;
        for c in report.fit.coefficients.mask.active() {
            out.write_record([
                c.name().to_string(),
                report.fit.coefficients.alpha[c.index()].to_string(),
                fmt_opt(report.fit.rel_stderr[c.index()]),
                fmt_opt(report.shares[c.index()]),
            ])?;
        }
        finish(out)?;
    }
    buf.push(b'\n');
    {
        let mut out = csv_writer(&mut buf);
        out.write_record(["slice", "phase", "split", "observed_j", "predicted_j", "pct_error"])?;
        for p in &report.predictions {
            out.write_record([
                p.index.to_string(),
                p.phase.map_or(String::new(), |ph| ph.to_string()),
                p.split.as_str().to_string(),
                p.observed.to_string(),
                p.predicted.to_string(),
                fmt_opt(p.pct_error),
            ])?;
        }
        finish(out)?;
    }
    buf.push(b'\n');
    {
        let mut out = csv_writer(&mut buf);
        out.write_record([
            "mape_pct",
            "max_pct_error",
            "dominant_constituent",
            "observations",
            "condition",
        ])?;
        out.write_record([
            report.errors.mape_pct.to_string(),
            report.errors.max_ape_pct.to_string(),
            report.dominant.name().to_string(),
            report.fit.observations.to_string(),
            report.fit.condition.to_string(),
        ])?;
        finish(out)?;
    }
    if !report.phase_shares.is_empty() {
        buf.push(b'\n');
        let mut out = csv_writer(&mut buf);
        let mut header = vec!["phase".to_string()];
        header.extend(FLOW_COLUMNS.iter().map(|c| format!("share_{}", &c[2..])));
        header.push("mean_energy_j".into());
        out.write_record(&header)?;
        for ps in &report.phase_shares {
            let mut row = vec![ps.phase.to_string()];
            row.extend(ps.shares.iter().map(|v| fmt_opt(*v)));
            row.push(ps.mean_energy.to_string());
            out.write_record(&row)?;
        }
        finish(out)?;
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads the coefficient section of a report (everything before the first
/// blank line) back into a model.
pub fn read_model<R: Read>(mut r: R) -> Result<CoefficientVector> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let section: String = text
        .lines()
        .take_while(|l| !l.trim().is_empty())
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(section.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("constituent") || header.get(1) != Some("alpha") {
        return Err(Error::Parse("model section must start with 'constituent,alpha'".into()));
    }
    let mut alpha = [0.0; 5];
    let mut mask = [false; 5];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let c: Constituent = rec[0].parse()?;
        if mask[c.index()] {
            return Err(Error::Parse(format!("line {line}: constituent {c} listed twice")));
        }
        mask[c.index()] = true;
        alpha[c.index()] = parse_f64(&rec[1], "alpha", line)?;
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::Parse("model lists no constituents".into()));
    }
    CoefficientVector::new(alpha, ConstituentMask(mask))
}

pub fn read_model_file(path: impl AsRef<Path>) -> Result<CoefficientVector> {
    read_model(fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConstraints {
    /// Require Local energy > 0.
    pub local: bool,
    /// Require Global energy > 0.
    pub global: bool,
}

/// Task list file (TOML).
///
/// ```toml
/// battery = 0.5
/// [constraints]
/// local = true
/// global = true
/// [[task]]
/// id = 1
/// constituent = "individual"
/// packets = 4
/// importance = 1.0
/// mandatory = true
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub battery: Option<f64>,
    #[serde(default)]
    pub constraints: TaskConstraints,
    #[serde(default, rename = "task")]
    pub tasks: Vec<TaskDescriptor>,
}

impl TaskFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: TaskFile = toml::from_str(s)?;
        let mut ids: Vec<u32> = f.tasks.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidTask {
                task: w[0],
                reason: "duplicate task id".into(),
            });
        }
        for t in &f.tasks {
            t.validate()?;
        }
        Ok(f)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Builds a problem; `battery` overrides the file's value.
    pub fn problem(&self, model: CoefficientVector, battery: Option<f64>) -> Result<BudgetProblem> {
        let battery = battery
            .or(self.battery)
            .ok_or_else(|| Error::Parse("no battery given in the task file or on the command line".into()))?;
        Ok(BudgetProblem {
            tasks: self.tasks.clone(),
            model,
            battery,
            require_local: self.constraints.local,
            require_global: self.constraints.global,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("task file serializes")
    }
}

/// Schedule CSV: the ordered tasks, a blank line, then `key,value` rows of
/// the feasibility report.
pub fn write_schedule<W: Write>(schedule: &Schedule, battery: f64, mut w: W) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut out = csv_writer(&mut buf);
        out.write_record([
            "position",
            "id",
            "constituent",
            "packets",
            "importance",
            "mandatory",
            "cost_j",
            "cumulative_j",
        ])?;
        let mut cumulative = 0.0;
        for (i, s) in schedule.order.iter().enumerate() {
            cumulative += s.cost;
            out.write_record([
                (i + 1).to_string(),
                s.task.id.to_string(),
                s.task.constituent.name().to_string(),
                s.task.packets.to_string(),
                s.task.importance.to_string(),
                s.task.mandatory.to_string(),
                s.cost.to_string(),
                cumulative.to_string(),
            ])?;
        }
        finish(out)?;
    }
    buf.push(b'\n');
    {
        let r = &schedule.report;
        let mut out = csv_writer(&mut buf);
        out.write_record(["key", "value"])?;
        let failed: Vec<&str> = r.failures.iter().map(|f| f.constraint()).collect();
        let rows = [
            ("feasible", r.feasible.to_string()),
            ("method", format!("{:?}", r.method).to_lowercase()),
            ("battery_j", battery.to_string()),
            ("total_cost_j", r.total_cost.to_string()),
            ("slack_j", r.slack.to_string()),
            ("total_importance", r.total_importance.to_string()),
            ("e_local_positive", r.constraints.local_positive.to_string()),
            ("e_global_positive", r.constraints.global_positive.to_string()),
            ("within_budget", r.constraints.within_budget.to_string()),
            ("failed_constraints", failed.join("; ")),
        ];
        for (k, v) in rows {
            out.write_record([k, v.as_str()])?;
        }
        for c in Constituent::ALL {
            out.write_record([format!("energy_{}", c.name()), r.per_constituent[c.index()].to_string()])?;
        }
        finish(out)?;
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}
