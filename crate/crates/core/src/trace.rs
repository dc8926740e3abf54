//! Trace files: one CSV row per step plus a JSON sidecar with the scenario
//! echo, the switch log and the monitor summary.
//!
//! Floats are written in shortest round-trip form, so a trace read back from
//! disk is bit-identical to the one in memory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, ControlInput};
use crate::graph::SwitchEvent;
use crate::metrics::{MonitorReport, StepMetrics};
use crate::potential::PotentialParams;
use crate::scenario::{Prepared, Scenario};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

const AGENT_FIELDS: [(&str, &str, &str); 7] = [
    ("x", "m", "position x"),
    ("y", "m", "position y"),
    ("theta", "rad", "heading in (-pi, pi]"),
    ("v", "m/s", "linear speed"),
    ("w", "rad/s", "angular speed"),
    ("u", "m/s^2", "linear acceleration input applied over the following step"),
    ("tau", "rad/s^2", "angular acceleration input applied over the following step"),
];

const TAIL_FIELDS: [(&str, &str, &str); 7] = [
    ("d_min", "m", "smallest pairwise distance"),
    ("V1", "J", "speed/potential energy under the current edge set"),
    ("V2", "J", "heading energy"),
    ("edges", "count", "links after this step's update"),
    ("added", "count", "links created at this step"),
    ("removed", "count", "links dropped at this step"),
    ("engaged", "count", "agents in obstacle mode"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub u: f64,
    pub tau: f64,
}

impl AgentRow {
    pub fn state(&self) -> AgentState {
        AgentState { q: crate::Vec2::new(self.x, self.y), theta: self.theta, v: self.v, w: self.w }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub agents: Vec<AgentRow>,
    pub d_min: f64,
    pub v1: f64,
    pub v2: f64,
    pub edges: usize,
    pub added: usize,
    pub removed: usize,
    pub engaged: usize,
}

impl TraceRow {
    pub fn new(
        t: f64,
        states: &[AgentState],
        controls: &[ControlInput],
        m: &StepMetrics,
        added: usize,
        removed: usize,
        engaged: usize,
    ) -> Self {
        let agents = states
            .iter()
            .zip(controls)
            .map(|(s, c)| AgentRow { x: s.q.x, y: s.q.y, theta: s.theta, v: s.v, w: s.w, u: c.u, tau: c.tau })
            .collect();
        Self { t, agents, d_min: m.d_min, v1: m.v1, v2: m.v2, edges: m.edges, added, removed, engaged }
    }

    pub fn states(&self) -> Vec<AgentState> {
        self.agents.iter().map(AgentRow::state).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub code_version: String,
    pub agents: usize,
    pub scenario: Scenario,
    pub potential: PotentialParams,
    pub columns: Vec<Column>,
    pub switch_log: Vec<SwitchEvent>,
    pub report: MonitorReport,
}

impl TraceMeta {
    pub fn new(prep: &Prepared, switch_log: Vec<SwitchEvent>, report: MonitorReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            agents: prep.scenario.agents,
            scenario: prep.scenario.clone(),
            potential: *prep.potential.params(),
            columns: columns(prep.scenario.agents),
            switch_log,
            report,
        }
    }
}

pub fn columns(n: usize) -> Vec<Column> {
    let col = |name: String, unit: &str, description: &str| Column { name, unit: unit.into(), description: description.into() };
    let mut out = vec![col("t".into(), "s", "time")];
    for i in 1..=n {
        for (name, unit, desc) in AGENT_FIELDS {
            out.push(col(format!("{name}_{i}"), unit, &format!("agent {i}: {desc}")));
        }
    }
    for (name, unit, desc) in TAIL_FIELDS {
        out.push(col(name.into(), unit, desc));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

/// Sidecar path for a trace CSV: `run/trace.csv` -> `run/trace.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn agents(&self) -> usize {
        self.meta.agents
    }

    pub fn report(&self) -> &MonitorReport {
        &self.meta.report
    }

    pub fn to_csv(&self) -> String {
        let cols = columns(self.meta.agents);
        let mut out = String::with_capacity(self.rows.len() * (16 + 7 * 20 * self.meta.agents));
        let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for r in &self.rows {
            write!(out, "{}", r.t).unwrap();
            for a in &r.agents {
                write!(out, ",{},{},{},{},{},{},{}", a.x, a.y, a.theta, a.v, a.w, a.u, a.tau).unwrap();
            }
            writeln!(out, ",{},{},{},{},{},{},{}", r.d_min, r.v1, r.v2, r.edges, r.added, r.removed, r.engaged).unwrap();
        }
        out
    }

    pub fn parse_csv(text: &str, agents: usize) -> Result<Vec<TraceRow>> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::EmptyTrace)?;
        let expected = columns(agents);
        let width = expected.len();
        let names: Vec<&str> = header.split(',').collect();
        if names.len() != width || names.iter().zip(&expected).any(|(a, b)| *a != b.name) {
            return Err(Error::TraceFormat(format!("header does not match a {agents}-agent schema")));
        }
        let mut rows = Vec::new();
        for (ln, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != width {
                return Err(Error::TraceFormat(format!("row {} has {} cells, expected {width}", ln + 1, cells.len())));
            }
            let f = |k: usize| -> Result<f64> {
                cells[k].parse().map_err(|_| Error::TraceFormat(format!("row {}: bad number {:?}", ln + 1, cells[k])))
            };
            let c = |k: usize| -> Result<usize> {
                cells[k].parse().map_err(|_| Error::TraceFormat(format!("row {}: bad count {:?}", ln + 1, cells[k])))
            };
            let mut agents_row = Vec::with_capacity(agents);
            for i in 0..agents {
                let b = 1 + 7 * i;
                agents_row.push(AgentRow { x: f(b)?, y: f(b + 1)?, theta: f(b + 2)?, v: f(b + 3)?, w: f(b + 4)?, u: f(b + 5)?, tau: f(b + 6)? });
            }
            let b = 1 + 7 * agents;
            rows.push(TraceRow {
                t: f(0)?,
                agents: agents_row,
                d_min: f(b)?,
                v1: f(b + 1)?,
                v2: f(b + 2)?,
                edges: c(b + 3)?,
                added: c(b + 4)?,
                removed: c(b + 5)?,
                engaged: c(b + 6)?,
            });
        }
        if let Some(w) = rows.windows(2).position(|w| !(w[1].t > w[0].t)) {
            return Err(Error::TraceFormat(format!("time not strictly increasing at row {}", w + 2)));
        }
        Ok(rows)
    }

    /// Writes `trace.csv` and `trace.meta.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let csv = dir.join("trace.csv");
        fs::write(&csv, self.to_csv())?;
        fs::write(sidecar_path(&csv), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(csv)
    }

    pub fn read(csv: &Path) -> Result<Self> {
        let meta: TraceMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv))?)?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(Error::TraceFormat(format!("unsupported schema version {}", meta.schema_version)));
        }
        let rows = Self::parse_csv(&fs::read_to_string(csv)?, meta.agents)?;
        Ok(Self { meta, rows })
    }
}
