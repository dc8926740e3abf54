//! Plot-ready data files derived from a trace.
//!
//! Every `.dat` file is whitespace separated with a `#` header, readable by
//! gnuplot or `numpy.loadtxt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics;
use crate::trace::{Trace, TraceRow};
use crate::{Error, Result};

/// Threshold used for the convergence times in the summary.
pub const CONVERGENCE_TOL: f64 = 1e-2;

/// Number of heading glyph snapshots drawn on the trajectory plot.
pub const SNAPSHOTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub agents: usize,
    pub rows: usize,
    pub t_end: f64,
    pub tolerance: f64,
    /// First time after which the quantity stays below `tolerance`.
    pub heading_spread_settle_s: Option<f64>,
    pub heading_error_settle_s: Option<f64>,
    pub speed_spread_settle_s: Option<f64>,
    pub angular_speed_settle_s: Option<f64>,
    pub final_heading_spread: f64,
    pub final_heading_error: f64,
    pub final_speed_spread: f64,
    pub final_angular_speed: f64,
    pub d_min: f64,
    pub d_min_t: f64,
    pub u_max_abs: f64,
    pub tau_max_abs: f64,
    pub certified: bool,
    pub violations: usize,
}

/// First time from which `values` stays at or below `tol` until the end.
pub fn settle_time(times: &[f64], values: &[f64], tol: f64) -> Option<f64> {
    match values.iter().rposition(|v| !(*v <= tol)) {
        None => times.first().copied(),
        Some(last) if last + 1 < times.len() => Some(times[last + 1]),
        Some(_) => None,
    }
}

fn series(rows: &[TraceRow], f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

fn per_agent(trace: &Trace, title: &str, unit: &str, f: impl Fn(&crate::trace::AgentRow) -> f64) -> String {
    let n = trace.agents();
    let mut out = format!("# {title} [{unit}]\n# t");
    for i in 1..=n {
        write!(out, " agent_{i}").unwrap();
    }
    out.push('\n');
    for r in &trace.rows {
        write!(out, "{}", r.t).unwrap();
        for a in &r.agents {
            write!(out, " {}", f(a)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn trajectory(trace: &Trace) -> String {
    let n = trace.agents();
    let mut out = String::from("# per-agent paths: one block per agent (x y), blocks separated by two blank lines\n");
    for i in 0..n {
        writeln!(out, "# agent_{}", i + 1).unwrap();
        for r in &trace.rows {
            let a = &r.agents[i];
            writeln!(out, "{} {}", a.x, a.y).unwrap();
        }
        out.push_str("\n\n");
    }
    let last = trace.rows.len() - 1;
    let picks: Vec<usize> = (0..SNAPSHOTS).map(|k| k * last / (SNAPSHOTS - 1).max(1)).collect();
    out.push_str("# heading glyphs: one block per snapshot (t x y cos(theta) sin(theta))\n");
    for k in picks {
        let r = &trace.rows[k];
        writeln!(out, "# snapshot t={}", r.t).unwrap();
        for a in &r.agents {
            writeln!(out, "{} {} {} {} {}", r.t, a.x, a.y, a.theta.cos(), a.theta.sin()).unwrap();
        }
        out.push_str("\n\n");
    }
    out
}

pub fn summarize(trace: &Trace) -> Result<PlotSummary> {
    let rows = &trace.rows;
    let last = rows.last().ok_or(Error::EmptyTrace)?;
    let reference = trace.meta.scenario.gains().reference;
    let states: Vec<_> = rows.iter().map(TraceRow::states).collect();
    let times = series(rows, |r| r.t);
    let spread: Vec<f64> = states.iter().map(|s| metrics::heading_spread(s)).collect();
    let error: Vec<f64> = states.iter().zip(&times).map(|(s, t)| metrics::heading_error(s, reference.at(*t).theta)).collect();
    let speed: Vec<f64> = states.iter().map(|s| metrics::speed_spread(s)).collect();
    let omega: Vec<f64> = states.iter().map(|s| metrics::max_angular_speed(s)).collect();
    let (d_min, d_min_t) = rows.iter().fold((f64::INFINITY, 0.0), |best, r| if r.d_min < best.0 { (r.d_min, r.t) } else { best });
    let abs_max = |f: fn(&crate::trace::AgentRow) -> f64| rows.iter().flat_map(|r| r.agents.iter().map(move |a| f(a).abs())).fold(0.0, f64::max);
    let report = trace.report();
    Ok(PlotSummary {
        agents: trace.agents(),
        rows: rows.len(),
        t_end: last.t,
        tolerance: CONVERGENCE_TOL,
        heading_spread_settle_s: settle_time(&times, &spread, CONVERGENCE_TOL),
        heading_error_settle_s: settle_time(&times, &error, CONVERGENCE_TOL),
        speed_spread_settle_s: settle_time(&times, &speed, CONVERGENCE_TOL),
        angular_speed_settle_s: settle_time(&times, &omega, CONVERGENCE_TOL),
        final_heading_spread: *spread.last().unwrap(),
        final_heading_error: *error.last().unwrap(),
        final_speed_spread: *speed.last().unwrap(),
        final_angular_speed: *omega.last().unwrap(),
        d_min,
        d_min_t,
        u_max_abs: abs_max(|a| a.u),
        tau_max_abs: abs_max(|a| a.tau),
        certified: report.certified,
        violations: report.violations.len(),
    })
}

/// Writes the plot data files and `summary.json` into `outdir`.
pub fn emit_plots(trace: &Trace, outdir: &Path) -> Result<Vec<PathBuf>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let summary = summarize(trace)?;
    let mut dmin = String::from("# smallest pairwise distance [m]\n# t d_min\n");
    for r in &trace.rows {
        writeln!(dmin, "{} {}", r.t, r.d_min).unwrap();
    }
    let files = [
        ("heading.dat", per_agent(trace, "heading", "rad", |a| a.theta)),
        ("speed.dat", per_agent(trace, "linear speed", "m/s", |a| a.v)),
        ("angular_speed.dat", per_agent(trace, "angular speed", "rad/s", |a| a.w)),
        ("u.dat", per_agent(trace, "linear acceleration input", "m/s^2", |a| a.u)),
        ("tau.dat", per_agent(trace, "angular acceleration input", "rad/s^2", |a| a.tau)),
        ("dmin.dat", dmin),
        ("trajectory.dat", trajectory(trace)),
        ("summary.json", serde_json::to_string_pretty(&summary)?),
    ];
    fs::create_dir_all(outdir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = outdir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settle_time_cases() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(settle_time(&t, &[1.0, 0.5, 0.001, 0.0], 0.01), Some(2.0));
        assert_eq!(settle_time(&t, &[0.0, 0.0, 0.0, 0.0], 0.01), Some(0.0));
        assert_eq!(settle_time(&t, &[0.0, 0.0, 0.0, 1.0], 0.01), None);
        assert_eq!(settle_time(&t, &[0.0, 1.0, 0.0, 0.0], 0.01), Some(2.0));
        assert_eq!(settle_time(&t, &[0.0, 0.0, f64::NAN, 0.0], 0.01), Some(3.0));
    }
}
