//! Files written by `run` and `compare`.
//!
//! Trajectory CSV columns, in order: `t, s`, then the state `y1..yn`,
//! velocity `dy1..dyn`, acceleration `ddy1..ddyn` and coupling term
//! `u1..un`. Orientation rollouts use `qw, qx, qy, qz` for the state and
//! angular velocity / acceleration / torque-coupling columns `wx..`,
//! `dwx..`, `ux..`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dmpp_core::dynamics::Trajectory;
use dmpp_core::Space;
use serde::Serialize;

use crate::metrics::RunMetrics;
use crate::runner::RunOutput;

pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_owned(), "s".to_owned()];
    match traj.space {
        Space::Position => {
            let n = traj.samples.first().map_or(0, |s| s.y.len());
            for prefix in ["y", "dy", "ddy", "u"] {
                h.extend((1..=n).map(|i| format!("{prefix}{i}")));
            }
        }
        Space::Orientation => {
            h.extend(["qw", "qx", "qy", "qz"].map(String::from));
            for prefix in ["w", "dw", "u"] {
                h.extend(["x", "y", "z"].map(|a| format!("{prefix}{a}")));
            }
        }
    }
    h
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trajectory_header(traj))?;
    for s in &traj.samples {
        let row = [s.t, s.s]
            .into_iter()
            .chain(s.y.iter().copied())
            .chain(s.dy.iter().copied())
            .chain(s.ddy.iter().copied())
            .chain(s.u.iter().copied())
            .map(|v| v.to_string());
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct DebugEntry {
    step: usize,
    t: f64,
    s: f64,
    state_applied: bool,
    goal_changed: bool,
    vias_changed: bool,
    innovation_condition: f64,
    residual_start: [f64; 3],
    residual_goal: [f64; 3],
    residual_via: f64,
    residual_state: [f64; 3],
}

pub fn debug_json(traj: &Trajectory) -> Result<String> {
    let entries: Vec<DebugEntry> = traj
        .debug
        .iter()
        .map(|d| DebugEntry {
            step: d.step,
            t: d.t,
            s: d.s,
            state_applied: d.report.state_applied,
            goal_changed: d.report.goal_changed,
            vias_changed: d.report.vias_changed,
            innovation_condition: d.report.innovation_condition,
            residual_start: d.residuals.start,
            residual_goal: d.residuals.goal,
            residual_via: d.residuals.via,
            residual_state: d.residuals.state,
        })
        .collect();
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Writes `<name>-<label>.csv`, `.metrics.json` and, when recorded,
/// `.debug.json`. Returns the paths written.
pub fn write_run(dir: &Path, name: &str, run: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let stem = format!("{name}-{}", run.label.replace('+', "_"));
    let mut written = Vec::new();

    let csv_path = dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path)
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    write_trajectory(&run.trajectory, std::io::BufWriter::new(file))?;
    written.push(csv_path);

    let metrics_path = dir.join(format!("{stem}.metrics.json"));
    fs::write(&metrics_path, serde_json::to_string_pretty(&run.metrics)?)?;
    written.push(metrics_path);

    if !run.trajectory.debug.is_empty() {
        let debug_path = dir.join(format!("{stem}.debug.json"));
        fs::write(&debug_path, debug_json(&run.trajectory)?)?;
        written.push(debug_path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    runs: Vec<&'a RunMetrics>,
}

/// Metrics of all runs of one scenario in a single document.
pub fn summary_json(name: &str, runs: &[RunOutput]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Summary {
        scenario: name,
        runs: runs.iter().map(|r| &r.metrics).collect(),
    })?)
}

/// Structured error report written next to the outputs on failure.
pub fn write_error(dir: &Path, name: &str, err: &anyhow::Error) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct ErrorReport<'a> {
        scenario: &'a str,
        error: String,
        causes: Vec<String>,
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.error.json"));
    let report = ErrorReport {
        scenario: name,
        error: err.to_string(),
        causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
    };
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{execute, RunOptions};
    use crate::scenario::parse;

    #[test]
    fn csv_columns_follow_the_header() {
        let text = r#"
schema_version = 1
name = "o"
[demo]
synthetic = { generator = "min_jerk", start = [0.0, 0.0], goal = [1.0, 2.0] }
duration = 0.2
samples = 50
"#;
        let p = parse(text).unwrap().prepare(Path::new(".")).unwrap();
        let runs = execute(
            &p,
            &RunOptions {
                record_debug: true,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_run(dir.path(), "o", &runs[0]).unwrap();
        assert_eq!(paths.len(), 3);
        let mut rdr = csv::Reader::from_path(&paths[0]).unwrap();
        let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
        assert_eq!(
            header,
            ["t", "s", "y1", "y2", "dy1", "dy2", "ddy1", "ddy2", "u1", "u2"]
        );
        let rows = rdr.records().count();
        assert_eq!(rows, runs[0].trajectory.samples.len());
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(m["label"], "dmpp");

        let err = anyhow::anyhow!("inner").context("outer");
        let e = write_error(dir.path(), "o", &err).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(e).unwrap()).unwrap();
        assert_eq!(v["error"], "outer");
        assert_eq!(v["causes"][0], "inner");
    }
}
