//! Tabular emitters: trajectory CSV, flat key=value certificates, sweep
//! tables and study reports. Floats are written with the shortest
//! round-trip representation, so re-parsing a table reproduces the
//! in-memory values bit for bit and repeated runs are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::sliding::{Certificate, StepDiagnostics};
use crate::verify::StudyReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("table parse error at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

pub fn trajectory_csv(traj: &Trajectory, emit_coeffs: bool) -> String {
    let mut out = String::new();
    let mut header: Vec<String> =
        StepDiagnostics::CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    if emit_coeffs {
        let n = traj.states.first().map(|s| s.w.len()).unwrap_or(0);
        for prefix in ["w", "theta", "phi"] {
            for k in 0..n {
                header.push(format!("{prefix}{k}"));
            }
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, d) in traj.diagnostics.iter().enumerate() {
        let mut row: Vec<String> = d.csv_values().iter().map(|v| format!("{v}")).collect();
        if emit_coeffs {
            let s = &traj.states[i];
            for field in [&s.w, &s.theta, &s.phi] {
                for c in &field.coeffs {
                    row.push(format!("{c}"));
                }
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Re-parse the diagnostics columns of a trajectory table (coefficient
/// columns, when present, are ignored).
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<StepDiagnostics>, ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(ReportError::Malformed { line: 1, msg: "empty table".into() })?;
    let expected = StepDiagnostics::CSV_COLUMNS.join(",");
    if !header.starts_with(&expected) {
        return Err(ReportError::Malformed { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .take(StepDiagnostics::CSV_COLUMNS.len())
            .map(|tok| {
                tok.parse::<f64>().map_err(|e| ReportError::Malformed {
                    line: i + 1,
                    msg: format!("bad float {tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        out.push(StepDiagnostics::from_csv_values(&values).ok_or(ReportError::Malformed {
            line: i + 1,
            msg: "short row".into(),
        })?);
    }
    Ok(out)
}

pub fn certificate_text(cert: &Certificate) -> String {
    let mut out = String::new();
    for (k, v) in cert.to_key_values() {
        let _ = writeln!(out, "{k}={v}");
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub psi0: f64,
    pub g_max: f64,
    pub margin: f64,
    pub t_star_observed: Option<f64>,
    pub t_star_bound: Option<f64>,
    pub certified: bool,
}

impl SweepRow {
    pub fn from_certificate(value: f64, cert: &Certificate) -> Self {
        SweepRow {
            value,
            psi0: cert.psi0,
            g_max: cert.g_max,
            margin: cert.margin,
            t_star_observed: cert.t_star_observed,
            t_star_bound: cert.t_star_bound,
            certified: cert.certified,
        }
    }
}

pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{axis},psi0,g_max,margin,t_star_observed,t_star_bound,certified");
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "none".into());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.value,
            r.psi0,
            r.g_max,
            r.margin,
            opt(r.t_star_observed),
            opt(r.t_star_bound),
            r.certified
        );
    }
    out
}

pub fn study_csv(report: &StudyReport) -> String {
    let mut out = String::new();
    let labeled = !report.row_labels.is_empty();
    if labeled {
        let _ = writeln!(out, "label,{}", report.columns.join(","));
    } else {
        let _ = writeln!(out, "{}", report.columns.join(","));
    }
    for (i, row) in report.rows.iter().enumerate() {
        let values: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if labeled {
            let _ = writeln!(out, "{},{}", report.row_labels[i], values.join(","));
        } else {
            let _ = writeln!(out, "{}", values.join(","));
        }
    }
    out
}

/// Write through a temporary sibling and rename, so readers never observe a
/// half-written table.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp_path = std::path::PathBuf::from(tmp);
    fs::write(&tmp_path, contents)?;
    fs::rename(&tmp_path, path)
}
