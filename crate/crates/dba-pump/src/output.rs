//! Comma-separated output with a `#` metadata block, written atomically.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::observables::TransientRecord;
use crate::oracle::OracleComparison;
use crate::sweep::{AuditReport, SweepPlan, SweepResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Fails unless a file can be created next to `path`; leaves nothing behind.
pub fn check_writable(path: &Path) -> Result<()> {
    if path.is_dir() {
        return Err(io_err(path, std::io::Error::other("output path is a directory")));
    }
    let tmp = temp_path(path);
    fs::write(&tmp, b"").map_err(|e| io_err(path, e))?;
    fs::remove_file(&tmp).map_err(|e| io_err(&tmp, e))
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = temp_path(path);
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

/// Metadata block: tool version, the resolved config, then extra lines.
fn header(kind: &str, cfg: &RunConfig, extra: &[String]) -> String {
    let mut s = format!("# dba-pump {VERSION} {kind}\n# config:\n");
    for line in cfg.to_text().lines() {
        let _ = writeln!(s, "#   {line}");
    }
    for line in extra {
        let _ = writeln!(s, "# {line}");
    }
    s
}

fn row(values: impl IntoIterator<Item = String>) -> String {
    let mut s = values.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// `t_fs, I_L, I_R, pop.<orbital>…, [pop.boson], trace_err, min_eig`.
pub fn time_series_csv(record: &TransientRecord, cfg: &RunConfig) -> String {
    let d = &record.diagnostics;
    let extra = vec![
        format!("n_modes = {},{}", d.n_modes[0], d.n_modes[1]),
        format!("Q_L = {:e}", record.q_l),
        format!("Q_R = {:e}", record.q_r),
        format!("recurrence_free = {}", d.recurrence_free),
        format!("decay_floor_met = {}", d.decay_floor_met),
        format!("min_eig = {:e}", d.min_eigenvalue),
        format!("positivity_warnings = {}", d.positivity_warnings),
        format!("max_trace_drift = {:e}", d.max_trace_drift),
        format!("max_hermiticity_drift = {:e}", d.max_hermiticity_drift),
        format!("max_charge_balance_error = {:e}", d.max_charge_balance_error),
    ];
    let mut s = header("run", cfg, &extra);
    let mut cols = vec!["t_fs".to_string(), "I_L".into(), "I_R".into()];
    cols.extend(record.orbitals.iter().map(|o| format!("pop.{o}")));
    if record.boson_occupation.is_some() {
        cols.push("pop.boson".into());
    }
    cols.push("trace_err".into());
    cols.push("min_eig".into());
    s.push_str(&row(cols));
    for n in 0..record.times.len() {
        let mut v = vec![num(record.times[n]), num(record.current_l[n]), num(record.current_r[n])];
        v.extend(record.populations.iter().map(|p| num(p[n])));
        if let Some(b) = &record.boson_occupation {
            v.push(num(b[n]));
        }
        v.push(num(record.trace_error[n]));
        v.push(num(record.min_rho_eigenvalue[n]));
        s.push_str(&row(v));
    }
    s
}

/// `param, Q_L, Q_R, decay_floor_met, converged`, then per-point diagnostics.
pub fn sweep_csv(result: &SweepResult, plan: &SweepPlan, cfg: &RunConfig, audit: Option<&AuditReport>) -> String {
    let mut extra = vec![
        format!("param = {}", plan.parameter.name()),
        format!("grid = {} points from {} to {}", plan.grid.len(), plan.grid[0], plan.grid[plan.grid.len() - 1]),
    ];
    if let Some(a) = audit {
        extra.push(format!("audit at {} = {}", a.value, if a.passed() { "pass" } else { "fail" }));
        for c in &a.checks {
            extra.push(format!("  {}: dQ_L/Q_L = {:e}, dQ_R/Q_R = {:e}", c.name, c.rel_l, c.rel_r));
        }
    }
    let mut s = header("sweep", cfg, &extra);
    s.push_str("param,Q_L,Q_R,decay_floor_met,converged,max_trace_drift,min_eig,status\n");
    for p in &result.points {
        let status = match &p.error {
            None => "ok".to_string(),
            Some(e) => format!("\"failed: {}\"", e.replace('"', "'")),
        };
        s.push_str(&row([
            format!("{}", p.value),
            num(p.q_l),
            num(p.q_r),
            p.decay_floor_met().to_string(),
            p.converged().to_string(),
            num(p.diagnostics.max_trace_drift),
            num(p.diagnostics.min_eigenvalue),
            status,
        ]));
    }
    s
}

/// Redfield and exact currents on the exact sampling grid.
pub fn oracle_csv(cmp: &OracleComparison, cfg: &RunConfig) -> String {
    let extra = vec![
        format!("Q_L redfield = {:e}, exact = {:e}, relative difference = {:e}", cmp.redfield_q[0], cmp.exact_q[0], cmp.rel[0]),
        format!("Q_R redfield = {:e}, exact = {:e}, relative difference = {:e}", cmp.redfield_q[1], cmp.exact_q[1], cmp.rel[1]),
        format!("tolerance = {}", cmp.tolerance),
        format!("result = {}", if cmp.passed() { "pass" } else { "fail" }),
    ];
    let mut s = header("oracle-check", cfg, &extra);
    s.push_str("t_fs,I_L_redfield,I_R_redfield,I_L_exact,I_R_exact\n");
    for (n, t) in cmp.times.iter().enumerate() {
        s.push_str(&row([
            num(*t),
            num(cmp.redfield_current[0][n]),
            num(cmp.redfield_current[1][n]),
            num(cmp.exact_current[0][n]),
            num(cmp.exact_current[1][n]),
        ]));
    }
    s
}
