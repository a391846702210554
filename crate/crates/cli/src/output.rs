use std::path::Path;

use serde_json::json;

use crate::config::JobConfig;
use crate::jobs::{effective_tolerances, Cell, JobOutput, Table};
use crate::{CliError, RunOptions};

/// 17 significant digits in scientific notation.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format_num(*x),
        Cell::Int(n) => n.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io(path, e))?;
    w.write_record(&table.header).map_err(|e| io(path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell_text)).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

pub fn write_summary(
    path: &Path,
    opts: &RunOptions,
    cfg: &JobConfig,
    out: &JobOutput,
    exit_code: i32,
    wall_ms: f64,
) -> Result<(), CliError> {
    let (tol, identity, truncation) = effective_tolerances(cfg);
    let checks: Vec<serde_json::Value> = out
        .checks
        .iter()
        .map(|c| {
            let mut v = json!({
                "name": c.name,
                "key": c.key,
                "value": finite_or_null(c.value),
                "tol": c.tol,
                "passed": c.passed,
            });
            if let Some(n) = &c.note {
                v["note"] = json!(n);
            }
            v
        })
        .collect();
    let failed = out.checks.iter().filter(|c| !c.passed).count();
    let doc = json!({
        "command": opts.command.name(),
        "config": opts.config.display().to_string(),
        "passed": failed == 0,
        "exit_code": exit_code,
        "rows": out.table.rows.len(),
        "checks_total": out.checks.len(),
        "checks_failed": failed,
        "threads": opts.threads,
        "wall_time_ms": wall_ms,
        "tolerances": {
            "consistency": tol.consistency,
            "trace": tol.trace,
            "picard": tol.picard,
            "singular": tol.singular,
            "resolvent_condition": tol.resolvent_condition,
            "identity": identity,
            "truncation": truncation,
        },
        "checks": checks,
        "notes": out.notes,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io(path, e))
}
