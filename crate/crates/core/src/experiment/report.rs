//! Tables and plot data from a ledger.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CknError, Result};

use super::ledger::{read_ledger, ResultRecord};

/// Conjunction of `key=value` terms over `id`, `module`, `operation` and `passed`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordFilter {
    terms: Vec<(String, String)>,
}

impl RecordFilter {
    pub fn parse(expr: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for part in expr.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CknError::config("filter", format!("expected key=value, got {part:?}")))?;
            let k = k.trim();
            if !matches!(k, "id" | "module" | "operation" | "passed") {
                return Err(CknError::config("filter", format!("unknown key {k:?}")));
            }
            terms.push((k.to_string(), v.trim().to_string()));
        }
        Ok(RecordFilter { terms })
    }

    pub fn matches(&self, r: &ResultRecord) -> bool {
        self.terms.iter().all(|(k, v)| match k.as_str() {
            "id" => &r.id == v,
            "module" => &r.module == v,
            "operation" => &r.operation == v,
            _ => r.passed.to_string() == *v,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub records: usize,
    pub table: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Writes `report.csv` (one row per output entry), `summary.txt` and an
/// `<id>_plot.csv` for each record carrying plot data.
pub fn report(ledger: &Path, filter: &str, out_dir: &Path) -> Result<ReportFiles> {
    let filter = RecordFilter::parse(filter)?;
    let records: Vec<ResultRecord> = read_ledger(ledger)?.into_iter().filter(|r| filter.matches(r)).collect();
    std::fs::create_dir_all(out_dir)?;
    let io = |e: csv::Error| CknError::Io(e.to_string());

    let table = out_dir.join("report.csv");
    let mut w = csv::Writer::from_path(&table).map_err(io)?;
    w.write_record([
        "id",
        "operation",
        "module",
        "timestamp",
        "inputs_digest",
        "outputs_digest",
        "passed",
        "key",
        "index",
        "value",
    ])
    .map_err(io)?;
    for r in &records {
        for (key, value) in &r.outputs {
            for (i, v) in value.entries().iter().enumerate() {
                w.write_record([
                    r.id.as_str(),
                    &r.operation,
                    &r.module,
                    &r.timestamp.to_string(),
                    &r.inputs_digest,
                    &r.outputs_digest,
                    &r.passed.to_string(),
                    key,
                    &i.to_string(),
                    v,
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush()?;

    let summary = out_dir.join("summary.txt");
    std::fs::write(&summary, summary_text(&records))?;

    let mut plots = Vec::new();
    for r in &records {
        let (Some(x), Some(y)) = (
            r.outputs.get("plot_x").and_then(|v| v.as_list()),
            r.outputs.get("plot_y").and_then(|v| v.as_list()),
        ) else {
            continue;
        };
        let path = out_dir.join(format!("{}_plot.csv", r.id));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(["x", "y"]).map_err(io)?;
        for (a, b) in x.iter().zip(y) {
            w.write_record([a.to_string(), b.to_string()]).map_err(io)?;
        }
        w.flush()?;
        plots.push(path);
    }
    Ok(ReportFiles {
        records: records.len(),
        table,
        summary,
        plots,
    })
}

/// One line per record: id, operation, verdict and its scalar outputs.
pub fn summary_text(records: &[ResultRecord]) -> String {
    let width = records.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
    let op_width = records.iter().map(|r| r.operation.len()).max().unwrap_or(9).max(9);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:<op_width$}  {:<6}  scalars", "id", "operation", "passed");
    for r in records {
        let scalars: Vec<String> = r
            .outputs
            .iter()
            .filter_map(|(k, v)| v.as_real().map(|x| format!("{k}={x:.6e}")))
            .collect();
        let verdict = if r.passed { "yes" } else { "NO" };
        let _ = writeln!(s, "{:<width$}  {:<op_width$}  {verdict:<6}  {}", r.id, r.operation, scalars.join(" "));
    }
    s
}
