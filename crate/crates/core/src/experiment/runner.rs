use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{CknError, Result};

use super::config::{ExperimentConfig, TolProfile};
use super::ledger::{append_record, inputs_digest, outputs_digest, CheckOutcome, OutputValue, ResultRecord, ARTIFACT_VERSION};
use super::ops::{execute, Table};

/// Where results go and which command-line overrides apply.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub ledger: Option<PathBuf>,
    /// Directory for `<id>.csv`; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol_profile: Option<TolProfile>,
}

impl RunContext {
    pub fn with_ledger(ledger: impl Into<PathBuf>) -> Self {
        RunContext {
            ledger: Some(ledger.into()),
            ..Default::default()
        }
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(profile) = self.tol_profile {
            cfg.tol_profile = profile;
        }
    }
}

pub fn run_experiment(config_path: &Path, ctx: &RunContext) -> Result<ResultRecord> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_config(cfg, base, ctx)
}

/// Executes the operation, evaluates the configured tolerances, appends the
/// record to the ledger and writes the CSV side product. A failed tolerance
/// is reported as an invariant violation after the record is persisted.
pub fn run_config(mut cfg: ExperimentConfig, base_dir: &Path, ctx: &RunContext) -> Result<ResultRecord> {
    ctx.apply(&mut cfg);
    cfg.validate()?;
    let canonical = cfg.to_toml()?;
    let out = execute(&cfg, base_dir)?;
    let checks = evaluate_checks(&cfg, &out.outputs)?;
    let passed = checks.iter().all(|c| c.passed);
    let (module, operation) = cfg.operation.target();
    let record = ResultRecord {
        id: cfg.id.clone(),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        module: module.into(),
        operation: operation.into(),
        version: ARTIFACT_VERSION.into(),
        inputs_digest: inputs_digest(&canonical, &out.grids),
        outputs_digest: outputs_digest(&out.outputs, &checks),
        outputs: out.outputs,
        checks,
        passed,
        grids: out.grids,
    };
    if let Some(ledger) = &ctx.ledger {
        append_record(ledger, &record)?;
    }
    if let Some(dir) = &ctx.output_dir {
        std::fs::create_dir_all(dir)?;
        write_table(&dir.join(format!("{}.csv", cfg.id)), &out.table)?;
    }
    if !passed {
        let failed: Vec<String> = record
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {} (want {})", c.name, c.value.entries().join(" "), c.bound))
            .collect();
        return Err(CknError::InvariantViolation(format!("{}: {}", cfg.id, failed.join("; "))));
    }
    Ok(record)
}

fn evaluate_checks(cfg: &ExperimentConfig, outputs: &std::collections::BTreeMap<String, OutputValue>) -> Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    for (name, tol) in &cfg.tolerances {
        let value = outputs.get(name).ok_or_else(|| {
            CknError::config(format!("tolerances.{name}"), format!("operation produces no output named {name:?}"))
        })?;
        let passed = match value {
            OutputValue::Real(v) => tol.admits(*v),
            OutputValue::List(v) => !v.is_empty() && v.iter().all(|x| tol.admits(*x)),
            OutputValue::Flag(b) => tol.admits(if *b { 1.0 } else { 0.0 }),
            OutputValue::Text(t) => {
                let vals: Vec<f64> = t.split_whitespace().filter_map(|x| x.parse().ok()).collect();
                !vals.is_empty() && vals.iter().all(|x| tol.admits(*x))
            }
        };
        checks.push(CheckOutcome {
            name: name.clone(),
            value: value.clone(),
            bound: tol.describe(),
            passed,
        });
    }
    Ok(checks)
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    let io = |e: csv::Error| CknError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
