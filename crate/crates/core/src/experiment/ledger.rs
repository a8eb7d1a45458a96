//! Append-only JSON-lines ledger of experiment results.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CknError, Result};
use crate::grid::GridSpec;

/// Version string folded into every inputs digest.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One named output. Non-finite reals are stored as text (`"NaN"`, `"inf"`,
/// `"-inf"`) because JSON has no spelling for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputValue {
    Flag(bool),
    Real(f64),
    List(Vec<f64>),
    Text(String),
}

impl OutputValue {
    pub fn real(v: f64) -> Self {
        if v.is_finite() {
            OutputValue::Real(v)
        } else {
            OutputValue::Text(v.to_string())
        }
    }

    pub fn list(v: Vec<f64>) -> Self {
        if v.iter().all(|x| x.is_finite()) {
            OutputValue::List(v)
        } else {
            OutputValue::Text(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            OutputValue::Real(v) => Some(*v),
            OutputValue::Text(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[f64]> {
        match self {
            OutputValue::List(v) => Some(v),
            _ => None,
        }
    }

    /// Scalar entries of the value, in order, as text.
    pub fn entries(&self) -> Vec<String> {
        match self {
            OutputValue::Flag(b) => vec![b.to_string()],
            OutputValue::Real(v) => vec![v.to_string()],
            OutputValue::List(v) => v.iter().map(|x| x.to_string()).collect(),
            OutputValue::Text(s) => vec![s.clone()],
        }
    }
}

/// Outcome of one tolerance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: OutputValue,
    pub bound: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    /// Unix seconds; excluded from both digests.
    pub timestamp: u64,
    pub module: String,
    pub operation: String,
    pub version: String,
    pub inputs_digest: String,
    pub outputs_digest: String,
    pub outputs: BTreeMap<String, OutputValue>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
    pub grids: Vec<GridSpec>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical config text, the grids used and the artifact version.
pub fn inputs_digest(canonical_config: &str, grids: &[GridSpec]) -> String {
    let grids = serde_json::to_string(grids).expect("grid specs serialize");
    sha256_hex(format!("{canonical_config}\n{grids}\n{ARTIFACT_VERSION}").as_bytes())
}

pub fn outputs_digest(outputs: &BTreeMap<String, OutputValue>, checks: &[CheckOutcome]) -> String {
    let body = serde_json::to_string(&(outputs, checks)).expect("outputs serialize");
    sha256_hex(body.as_bytes())
}

/// Appends one record as a single line. Each call opens the file in append
/// mode, so concurrent writers never interleave partial records on POSIX.
pub fn append_record(path: &Path, record: &ResultRecord) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut line = serde_json::to_string(record).map_err(|e| CknError::Io(e.to_string()))?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    Ok(())
}

/// Reads every record; blank lines are skipped and any other unparsable line
/// is reported with its 1-based line number.
pub fn read_ledger(path: &Path) -> Result<Vec<ResultRecord>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CknError::LedgerCorrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CknError::LedgerCorrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str) -> ResultRecord {
        let mut outputs = BTreeMap::new();
        outputs.insert("q".to_string(), OutputValue::real(6.0));
        outputs.insert("bad".to_string(), OutputValue::real(f64::NAN));
        outputs.insert("xs".to_string(), OutputValue::list(vec![1.0, 0.1]));
        let checks = Vec::new();
        ResultRecord {
            id: id.into(),
            timestamp: 0,
            module: "params".into(),
            operation: "sharp_constant".into(),
            version: ARTIFACT_VERSION.into(),
            inputs_digest: inputs_digest("x", &[]),
            outputs_digest: outputs_digest(&outputs, &checks),
            outputs,
            checks,
            passed: true,
            grids: Vec::new(),
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        append_record(&path, &record("a")).unwrap();
        append_record(&path, &record("b")).unwrap();
        let recs = read_ledger(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1], record("b"));
        assert!(recs[0].outputs["bad"].as_real().unwrap().is_nan());
    }

    #[test]
    fn corrupt_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        append_record(&path, &record("a")).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"id\": \"trunc\n").unwrap();
        match read_ledger(&path) {
            Err(CknError::LedgerCorrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
