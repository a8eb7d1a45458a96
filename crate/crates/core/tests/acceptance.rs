//! Runs every config under `configs/acceptance` and prints one line per
//! criterion. Config files are grouped by their `cNN` prefix.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ckn_lab::experiment::{read_ledger, run_experiment, ResultRecord, RunContext};

const CRITERIA: [&str; 10] = [
    "sharp constant: closed form, Rayleigh quotient and k-law agree",
    "transform identities and nonnegative axisymmetric drop",
    "bubble deficits vanish and Euler-Lagrange residual is small",
    "stability ratios positive and exponent slopes",
    "monotonicity chain",
    "spectral gap above one and grid stable",
    "scaling exponents near the manifold and far translation",
    "elementary inequality constants",
    "embedding constants positive and zero-homogeneous",
    "re-running the suite reproduces every digest",
];

fn configs() -> Vec<(usize, PathBuf)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance");
    let mut out: Vec<(usize, PathBuf)> = std::fs::read_dir(&dir)
        .expect("acceptance configs")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            let n = stem[1..3].parse().expect("cNN prefix");
            (n, p)
        })
        .collect();
    out.sort();
    out
}

struct Outcome {
    record: Option<ResultRecord>,
    error: Option<String>,
}

fn run_suite(ledger: &Path) -> Vec<(usize, PathBuf, Outcome)> {
    let ctx = RunContext::with_ledger(ledger);
    configs()
        .into_iter()
        .map(|(n, path)| {
            let before = read_ledger(ledger).map(|r| r.len()).unwrap_or(0);
            let started = Instant::now();
            let res = run_experiment(&path, &ctx);
            let after = read_ledger(ledger).unwrap_or_default();
            let record = (after.len() > before).then(|| after.last().unwrap().clone());
            eprintln!(
                "  ran {} in {:.1}s",
                path.file_name().unwrap().to_string_lossy(),
                started.elapsed().as_secs_f64()
            );
            let error = res.err().map(|e| e.to_string());
            (n, path, Outcome { record, error })
        })
        .collect()
}

fn describe(rec: &ResultRecord) -> String {
    if rec.checks.is_empty() {
        let reals: Vec<String> = rec
            .outputs
            .iter()
            .filter_map(|(k, v)| v.as_real().map(|x| format!("{k}={x:.4e}")))
            .collect();
        return format!("{}: recorded without bounds, {}", rec.id, reals.join(", "));
    }
    let parts: Vec<String> = rec
        .checks
        .iter()
        .map(|c| {
            let shown = match c.value.as_real() {
                Some(v) => format!("{v:.4e}"),
                None => match c.value.as_list() {
                    Some(xs) => {
                        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        format!("[{lo:.4e}, {hi:.4e}]")
                    }
                    None => format!("{:?}", c.value),
                },
            };
            format!("{}={} ({})", c.name, shown, c.bound)
        })
        .collect();
    format!("{}: {}", rec.id, parts.join(", "))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let first_ledger = dir.path().join("first.jsonl");
    let second_ledger = dir.path().join("second.jsonl");

    let first = run_suite(&first_ledger);
    let mut by_criterion: BTreeMap<usize, Vec<&(usize, PathBuf, Outcome)>> = BTreeMap::new();
    for item in &first {
        by_criterion.entry(item.0).or_default().push(item);
    }

    let mut lines = Vec::new();
    let mut all = true;
    for (i, title) in CRITERIA.iter().enumerate().take(9) {
        let n = i + 1;
        let items = by_criterion.get(&n).map(Vec::as_slice).unwrap_or(&[]);
        let mut ok = !items.is_empty();
        let mut detail = Vec::new();
        for (_, path, out) in items {
            match (&out.record, &out.error) {
                (Some(rec), err) => {
                    ok &= rec.passed && err.is_none();
                    detail.push(describe(rec));
                }
                (None, err) => {
                    ok = false;
                    detail.push(format!("{}: {}", path.display(), err.as_deref().unwrap_or("no record")));
                }
            }
        }
        all &= ok;
        lines.push(format!("criterion {n:>2} {}: {title}\n    {}", verdict(ok), detail.join("\n    ")));
    }

    eprintln!("  re-running the suite");
    let second = run_suite(&second_ledger);
    let mut mismatches = Vec::new();
    for ((_, path, a), (_, _, b)) in first.iter().zip(&second) {
        let same = match (&a.record, &b.record) {
            (Some(x), Some(y)) => x.inputs_digest == y.inputs_digest && x.outputs_digest == y.outputs_digest,
            _ => false,
        };
        if !same {
            mismatches.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    let ok = first.len() == second.len() && mismatches.is_empty();
    all &= ok;
    let detail = if ok {
        format!("{} records with identical input and output digests", first.len())
    } else {
        format!("differing: {}", mismatches.join(", "))
    };
    lines.push(format!("criterion 10 {}: {}\n    {detail}", verdict(ok), CRITERIA[9]));

    for l in &lines {
        println!("{l}");
    }
    if all {
        println!("acceptance: all 10 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
