// Runs a config, appends the result to a JSON-lines ledger, repeats it to show
// the digests are reproducible, and builds a report from the ledger.
//
//     cargo run --example experiment_ledger

use std::path::Path;

use ckn_lab::experiment::{report, run_config, ExperimentConfig, RunContext};

const CONFIG: &str = r#"
id = "weighted-constants"
operation = "constants"

[[params]]
n = 4
p = 2.5
a = 0.2
b = 0.5

[[params]]
n = 5
p = 2.0
a = 0.5
b = 1.0

[tolerances]
max_disagreement = 1e-6
"#;

fn main() -> ckn_lab::Result<()> {
    let dir = std::env::temp_dir().join("ckn-ledger-example");
    std::fs::create_dir_all(&dir)?;
    let ledger = dir.join("ledger.jsonl");
    let _ = std::fs::remove_file(&ledger);
    let ctx = RunContext {
        ledger: Some(ledger.clone()),
        output_dir: Some(dir.join("results")),
        ..Default::default()
    };

    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    let first = run_config(cfg.clone(), Path::new("."), &ctx)?;
    let second = run_config(cfg, Path::new("."), &ctx)?;
    println!("inputs  {}", first.inputs_digest);
    println!("outputs {}", first.outputs_digest);
    println!("reproduced: {}", first.outputs_digest == second.outputs_digest);
    for c in &first.checks {
        println!("check {}: {:?} against {} -> {}", c.name, c.value, c.bound, c.passed);
    }

    let files = report(&ledger, "passed=true", &dir.join("report"))?;
    println!("{} records, table at {}", files.records, files.table.display());
    print!("{}", std::fs::read_to_string(files.summary)?);
    Ok(())
}
