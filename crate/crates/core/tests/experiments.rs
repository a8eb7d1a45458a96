use std::io::Write;
use std::path::Path;

use ckn_lab::bubble::Bubble;
use ckn_lab::experiment::config::{ExperimentConfig, FieldSpec, Operation, ParamTuple, Tolerance};
use ckn_lab::experiment::{read_ledger, report, run_config, run_experiment, OutputValue, RunContext};
use ckn_lab::grid::RadialGrid;
use ckn_lab::snapshot::save_snapshot;
use ckn_lab::{derive_params, sharp_constant, CknError};

const CONSTANTS: &str = r#"
id = "constants-3d"
operation = "constants"

[[params]]
n = 3
p = 2.0
a = 0.0
b = 0.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn constants_record_holds_q_and_the_sharp_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANTS);
    let ctx = RunContext {
        ledger: Some(dir.path().join("ledger.jsonl")),
        output_dir: Some(dir.path().join("out")),
        ..Default::default()
    };
    let rec = run_experiment(&cfg, &ctx).unwrap();
    assert_eq!(rec.outputs["q"], OutputValue::List(vec![6.0]));
    let s = sharp_constant(&derive_params(3, 2.0, 0.0, 0.0).unwrap());
    assert_eq!(rec.outputs["sharp_constant"], OutputValue::List(vec![s]));
    assert_eq!((rec.module.as_str(), rec.operation.as_str()), ("params", "sharp_constant"));
    let stored = read_ledger(&dir.path().join("ledger.jsonl")).unwrap();
    assert_eq!(stored, vec![rec]);
    let csv = std::fs::read_to_string(dir.path().join("out/constants-3d.csv")).unwrap();
    assert!(csv.starts_with("n,p,a,b,q,gamma,k,sharp_constant,rayleigh,ratio_law,disagreement\n"));
}

#[test]
fn missing_p_is_a_config_error_naming_p() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &CONSTANTS.replace("p = 2.0\n", ""));
    let err = run_experiment(&cfg, &RunContext::default()).unwrap_err();
    match &err {
        CknError::Config { path, .. } => assert!(path.ends_with(".p"), "{path}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn identical_runs_have_identical_digests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANTS);
    let ctx = RunContext::with_ledger(dir.path().join("ledger.jsonl"));
    let a = run_experiment(&cfg, &ctx).unwrap();
    let b = run_experiment(&cfg, &ctx).unwrap();
    assert_eq!(a.inputs_digest, b.inputs_digest);
    assert_eq!(a.outputs_digest, b.outputs_digest);
    assert_eq!(read_ledger(&dir.path().join("ledger.jsonl")).unwrap().len(), 2);
    let reseeded = run_experiment(
        &cfg,
        &RunContext {
            seed: Some(5),
            ..Default::default()
        },
    )
    .unwrap();
    assert_ne!(a.inputs_digest, reseeded.inputs_digest);
}

#[test]
fn failed_tolerance_is_recorded_then_reported_as_invariant_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{CONSTANTS}\n[tolerances]\nq = {{ max = 5.0 }}\n");
    let cfg = write(dir.path(), "c.toml", &text);
    let ledger = dir.path().join("ledger.jsonl");
    let err = run_experiment(&cfg, &RunContext::with_ledger(&ledger)).unwrap_err();
    assert!(matches!(err, CknError::InvariantViolation(_)));
    assert_eq!(err.exit_code(), 4);
    let recs = read_ledger(&ledger).unwrap();
    assert_eq!(recs.len(), 1);
    assert!(!recs[0].passed && !recs[0].checks[0].passed);
}

#[test]
fn tolerance_on_unknown_output_is_a_config_error() {
    let mut cfg = ExperimentConfig::from_toml(CONSTANTS).unwrap();
    cfg.tolerances.insert("nonexistent".into(), Tolerance::Max(1.0));
    let err = run_config(cfg, Path::new("."), &RunContext::default()).unwrap_err();
    assert!(matches!(err, CknError::Config { ref path, .. } if path == "tolerances.nonexistent"));
}

#[test]
fn corrupted_ledger_line_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONSTANTS);
    let ledger = dir.path().join("ledger.jsonl");
    run_experiment(&cfg, &RunContext::with_ledger(&ledger)).unwrap();
    std::fs::OpenOptions::new()
        .append(true)
        .open(&ledger)
        .unwrap()
        .write_all(b"not json\n")
        .unwrap();
    run_experiment(&cfg, &RunContext::with_ledger(&ledger)).unwrap();
    match report(&ledger, "", &dir.path().join("rep")) {
        Err(CknError::LedgerCorrupt { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn report_writes_table_summary_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.jsonl");
    let ctx = RunContext::with_ledger(&ledger);
    run_experiment(&write(dir.path(), "c.toml", CONSTANTS), &ctx).unwrap();
    let mut slope = ExperimentConfig::with_defaults(
        Operation::SlopeFit,
        Some(ParamTuple {
            n: 3,
            p: 2.0,
            a: 0.0,
            b: 0.0,
        }),
        None,
    );
    slope.id = "slope".into();
    slope.settings.eps_count = Some(4);
    slope.tol_profile = ckn_lab::experiment::TolProfile::Fast;
    run_config(slope, dir.path(), &ctx).unwrap();

    let out = dir.path().join("rep");
    let files = report(&ledger, "", &out).unwrap();
    assert_eq!(files.records, 2);
    assert_eq!(files.plots, vec![out.join("slope_plot.csv")]);
    let plot = std::fs::read_to_string(&files.plots[0]).unwrap();
    assert_eq!(plot.lines().count(), 5);
    assert!(plot.starts_with("x,y\n"));
    let summary = std::fs::read_to_string(&files.summary).unwrap();
    assert!(summary.contains("constants-3d") && summary.contains("exponent_slope_fit"));

    let only = report(&ledger, "operation=sharp_constant", &dir.path().join("rep2")).unwrap();
    assert_eq!(only.records, 1);
    assert!(only.plots.is_empty());
    let table = std::fs::read_to_string(only.table).unwrap();
    assert!(table.lines().skip(1).all(|l| l.starts_with("constants-3d,sharp_constant,params,")));
    assert!(matches!(report(&ledger, "colour=red", &out), Err(CknError::Config { .. })));
}

#[test]
fn config_round_trips_through_toml() {
    for path in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/acceptance")).unwrap() {
        let path = path.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        assert_eq!(cfg.to_toml().unwrap(), again.to_toml().unwrap());
    }
}

#[test]
fn snapshot_fields_are_loaded_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let prm = derive_params(4, 2.5, 0.2, 0.5).unwrap();
    let grid = std::sync::Arc::new(RadialGrid::new(-20.0, 20.0, 256).unwrap());
    let v = Bubble::canonical(&prm, 1.0).unwrap().field(&prm, &grid, None).unwrap();
    save_snapshot(&v, &dir.path().join("v.field")).unwrap();
    let mut cfg = ExperimentConfig::minimal("snap", Operation::TransformCheck);
    cfg.params.push(ParamTuple {
        n: 4,
        p: 2.5,
        a: 0.2,
        b: 0.5,
    });
    cfg.grid.t_min = Some(-20.0);
    cfg.grid.t_max = Some(20.0);
    cfg.grid.count = Some(256);
    cfg.fields.push(FieldSpec::Snapshot { path: "v.field".into() });
    let rec = run_config(cfg.clone(), dir.path(), &RunContext::default()).unwrap();
    assert!(rec.outputs["max_q_norm_residual"].as_real().unwrap() <= 1e-12);

    cfg.grid.count = Some(128);
    assert!(matches!(
        run_config(cfg, dir.path(), &RunContext::default()),
        Err(CknError::GridMismatch(_))
    ));
}
