use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ckn_lab::experiment::config::{ExperimentConfig, HatTuple, Operation, ParamTuple, TolProfile};
use ckn_lab::experiment::{report, run_config, OutputValue, ResultRecord, RunContext};
use ckn_lab::{CknError, Result};

#[derive(Parser)]
#[command(name = "ckn", version, about = "Run CKN-inequality experiments and keep a results ledger")]
struct Cli {
    /// Experiment config (TOML); inline parameters are ignored when given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Results ledger (JSON lines, append-only).
    #[arg(long, global = true, env = "CKN_LEDGER", default_value = "ledger.jsonl")]
    ledger: PathBuf,
    /// Directory for CSV side products and reports.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for scans (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    tol_profile: Option<TolProfile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Inline {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct HatInline {
    #[command(flatten)]
    base: Inline,
    /// Target weights of the hat map.
    #[arg(long)]
    a2: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sharp constant, Rayleigh quotient of the extremal and the k-ratio law.
    Constants(Inline),
    /// Change-of-variables identities.
    TransformCheck(Inline),
    /// Distance to the extremal manifold and deficit.
    Project(Inline),
    /// Stability ratios over a perturbation family.
    StabilityScan(Inline),
    /// Deficit-versus-distance exponent.
    SlopeFit(Inline),
    /// Hat-map monotonicity chain.
    ChainCheck(HatInline),
    /// Bounded-domain embedding constant.
    EmbeddingCheck(Inline),
    /// Hessian ratio on tangent-orthogonal probes.
    SpectralGap(Inline),
    /// Residual, Q and N scalings near the manifold.
    Thm5(Inline),
    /// Residual-versus-distance alternative for given constants.
    AltCheck(Inline),
    /// Elementary inequality constants.
    IneqConst {
        #[arg(long)]
        case: Option<u8>,
        #[arg(long)]
        exponent: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Tables and plot data from the ledger.
    Report {
        /// `key=value[,key=value]` over id, module, operation, passed.
        #[arg(long, default_value = "")]
        filter: String,
    },
    /// Run whatever operation the config names.
    Run,
}

fn inline_tuple(i: &Inline) -> Result<Option<ParamTuple>> {
    match (i.n, i.p, i.a, i.b) {
        (None, None, None, None) => Ok(None),
        (Some(n), Some(p), a, b) => Ok(Some(ParamTuple {
            n,
            p,
            a: a.unwrap_or(0.0),
            b: b.unwrap_or(0.0),
        })),
        (None, ..) => Err(CknError::config("n", "missing --n")),
        _ => Err(CknError::config("p", "missing --p")),
    }
}

fn build_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let (op, inline, hat) = match &cli.command {
        Command::Report { .. } => return Ok(None),
        Command::Run => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| CknError::config("config", "`run` needs --config"))?;
            return ExperimentConfig::load(path).map(Some);
        }
        Command::Constants(i) => (Operation::Constants, i.clone(), None),
        Command::TransformCheck(i) => (Operation::TransformCheck, i.clone(), None),
        Command::Project(i) => (Operation::Project, i.clone(), None),
        Command::StabilityScan(i) => (Operation::StabilityScan, i.clone(), None),
        Command::SlopeFit(i) => (Operation::SlopeFit, i.clone(), None),
        Command::ChainCheck(h) => (Operation::ChainCheck, Inline::default(), Some(h.clone())),
        Command::EmbeddingCheck(i) => (Operation::EmbeddingCheck, i.clone(), None),
        Command::SpectralGap(i) => (Operation::SpectralGap, i.clone(), None),
        Command::Thm5(i) => (Operation::Thm5, i.clone(), None),
        Command::AltCheck(i) => (Operation::AltCheck, i.clone(), None),
        Command::IneqConst { .. } => (Operation::IneqConst, Inline::default(), None),
    };
    if let Some(path) = &cli.config {
        let cfg = ExperimentConfig::load(path)?;
        if cfg.operation != op {
            return Err(CknError::config(
                "operation",
                format!("config runs {:?} but the subcommand is {:?}", cfg.operation.name(), op.name()),
            ));
        }
        return Ok(Some(cfg));
    }
    let hat = match hat {
        Some(h) => match (inline_tuple(&h.base)?, h.a2, h.b2) {
            (Some(t), Some(a2), Some(b2)) => Some(HatTuple {
                n: t.n,
                p: t.p,
                a1: t.a,
                b1: t.b,
                a2,
                b2,
            }),
            _ => return Err(CknError::config("hat", "chain-check needs --n --p --a --b --a2 --b2")),
        },
        None => None,
    };
    let mut cfg = ExperimentConfig::with_defaults(op, inline_tuple(&inline)?, hat);
    if let Command::IneqConst {
        case,
        exponent,
        samples,
    } = &cli.command
    {
        if let (Some(c), Some(e)) = (case, exponent) {
            cfg.settings.cases = Some(vec![*c]);
            cfg.settings.exponents = Some(vec![vec![*e]]);
        }
        cfg.settings.samples = samples.or(cfg.settings.samples);
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

fn print_record(r: &ResultRecord) {
    println!("id {}  {}::{}  passed {}", r.id, r.module, r.operation, r.passed);
    println!("inputs_digest {}", r.inputs_digest);
    println!("outputs_digest {}", r.outputs_digest);
    for (k, v) in &r.outputs {
        match v {
            OutputValue::List(xs) if xs.len() > 8 => println!("  {k} [{} values]", xs.len()),
            _ => println!("  {k} {}", v.entries().join(" ")),
        }
    }
    for c in &r.checks {
        println!("  check {} {} ({})", c.name, if c.passed { "ok" } else { "FAILED" }, c.bound);
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CknError::config("threads", e.to_string()))?;
    }
    if let Command::Report { filter } = &cli.command {
        let files = report(&cli.ledger, filter, &cli.out)?;
        println!("{} records", files.records);
        println!("table {}", files.table.display());
        println!("summary {}", files.summary.display());
        for p in files.plots {
            println!("plot {}", p.display());
        }
        return Ok(());
    }
    let cfg = build_config(cli)?.expect("non-report command has a config");
    let base = cli
        .config
        .as_ref()
        .and_then(|p| p.parent().map(|d| d.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = RunContext {
        ledger: Some(cli.ledger.clone()),
        output_dir: Some(cli.out.clone()),
        seed: cli.seed,
        tol_profile: cli.tol_profile,
    };
    let record = run_config(cfg, &base, &ctx)?;
    print_record(&record);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
