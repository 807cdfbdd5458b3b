use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use locq::config::{ConfigError, ExperimentConfig};
use locq::runner::{self, RunError, EXIT_OK};
use locq::suites;

#[derive(Parser)]
#[command(
    name = "locq",
    version,
    about = "Projected-ensemble certification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `out`, else out/<kind>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Basic certification protocol.
    Certify(RunArgs),
    /// Fully-inseparable entanglement from one dataset.
    Inseparable(RunArgs),
    /// Fidelity certification via the fidelity observable.
    Fidelity(RunArgs),
    /// Circuit-complexity certification.
    Complexity(RunArgs),
    /// Localizable magic over Clifford-scrambled injection states.
    MagicScan(RunArgs),
    /// Pair localizable entanglement across a spin-chain parameter.
    HamScan(RunArgs),
    /// Truncated fidelity-observable gaps.
    GapScan(RunArgs),
    /// Runs property suites (all when none are named).
    Verify {
        suites: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also runs a property-suite config.
        #[arg(long, conflicts_with = "suites")]
        config: Option<PathBuf>,
        /// Writes the results as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Certify(a) => ("certify", a),
        Command::Inseparable(a) => ("fully-inseparable", a),
        Command::Fidelity(a) => ("fidelity-cert", a),
        Command::Complexity(a) => ("complexity-cert", a),
        Command::MagicScan(a) => ("magic-scan", a),
        Command::HamScan(a) => ("hamiltonian-scan", a),
        Command::GapScan(a) => ("gap-scan", a),
        Command::Verify {
            suites,
            seed,
            config,
            out,
            workers,
        } => {
            return exit(verify(
                suites,
                seed,
                config.as_deref(),
                out.as_deref(),
                workers,
            ));
        }
    };
    exit(run(kind, &args).map(|_| EXIT_OK))
}

fn exit(r: Result<i32, RunError>) -> ExitCode {
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load(path: &Path, kind: &str) -> Result<ExperimentConfig, RunError> {
    let cfg = ExperimentConfig::load(path)?;
    if cfg.experiment.kind() != kind {
        return Err(ConfigError {
            path: path.display().to_string(),
            key: "experiment.kind".into(),
            message: format!(
                "{:?} cannot run under this subcommand (expected {kind:?})",
                cfg.experiment.kind()
            ),
        }
        .into());
    }
    Ok(cfg)
}

fn run(kind: &str, args: &RunArgs) -> Result<(), RunError> {
    let mut cfg = load(&args.config, kind)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let origin = args.config.display().to_string();
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| runner::default_out_dir(&cfg));
    let art = runner::execute_with_workers(&cfg, &origin, args.workers)?;
    let written = art.write(&dir).map_err(|e| RunError::Runtime {
        path: origin,
        key: "out".into(),
        source: e.into(),
    })?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn verify(
    names: Vec<String>,
    seed: u64,
    config: Option<&Path>,
    out: Option<&Path>,
    workers: Option<usize>,
) -> Result<i32, RunError> {
    let (names, seed) = match config {
        Some(path) => {
            let cfg = load(path, "property-suite")?;
            let locq::config::Experiment::PropertySuite(p) = cfg.experiment else {
                unreachable!()
            };
            (p.suites, cfg.seed)
        }
        None => (names, seed),
    };
    let origin = config.map_or("verify".to_string(), |p| p.display().to_string());
    let names = suites::resolve(&names).map_err(|e| {
        RunError::Config(ConfigError {
            path: origin.clone(),
            key: "suites".into(),
            message: e.to_string(),
        })
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .expect("thread pool");
    let mut results = Vec::new();
    for name in &names {
        let r = pool
            .install(|| suites::run_suite(name, seed))
            .map_err(|e| RunError::Runtime {
                path: origin.clone(),
                key: name.clone(),
                source: e,
            })?;
        println!("{}", r.line());
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!(
        "{} of {} suites passed",
        results.len() - failed,
        results.len()
    );
    if let Some(dir) = out {
        let body = serde_json::json!({ "locq": locq::VERSION, "seed": seed, "suites": results });
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("verify.json"), serde_json::to_vec_pretty(&body)?)
        };
        write().map_err(|e| RunError::Runtime {
            path: origin,
            key: "out".into(),
            source: e.into(),
        })?;
    }
    Ok(if failed == 0 { EXIT_OK } else { 1 })
}
