use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use medrelax::runner::{self, ExperimentConfig, Fault, Pipeline, RunOverrides, VerifyOptions};
use medrelax::Error;

#[derive(Parser)]
#[command(
    name = "medrelax",
    version,
    about = "Free-energy relaxations and Petz rounding on small spin lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exact-diagonalization cap in qubits; not checked against available memory.
    #[arg(long)]
    max_sites: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline named in an experiment file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decay and CMI scans over the models of an experiment file.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the bound-verification suite on the built-in corpus.
    Verify {
        /// Check family or name prefix, e.g. `petz` or `med.exact`.
        #[arg(long)]
        filter: Option<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    CorruptMarginal,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Toml(_) => 2,
        Error::SizeCap { .. } => 3,
        _ => 1,
    }
}

fn run_config(config: PathBuf, common: Common, force: Option<Pipeline>) -> Result<u8, Error> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(p) = force {
        cfg.pipeline = p;
    }
    let ov = RunOverrides {
        seed: common.seed,
        out: common.out,
        max_sites: common.max_sites,
    };
    let outcome = runner::run(&cfg, &ov)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    if !outcome.unconverged.is_empty() {
        eprintln!(
            "solver did not converge at: {}",
            outcome.unconverged.join(", ")
        );
        return Ok(4);
    }
    if outcome.failed_rows > 0 {
        eprintln!("{} rows failed their bound", outcome.failed_rows);
        return Ok(1);
    }
    Ok(0)
}

fn verify(filter: Option<String>, common: Common, fault: Option<FaultArg>) -> Result<u8, Error> {
    let mut opts = VerifyOptions {
        seed: common.seed.unwrap_or(0),
        filter,
        fault: fault.map(|FaultArg::CorruptMarginal| Fault::CorruptMarginal),
        ..Default::default()
    };
    if let Some(n) = common.max_sites {
        opts.max_sites = n;
    }
    let summary = runner::verify_suite(&opts)?;
    if summary.checks.is_empty() {
        return Err(Error::Config(format!("no check matches {:?}", opts.filter)));
    }
    for c in &summary.checks {
        println!("{}", c.verdict());
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from("out/verify"));
    std::fs::create_dir_all(&out)?;
    let csv = out.join("verify.csv");
    std::fs::write(&csv, summary.to_csv())?;
    runner::write_manifest(&out, "verify", opts.seed, &[csv])?;
    Ok(if summary.all_passed() { 0 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, common } => run_config(config, common, None),
        Command::Scan { config, common } => run_config(config, common, Some(Pipeline::Scans)),
        Command::Verify {
            filter,
            common,
            inject_fault,
        } => verify(filter, common, inject_fault),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
