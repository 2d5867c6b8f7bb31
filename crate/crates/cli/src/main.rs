//! Experiment driver: grows chains, tabulates exact energies, and compares
//! predictor legs, writing CSV traces plus a machine-readable summary.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idmrg_core::engine::{EngineError, IdmrgRun, StepRecord};
use idmrg_core::model::ModelSpec;
use idmrg_core::oracle;

use config::{format_float, parse_config, predictor_name, CliConfig};

const STEP_HEADER: &str = "two_n,energy,energy_per_site_est,trunc_err_left,trunc_err_right,fidelity_error,lanczos_iterations,m_kept_left,m_kept_right,degeneracy_flag,predictor_fallback_flag";

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "idmrg", about = "Ground-state growth for dimerized spin-1/2 chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow the chain and write the per-step CSV trace plus a summary.
    Idmrg(CommonArgs),
    /// Exact-diagonalization energy table for small chains.
    Ed(CommonArgs),
    /// Run two predictor legs over the same growth and tabulate their
    /// fidelity errors and iteration counts side by side.
    CompareFidelity(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: std::path::PathBuf,
    /// Override a configuration key, e.g. --set delta=0.1 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

type CommandFn = fn(&CliConfig) -> Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run_fn): (&CommonArgs, CommandFn) = match &cli.command {
        Command::Idmrg(a) => (a, cmd_idmrg),
        Command::Ed(a) => (a, cmd_ed),
        Command::CompareFidelity(a) => (a, cmd_compare),
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = match parse_config(&text, &args.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_fn(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

enum Failure {
    Io(std::io::Error),
    Numerical(EngineError),
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure::Numerical(e)
    }
}

fn open_writer(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path)?))
}

fn step_row(r: &StepRecord<f64>) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.two_n,
        format_float(r.energy),
        format_float(r.energy_per_site_est),
        format_float(r.trunc_err_left),
        format_float(r.trunc_err_right),
        r.fidelity_error.map(format_float).unwrap_or_default(),
        r.lanczos_iterations,
        r.m_kept_left,
        r.m_kept_right,
        u8::from(r.degeneracy_flag),
        u8::from(r.predictor_fallback_flag),
    )
}

fn cmd_idmrg(cfg: &CliConfig) -> Result<(), Failure> {
    let mut out = open_writer(&cfg.output_path)?;
    writeln!(out, "{STEP_HEADER}")?;
    out.flush()?;

    let mut run = IdmrgRun::new(cfg.run.clone())?;
    let mut last: Option<StepRecord<f64>> = None;
    let mut io_error: Option<std::io::Error> = None;
    while !run.is_done() {
        let record = run.step()?;
        if let Err(e) = writeln!(out, "{}", step_row(&record)).and_then(|()| out.flush()) {
            io_error = Some(e);
            break;
        }
        last = Some(record);
    }
    if let Some(e) = io_error {
        return Err(Failure::Io(e));
    }

    let mut summary = open_writer(&cfg.summary_path())?;
    if let Some(r) = &last {
        writeln!(summary, "final_two_n = {}", r.two_n)?;
        writeln!(summary, "final_energy = {}", format_float(r.energy))?;
        writeln!(
            summary,
            "final_energy_per_site_est = {}",
            format_float(r.energy_per_site_est)
        )?;
    }
    writeln!(summary, "steps = {}", run.records().len())?;
    for (key, value) in cfg.echo() {
        writeln!(summary, "{key} = {value}")?;
    }
    summary.flush()?;
    Ok(())
}

fn cmd_ed(cfg: &CliConfig) -> Result<(), Failure> {
    let spec = ModelSpec::new(cfg.run.j, cfg.run.delta)
        .map_err(|e| Failure::Numerical(EngineError::Model(e)))?;
    let cap = cfg.run.two_n_max.min(oracle::MAX_ED_SITES);
    let mut out = open_writer(&cfg.output_path)?;
    writeln!(out, "two_n,energy")?;
    let mut two_n = 2;
    while two_n <= cap {
        let (energy, _) = oracle::ed_ground(&spec, two_n).map_err(numerical)?;
        writeln!(out, "{two_n},{}", format_float(energy))?;
        out.flush()?;
        two_n += 2;
    }
    Ok(())
}

fn numerical(e: oracle::OracleError) -> Failure {
    match e {
        oracle::OracleError::Numerics(n) => Failure::Numerical(EngineError::Numerics(n)),
        other => Failure::Numerical(EngineError::Numerics(
            idmrg_core::numerics::NumericsError::DimensionMismatch {
                context: other.to_string(),
            },
        )),
    }
}

fn cmd_compare(cfg: &CliConfig) -> Result<(), Failure> {
    let secondary_kind = cfg.compare_predictor;
    let mut secondary_cfg = cfg.run.clone();
    secondary_cfg.predictor = secondary_kind;

    // Sequential legs for deterministic logs.
    let (primary, _) = idmrg_core::engine::idmrg_run(cfg.run.clone())?;
    let (secondary, _) = idmrg_core::engine::idmrg_run(secondary_cfg)?;

    let mut out = open_writer(&cfg.output_path)?;
    writeln!(
        out,
        "two_n,fidelity_error_primary,lanczos_iterations_primary,fidelity_error_secondary,lanczos_iterations_secondary"
    )?;
    for (p, s) in primary.iter().zip(&secondary) {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.two_n,
            p.fidelity_error.map(format_float).unwrap_or_default(),
            p.lanczos_iterations,
            s.fidelity_error.map(format_float).unwrap_or_default(),
            s.lanczos_iterations,
        )?;
    }
    out.flush()?;

    let mut summary = open_writer(&cfg.summary_path())?;
    writeln!(summary, "primary_predictor = {}", predictor_name(cfg.run.predictor))?;
    writeln!(summary, "secondary_predictor = {}", predictor_name(secondary_kind))?;
    let totals = |recs: &[StepRecord<f64>]| -> usize {
        recs.iter().map(|r| r.lanczos_iterations).sum()
    };
    writeln!(summary, "primary_total_iterations = {}", totals(&primary))?;
    writeln!(summary, "secondary_total_iterations = {}", totals(&secondary))?;
    for (key, value) in cfg.echo() {
        writeln!(summary, "{key} = {value}")?;
    }
    summary.flush()?;
    Ok(())
}
