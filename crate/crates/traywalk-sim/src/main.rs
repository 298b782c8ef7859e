use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use traywalk_sim::harness::{run_scenario, PlantMode};
use traywalk_sim::logio::{emit_outputs, EmitFormat, RunLog};
use traywalk_sim::scenario::Scenario;
use traywalk_sim::validate::validate_log;

#[derive(Parser)]
#[command(name = "traywalk", version, about = "Tray-walking scenario runner and log tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing log.json and CSV outputs into --out.
    Run {
        /// Scenario TOML file.
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = PlantArg::Kinematic)]
        plant: PlantArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Recorded in the log; runs are deterministic per seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-check a run log independently of the controller code paths.
    Validate {
        /// log.json produced by `run`.
        log: PathBuf,
    },
    /// Re-emit plot-ready outputs from an existing log.
    Emit {
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Output directory, defaults to the log's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlantArg {
    Kinematic,
    Dynamic,
}

impl From<PlantArg> for PlantMode {
    fn from(p: PlantArg) -> Self {
        match p {
            PlantArg::Kinematic => PlantMode::Kinematic,
            PlantArg::Dynamic => PlantMode::Dynamic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for EmitFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => EmitFormat::Csv,
            FormatArg::Json => EmitFormat::Json,
        }
    }
}

fn cmd_run(scenario: &PathBuf, plant: PlantArg, out: &PathBuf, seed: u64) -> Result<ExitCode> {
    let s = Scenario::load(scenario)
        .with_context(|| format!("loading scenario {}", scenario.display()))?;
    let log = run_scenario(&s, plant.into(), seed)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let log_path = out.join("log.json");
    log.write_json(&log_path)?;
    emit_outputs(&log, out, EmitFormat::Csv)?;
    println!(
        "run {}: {} ticks, min h_path {:.6e}, final error {:.4} m, {} replans -> {}",
        s.name,
        log.summary.ticks,
        log.summary.min_h_path,
        log.summary.final_pos_error,
        log.summary.replan_count,
        log_path.display()
    );
    if log.summary.aborted {
        for e in &log.errors {
            eprintln!("error at t={:.4}: {}", e.t, e.message);
        }
        eprintln!("run aborted; partial log written");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(log_path: &PathBuf) -> Result<ExitCode> {
    let log = RunLog::read_json(log_path)?;
    let report = validate_log(&log);
    print!("{report}");
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_emit(log_path: &PathBuf, format: FormatArg, out: &Option<PathBuf>) -> Result<ExitCode> {
    let log = RunLog::read_json(log_path)?;
    let dir = match out {
        Some(d) => d.clone(),
        None => log_path.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    };
    let files = emit_outputs(&log, &dir, format.into())?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, plant, out, seed } => cmd_run(scenario, *plant, out, *seed),
        Command::Validate { log } => cmd_validate(log),
        Command::Emit { log, format, out } => cmd_emit(log, *format, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
