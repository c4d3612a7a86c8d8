mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Ctx, ModelArgs, ModelOp};
use config::{Ini, RunConfig};
use error::{CliError, CliResult};
use output::Sink;

/// Self-cascode PTAT current reference modeling, sizing and benchmarking.
#[derive(Parser)]
#[command(name = "scmref", version)]
struct Cli {
    /// INI run configuration.
    #[arg(long, global = true, value_name = "path")]
    config: Option<PathBuf>,
    /// Write outputs as files under this directory instead of stdout.
    #[arg(long, global = true, value_name = "dir")]
    out: Option<PathBuf>,
    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    #[value(name = "acm_f")]
    AcmF,
    #[value(name = "isq")]
    Isq,
    #[value(name = "delta_vt")]
    DeltaVt,
}

#[derive(Subcommand)]
enum Command {
    /// Device-model curves.
    Model {
        #[arg(long, value_enum, default_value = "acm_f")]
        op: Op,
        /// Inversion-level grid (lo:hi:step or a comma list).
        #[arg(long = "if", value_name = "grid", allow_hyphen_values = true)]
        if_grid: Option<String>,
        /// Temperature grid in degC.
        #[arg(long = "T", value_name = "grid", allow_hyphen_values = true)]
        t_grid: Option<String>,
        /// Body-source voltage grid in V.
        #[arg(long, value_name = "grid", allow_hyphen_values = true)]
        vbs: Option<String>,
        /// Device flavor; defaults to the first one defined.
        #[arg(long)]
        flavor: Option<String>,
    },
    /// I_REF(T) of the configured design.
    Simulate,
    /// 1D or 2D parameter map in long format.
    Sweep,
    /// Four-step sizing flow.
    Size,
    /// Exhaustive calibration-code search.
    Calibrate,
    /// Box-method TC and LS of measured or simulated data.
    Metrics {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Rank references by figure of merit; the bundled survey by default.
    Fom { files: Vec<PathBuf> },
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::new(Ini::load(p)?)?,
        None => RunConfig::empty(),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from));
    let ctx = Ctx {
        cfg,
        sink: Sink {
            dir,
            quiet: cli.quiet,
        },
    };
    let needs_config = matches!(
        cli.command,
        Command::Simulate | Command::Sweep | Command::Size | Command::Calibrate
    );
    if needs_config && cli.config.is_none() {
        return Err(CliError::config("this command needs --config <path>"));
    }
    match cli.command {
        Command::Model {
            op,
            if_grid,
            t_grid,
            vbs,
            flavor,
        } => commands::model(
            &ctx,
            &ModelArgs {
                op: match op {
                    Op::AcmF => ModelOp::AcmF,
                    Op::Isq => ModelOp::Isq,
                    Op::DeltaVt => ModelOp::DeltaVt,
                },
                if_grid,
                t_grid,
                vbs_grid: vbs,
                flavor,
            },
        ),
        Command::Simulate => commands::simulate(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Size => commands::size(&ctx),
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Metrics { files } => commands::metrics(&ctx, &files),
        Command::Fom { files } => commands::fom(&ctx, &files),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
