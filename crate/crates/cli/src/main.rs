use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use serde::Serialize;

use qg2p_cli::commands::{self, parse_window, Overrides};
use qg2p_cli::config::RunConfig;
use qg2p_cli::CliError;
use qg2p_core::symmetry::Sector;

#[derive(Parser, Debug)]
#[command(name = "qg2p", version, about = "Two-particle Laplacians on compact metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the graph, vertex conditions and boundary map.
    Validate(Common),
    /// Compute the lowest eigenvalues; writes eigenvalues.csv and spectrum.json.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Also write the assembled matrices in coordinate format to this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Spectrum plus Weyl fit, heat traces, bracketing and lift checks.
    Analyze(Common),
    /// Solve the delta-interaction example and unfold its ground state.
    ExampleDelta(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mesh_h: Option<f64>,
    #[arg(long)]
    num_eigs: Option<usize>,
    #[arg(long, value_parser = parse_sector)]
    sector: Option<Sector>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weyl fit window as lo:hi.
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
}

fn parse_sector(s: &str) -> Result<Sector, String> {
    s.parse().map_err(|e: qg2p_core::Error| e.to_string())
}

impl Common {
    fn load(&self, fallback: Option<RunConfig>) -> Result<RunConfig, CliError> {
        let mut cfg = match (&self.config, fallback) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(cfg)) => cfg,
            (None, None) => return Err(CliError::Config("--config is required".into())),
        };
        Overrides {
            mesh_h: self.mesh_h,
            num_eigs: self.num_eigs,
            sector: self.sector,
            window: self.window,
            out: self.out.clone(),
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Validate(c) => {
            let report = commands::validate(&c.load(None)?)?;
            print(&report);
            Ok(report.ok)
        }
        Command::Spectrum { common, dump } => {
            let summary = commands::spectrum(&common.load(None)?, dump.as_deref())?;
            print(&summary);
            Ok(true)
        }
        Command::Analyze(c) => {
            let report = commands::analyze(&c.load(None)?)?;
            print(&report.claims);
            Ok(report.passed())
        }
        Command::ExampleDelta(c) => {
            let report = commands::example_delta(&c.load(Some(commands::example_config()))?)?;
            print(&report);
            Ok(report.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            error!("{e}");
            eprintln!("qg2p: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
