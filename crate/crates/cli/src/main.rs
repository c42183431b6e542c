use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rydgate_cli::commands::{self, Scenario};
use rydgate_cli::config::{Format, RunConfig};
use rydgate_cli::output::{emit, Meta, Report};
use rydgate_cli::Result;

#[derive(Parser, Debug)]
#[command(name = "rydgate", version, about = "Rydberg blockade gate phases, calibration and scans")]
struct Args {
    /// JSON run configuration; the reference operating point if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fit beam powers to measured Ramsey and Rabi frequencies.
    Calibrate,
    /// Gate phases, constituents and the C_Z matrix.
    Phases,
    /// Bell state, parity curve and fidelity.
    Bell,
    /// Fidelity map over fractional power and detuning changes.
    Scan,
    /// Schrödinger-equation runs.
    Simulate {
        #[arg(long, value_enum, default_value = "gate")]
        scenario: Scenario,
    },
    /// C_X eye diagram.
    Eye,
}

fn run(args: &Args) -> Result<()> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let report: Report = match &args.cmd {
        Cmd::Calibrate => commands::cmd_calibrate(&cfg)?,
        Cmd::Phases => commands::cmd_phases(&cfg)?,
        Cmd::Bell => commands::cmd_bell(&cfg, args.seed)?,
        Cmd::Scan => commands::cmd_scan(&cfg)?,
        Cmd::Simulate { scenario } => commands::cmd_simulate(&cfg, *scenario)?,
        Cmd::Eye => commands::cmd_eye(&cfg)?,
    };
    let meta = Meta::new(&report.command, &cfg.hash(), args.seed);
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let files = emit(&report, &meta, &dir, args.format.unwrap_or(cfg.output.format))?;
    print!("{}", report.summary());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
