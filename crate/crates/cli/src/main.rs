use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pulsefront::experiment::{
    emit_check, emit_predictions, emit_report, run_check, run_predictions, run_sweep, LoadedConfig,
    Overrides, Verdict,
};

#[derive(Parser)]
#[command(
    name = "pulsefront",
    version,
    about = "Front-speed sweeps and sign predictions for two competing species"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the sweep, join it with the predictions and write reports.
    Run(Common),
    /// Threshold profiles and sign predictions only (no simulation).
    Predict(Common),
    /// Audit the reaction hypotheses and the existence conditions.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "PULSEFRONT_OUT", default_value = "pulsefront_out")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Grid nodes per period.
    #[arg(long)]
    resolution: Option<usize>,
    /// Initial integration horizon.
    #[arg(long)]
    horizon: Option<f64>,
}

fn print_verdicts(verdicts: &[Verdict]) -> bool {
    for v in verdicts {
        println!(
            "{} {}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    verdicts.iter().all(|v| v.passed)
}

fn execute(cmd: Command) -> pulsefront::Result<bool> {
    let (Command::Run(c) | Command::Predict(c) | Command::Check(c)) = &cmd;
    let loaded = LoadedConfig::load(&c.config)?.with_overrides(Overrides {
        workers: c.workers,
        resolution: c.resolution,
        horizon: c.horizon,
    });
    println!("config {} sha256 {}", c.config.display(), loaded.hash);
    let passed = match cmd {
        Command::Run(_) => {
            let mut report = run_sweep(&loaded)?;
            emit_report(&mut report, &loaded.source, &c.out)?;
            print_verdicts(&report.verdicts)
        }
        Command::Predict(_) => {
            let report = run_predictions(&loaded)?;
            emit_predictions(&report, &loaded.source, &c.out)?;
            for r in &report.reports {
                println!(
                    "d={} alpha={} ratio={:.6} R0=[{:.6}, {:.6}] integral={:.6e} predicted={}",
                    r.d,
                    r.alpha,
                    r.ratio,
                    r.r0_interval.0,
                    r.r0_interval.1,
                    r.integral,
                    r.predicted.label()
                );
            }
            print_verdicts(&report.verdicts)
        }
        Command::Check(_) => {
            let report = run_check(&loaded)?;
            emit_check(&report, &loaded.source, &c.out)?;
            print_verdicts(&report.verdicts)
        }
    };
    println!("outputs in {}", c.out.display());
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
