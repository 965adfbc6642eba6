//! `delaybound`: exact delay bounds for consensus networks.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Overrides};
use config::ProblemConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "delaybound", version, about = "Exact delay stability bounds for multi-agent consensus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Upper end of the analyzed delay range, in seconds.
    #[arg(long, global = true)]
    tau_max: Option<f64>,
    /// Tolerance for accepting a root as lying on the unit circle.
    #[arg(long, global = true)]
    tol_unit_circle: Option<f64>,
    /// Seed for the default initial states.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Crossing table, NU(tau) steps and the delay bound.
    Analyze,
    /// Simulate the network at one delay and classify the response.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        tau: f64,
    },
    /// Compare predicted stability with simulation verdicts.
    Sweep {
        /// Comma-separated delays; overrides the config sweep section.
        #[arg(long, allow_hyphen_values = true)]
        tau_list: Option<String>,
    },
}

fn parse_tau_list(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| CliError::Config(format!("bad delay {s:?} in --tau-list: {e}"))))
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = ProblemConfig::load(&path)?;
    commands::ensure_out_dir(&cli.out)?;
    let ctx = Context {
        config,
        overrides: Overrides {
            tau_max: cli.tau_max,
            unit_circle_tol: cli.tol_unit_circle,
            seed: cli.seed,
        },
        out: cli.out,
    };
    match cli.command {
        Command::Analyze => {
            let map = commands::analyze(&ctx)?;
            let bound = output::csv_num(map.delay_bound.as_f64());
            match map.binding_lambda {
                Some(l) => println!("delay bound {bound} s (binding lambda {})", output::csv_num(l)),
                None => println!("delay bound {bound} s"),
            }
            println!("NU(0) = {}, {} stable pocket(s)", map.nu_at_zero, map.stable_pockets.len());
        }
        Command::Simulate { tau } => {
            let o = commands::simulate(&ctx, tau)?;
            println!("tau {tau}: {} (envelope ratio {})", o.verdict, output::csv_num(o.envelope_ratio));
        }
        Command::Sweep { tau_list } => {
            let taus = match tau_list {
                Some(list) => parse_tau_list(&list)?,
                None => ctx.config.sweep.delays(),
            };
            let rows = commands::sweep(&ctx, &taus)?;
            println!("{:>12}  {:>4}  {:>9}  {:>9}  consistent", "tau", "NU", "predicted", "verdict");
            for r in &rows {
                println!(
                    "{:>12}  {:>4}  {:>9}  {:>9}  {}",
                    output::csv_num(r.tau),
                    r.predicted_nu,
                    r.predicted.as_str(),
                    r.verdict.as_str(),
                    if r.consistent() { "yes" } else { "no" }
                );
            }
            let ok = rows.iter().filter(|r| r.consistent()).count();
            println!("{ok}/{} consistent", rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("delaybound: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
