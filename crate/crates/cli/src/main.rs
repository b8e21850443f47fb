use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use paramp_core::power::{ConversionUnits, PowerSpec};
use paramp_core::scenario::presets::{preset_names, preset_value};
use paramp_core::scenario::runner::power_report;
use paramp_core::scenario::{exit_code_for, run_scenario, RunOverrides, RunSummary, Scenario};
use paramp_core::Error;

#[derive(Parser)]
#[command(name = "paramp-sim", version, about = "Spin-ensemble parametric amplifier simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario document.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a built-in preset.
    Preset {
        /// One of fig2, fig3a, fig3b, fig4, fig5, noise300k, bandwidth, room-epr.
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Print the preset document instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Convert between drive power and modulation amplitude.
    Power {
        /// Conversion factor, mT/√W or Hz/√W depending on --units.
        #[arg(long)]
        cp: f64,
        #[arg(long, value_enum)]
        units: Units,
        #[arg(long, conflicts_with = "lambda_hz", required_unless_present = "lambda_hz")]
        watts: Option<f64>,
        /// Target modulation amplitude Λ/2π in Hz.
        #[arg(long)]
        lambda_hz: Option<f64>,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Mt,
    Hz,
}

fn report(summary: &RunSummary) {
    println!(
        "{}: {} ({} rows, {} failed) -> {}",
        summary.name,
        format!("{:?}", summary.status).to_lowercase(),
        summary.rows,
        summary.failed_rows,
        summary.output_dir.display()
    );
    for p in &summary.outputs {
        println!("  {}", p.display());
    }
    println!("  {}", summary.manifest.display());
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code_for(e) as u8)
}

fn run(sc: Result<Scenario, Error>, overrides: RunOverrides) -> ExitCode {
    match sc.and_then(|sc| run_scenario(&sc, &overrides)) {
        Ok(s) => {
            report(&s);
            ExitCode::from(s.status.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            tol,
        } => run(
            Scenario::from_path(&config),
            RunOverrides {
                output_dir: out,
                workers,
                rel_tol: tol,
            },
        ),
        Command::Preset {
            name,
            out,
            workers,
            tol,
            show,
        } => {
            if show {
                return match preset_value(&name) {
                    Ok(v) => {
                        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                        ExitCode::SUCCESS
                    }
                    Err(e) => fail(&e),
                };
            }
            let doc = serde_json::json!({ "preset": name });
            run(
                Scenario::from_value(doc),
                RunOverrides {
                    output_dir: out,
                    workers,
                    rel_tol: tol,
                },
            )
        }
        Command::Power {
            cp,
            units,
            watts,
            lambda_hz,
        } => {
            let units = match units {
                Units::Mt => ConversionUnits::Mt,
                Units::Hz => ConversionUnits::Hz,
            };
            match power_report(&PowerSpec::new(cp, units), watts, lambda_hz) {
                Ok(v) => {
                    println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Presets => {
            for n in preset_names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
    }
}
