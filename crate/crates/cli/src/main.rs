use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sentinel_core::harness::{self, aggregate, HarnessError, SUMMARY_COLUMNS};
use sentinel_core::presets::{preset_toml, PRESET_NAMES};
use sentinel_core::scenario::{parse_cli_value, ConfigError, Scenario};

#[derive(Parser)]
#[command(
    name = "sentinel",
    version,
    about = "Sensor-network insider-attack simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replica of a scenario and export CSV results.
    Run {
        scenario: PathBuf,
        /// Override the scenario's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads; 1 runs replicas serially.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted path such as `compromise.0.profile.drop_rate`. Defaults to
        /// the scenario's own `[sweep]` table.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        replicas: Option<u32>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Measure seal+open throughput of the packet crypto.
    BenchCrypto {
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
    },
    /// Print a built-in scenario as TOML.
    Preset { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run {
            scenario,
            seed,
            out,
            jobs,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let reports = harness::run_replicas(&s, jobs)?;
            let written = harness::export_run(&reports, &out)?;
            let agg = aggregate(&reports);
            println!("{} replica(s), {} epochs each", reports.len(), s.epochs());
            for (i, name) in SUMMARY_COLUMNS.iter().enumerate().take(7) {
                println!("  {name:<24} {}", fmt_stat(agg.mean[i], agg.std[i]));
            }
            print_written(&written);
        }
        Command::Sweep {
            scenario,
            param,
            values,
            replicas,
            out,
            jobs,
        } => {
            let s = Scenario::load(&scenario)?;
            let (param, values) = match (param, &s.sweep) {
                (Some(p), _) => (p, values.iter().map(|v| parse_cli_value(v)).collect()),
                (None, Some(sw)) if values.is_empty() => (sw.param.clone(), sw.values.clone()),
                _ => {
                    return Err(ConfigError::Invalid {
                        key: "--param".into(),
                        reason: "required unless the scenario has a [sweep] table".into(),
                    }
                    .into())
                }
            };
            let replicas = replicas.or(s.sweep.as_ref().and_then(|sw| sw.replicas));
            let points = harness::sweep(&s, &param, &values, replicas, jobs)?;
            let written = harness::export_sweep(&param, &points, &out)?;
            println!("{param}: {} value(s)", points.len());
            for p in &points {
                let agg = aggregate(&p.reports);
                println!(
                    "  {:<8} detection {}  tti {}  steady trust {}",
                    p.value.to_string(),
                    fmt_stat(agg.mean[0], agg.std[0]),
                    fmt_stat(agg.mean[2], agg.std[2]),
                    fmt_stat(agg.mean[6], agg.std[6]),
                );
            }
            print_written(&written);
        }
        Command::BenchCrypto { packets } => {
            let b = harness::bench_crypto(packets)?;
            println!(
                "sealed+opened {} packets in {:.3} s: {:.0} packets/s",
                b.packets,
                b.elapsed.as_secs_f64(),
                b.packets_per_second()
            );
        }
        Command::Preset { name } => match preset_toml(&name) {
            Ok(text) => print!("{text}"),
            Err(e) => {
                eprintln!("known presets: {}", PRESET_NAMES.join(", "));
                return Err(e.into());
            }
        },
    }
    Ok(())
}

fn fmt_stat(mean: Option<f64>, std: Option<f64>) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
        _ => "NA".to_string(),
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}
