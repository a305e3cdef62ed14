use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use polycbf::scenario::bench::BenchConfig;
use polycbf::scenario::{run_benchmark, run_property_suite, run_scenario, FilterMode, Overrides, ScenarioConfig, SuiteCounts};

#[derive(Parser)]
#[command(name = "polycbf", version, about = "Smooth polygon CBF scenarios, benchmarks and property checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonFlags {
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    buffer: Option<f64>,
    /// off, proposed or baseline:N
    #[arg(long)]
    filter: Option<FilterMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectory.csv and summary.json.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Time barrier evaluations and write bench.csv.
    Bench {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        buffer: Option<f64>,
    },
    /// Run the randomized property suite and write verify.json.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated overrides such as `pose_pairs=1000,gradient_states=100`.
        #[arg(long)]
        counts: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> polycbf::Result<bool> {
    match command {
        Command::Run { config, flags } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.apply(&Overrides {
                output_dir: flags.out,
                dt: flags.dt,
                kappa: flags.kappa,
                buffer: flags.buffer,
                filter: flags.filter,
            });
            let (_, summary) = run_scenario(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Bench {
            config,
            out,
            kappa,
            buffer,
        } => {
            let mut cfg = BenchConfig::load(&config)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            if let Some(k) = kappa {
                cfg.cbf.kappa = k;
            }
            if let Some(b) = buffer {
                cfg.cbf.buffer_b = b;
            }
            let report = run_benchmark(&cfg)?;
            println!("{:<14} {:>12} {:>12} {:>10}", "method", "mean [µs]", "median [µs]", "ratio");
            for m in &report.methods {
                println!(
                    "{:<14} {:>12.3} {:>12.3} {:>10}",
                    m.method.to_string(),
                    m.mean_seconds * 1e6,
                    m.median_seconds * 1e6,
                    m.ratio_to_proposed.map(|r| format!("{r:.2}")).unwrap_or_default()
                );
            }
            Ok(true)
        }
        Command::Verify { seed, counts, out } => {
            let mut c = SuiteCounts::default();
            if let Some(spec) = counts {
                c = c.with_overrides(&spec)?;
            }
            let report = run_property_suite(seed, &c);
            for check in &report.checks {
                println!(
                    "[{}] {} (max error {:e}, tolerance {:e}, {} evaluated)",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.max_error,
                    check.tolerance,
                    check.evaluated
                );
            }
            std::fs::create_dir_all(&out)?;
            let file = std::fs::File::create(out.join("verify.json"))?;
            serde_json::to_writer_pretty(file, &report)?;
            Ok(report.passed)
        }
    }
}
