//! `qmarket` — bilevel electricity-market experiments from the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qmarket_core::config::{
    build_agents, build_policy, build_scenario, build_settings, load_config, BackendKind,
    ExperimentConfig,
};
use qmarket_core::orchestrator::{run_experiment, ExperimentRecord, MarketLowerLevel};
use qmarket_core::report::{write_record, ComparisonArm, ComparisonSummary, CsvObserver};
use qmarket_core::rng::SeedSplitter;

#[derive(Parser)]
#[command(name = "qmarket", version, about = "Bilevel day-ahead market simulator: DQN bidders (classical or quantum-circuit Q-functions) under a PPO mechanism designer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the experiment record.
    #[arg(long, default_value = "qmarket_out")]
    out: PathBuf,
    /// Tiny horizons (2 days per month, 2 upper steps) for quick checks.
    #[arg(long)]
    smoke: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment with the configured backend.
    Run(RunArgs),
    /// Run both backends from the same scenario and seed family and emit a
    /// comparison table.
    Compare(RunArgs),
    /// Parse and validate a configuration, touching nothing else.
    Validate {
        /// Experiment configuration (JSON).
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(_) => {
                println!("ok: {} is a valid configuration", config.display());
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run(args) => run_command(&args),
        Command::Compare(args) => compare_command(&args),
    }
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), String> {
    let mut config = load_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if args.smoke {
        config.apply_smoke();
    }
    let base_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    Ok((config, base_dir))
}

/// Runs one arm into `dir`. The scenario is resolved (and dataset paths read)
/// before the directory is created, so a bad config leaves nothing behind.
fn run_arm(
    config: &ExperimentConfig,
    backend: BackendKind,
    base_dir: &Path,
    dir: &Path,
) -> Result<ExperimentRecord, (u8, String)> {
    let scenario =
        build_scenario(config, base_dir).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let seeds = SeedSplitter::new(config.master_seed);
    let agents = build_agents(config, backend, &scenario, &seeds);
    let mut policy = build_policy(config, &seeds);
    let settings = build_settings(config, &scenario);
    let mut lower = MarketLowerLevel::new(scenario, agents, &seeds, config.cold_start);
    let mut ppo_rng = seeds.stream("ppo-sample");

    let mut observer = CsvObserver::create(dir, lower.agents.len())
        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    let record = run_experiment(
        &mut lower,
        &mut policy,
        &config.ppo,
        &settings,
        &mut ppo_rng,
        &mut observer,
    )
    .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    observer.finish().map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    write_record(dir, &backend.to_string(), config, &record)
        .map_err(|e| (EXIT_RUNTIME, e.to_string()))?;
    Ok(record)
}

fn run_command(args: &RunArgs) -> ExitCode {
    let (config, base_dir) = match prepare(args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run_arm(&config, config.backend, &base_dir, &args.out) {
        Ok(record) => {
            println!(
                "{} months, {} upper steps{} -> final mechanism: cap {:.2} USD/MWh, {}, penalty {:.3}; social welfare {:.0} USD (initial {:.0})",
                record.months.len(),
                record.ppo_trace.len(),
                if record.stopped_early { " (stopped early)" } else { "" },
                record.final_mechanism.price_cap,
                record.final_mechanism.settlement,
                record.final_mechanism.penalty_coeff,
                record.final_social_welfare,
                record.initial_social_welfare,
            );
            println!("record written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn compare_command(args: &RunArgs) -> ExitCode {
    let (config, base_dir) = match prepare(args) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let mut worst: Option<u8> = None;
    let mut arms: [Option<ComparisonArm>; 2] = [None, None];
    for (slot, backend) in [(0, BackendKind::Vqc), (1, BackendKind::Mlp)] {
        let dir = args.out.join(match backend {
            BackendKind::Vqc => "with_vqc",
            BackendKind::Mlp => "without_vqc",
        });
        log::info!("running {backend} arm");
        match run_arm(&config, backend, &base_dir, &dir) {
            Ok(record) => arms[slot] = Some(ComparisonArm::from_record(&record)),
            Err((code, msg)) => {
                eprintln!("error in {backend} arm: {msg}");
                worst = Some(worst.map_or(code, |w| w.max(code)));
            }
        }
    }

    let [with_vqc, without_vqc] = arms;
    let summary = ComparisonSummary::new(with_vqc, without_vqc);
    let csv = summary.to_csv();
    print!("{csv}");
    if let Err(e) = std::fs::create_dir_all(&args.out).and_then(|()| {
        std::fs::write(args.out.join("compare.csv"), &csv)?;
        std::fs::write(args.out.join("comparison.json"), summary.to_json())
    }) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }

    match worst {
        None => ExitCode::SUCCESS,
        Some(code) => ExitCode::from(code),
    }
}
