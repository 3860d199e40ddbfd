//! Benchmark CLI: simulate scenarios, run observer experiments, certify
//! gains and compare observers from a TOML configuration.
//!
//! Exit codes: 0 on success, 2 for configuration/usage/IO problems, 3 when
//! an observer or Riccati flow fails numerically.

use clap::{Args, Parser, Subcommand};
use se23nav::bench::experiment::format_compare_table;
use se23nav::bench::{run_experiment, verify_gains, BenchError, ExperimentConfig};
use se23nav::scenario::{export_simlog, run_scenario};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "se23nav", version, about = "SE_2(3) inertial-navigation observer benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario and export truth/IMU/landmark CSVs.
    Simulate(CommonArgs),
    /// Run every configured observer over the Monte-Carlo runs and write
    /// series, summary and aggregate CSVs.
    Run(CommonArgs),
    /// Report constellation observability and certify the translational
    /// gains over the landmark-gap range.
    VerifyGains(CommonArgs),
    /// Run the experiment and print an aggregate comparison table.
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment configuration; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress progress chatter (reports and tables still print).
    #[arg(long)]
    quiet: bool,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::from_str("")?,
    };
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &ExperimentConfig, stem: &str) -> PathBuf {
    let dir = PathBuf::from(&cfg.output.dir);
    if cfg.output.prefix.is_empty() {
        dir.join(stem)
    } else {
        dir.join(format!("{}{stem}", cfg.output.prefix))
    }
}

fn simulate(args: &CommonArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    let sc = cfg.scenario(cfg.scenario.seed)?;
    let log = run_scenario(&sc)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let truth_path = out_path(&cfg, "truth_imu.csv");
    let landmarks_path = out_path(&cfg, "landmarks.csv");
    export_simlog(&log, &truth_path, &landmarks_path)?;
    if !args.quiet {
        println!(
            "simulated {} epochs ({}s at {} Hz); wrote {} and {}",
            log.truth.len(),
            sc.duration,
            sc.imu_rate,
            truth_path.display(),
            landmarks_path.display()
        );
    }
    Ok(())
}

fn run(args: &CommonArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    let report = run_experiment(&cfg)?;
    if !args.quiet {
        for a in &report.aggregates {
            let pass = match a.pass {
                Some(true) => "  [pass]",
                Some(false) => "  [FAIL]",
                None => "",
            };
            println!(
                "{:<26} rmse: {:.4e} deg, {:.4e} m, {:.4e} m/s over {} runs{pass}",
                a.spec.name(),
                a.rmse_att_deg,
                a.rmse_pos,
                a.rmse_vel,
                a.runs
            );
        }
        println!("wrote {} files under {}", report.files.len(), cfg.output.dir);
    }
    Ok(())
}

fn verify(args: &CommonArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    print!("{}", verify_gains(&cfg)?);
    Ok(())
}

fn compare(args: &CommonArgs) -> Result<(), BenchError> {
    let cfg = load_config(args)?;
    let report = run_experiment(&cfg)?;
    print!("{}", format_compare_table(&report));
    if !args.quiet {
        println!("wrote {} files under {}", report.files.len(), cfg.output.dir);
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Command::Simulate(args) => simulate(args),
        Command::Run(args) => run(args),
        Command::VerifyGains(args) => verify(args),
        Command::Compare(args) => compare(args),
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
