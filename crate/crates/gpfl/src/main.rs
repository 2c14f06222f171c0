use clap::{Parser, Subcommand};
use gpfl::cli::{
    self, ExperimentConfig, TrackOutcome,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gpfl",
    about = "Data-driven feedback linearization experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the PD data-collection loop and write train/test datasets.
    GenerateData(Common),
    /// Search hyperparameters and fit one GP per joint; write the model.
    Train(Common),
    /// Score a trained model on the held-out dataset.
    Evaluate(Common),
    /// Run a closed-loop tracking experiment and write logs and summaries.
    Track(Common),
    /// Dump estimated vs true dynamics components on a seeded state grid.
    DumpComponents {
        #[command(flatten)]
        common: Common,
        /// Number of probe states.
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
}

fn load(common: &Common) -> gpfl::error::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> gpfl::error::Result<ExitCode> {
    match cli.command {
        Command::GenerateData(common) => {
            let report = cli::cmd_generate_data(&load(&common)?)?;
            println!(
                "wrote {} ({} rows) and {} ({} rows)",
                report.train_path.display(),
                report.train_rows,
                report.test_path.display(),
                report.test_rows
            );
        }
        Command::Train(common) => {
            let report = cli::cmd_train(&load(&common)?)?;
            for (j, stats) in report.joints.iter().enumerate() {
                println!(
                    "joint {}: log marginal likelihood {:.3}, noise {:.3e}, {:.1} s",
                    j + 1,
                    stats.likelihood,
                    stats.noise,
                    stats.seconds
                );
            }
            println!(
                "wrote {} in {:.1} s",
                report.model_path.display(),
                report.total_seconds
            );
        }
        Command::Evaluate(common) => {
            let report = cli::cmd_evaluate(&load(&common)?)?;
            for (j, joint) in report.joints.iter().enumerate() {
                println!(
                    "joint {}: nMSE {:.4}%, median |err| {:.3e}",
                    j + 1,
                    joint.nmse_percent,
                    joint.abs_error_quantiles[2]
                );
            }
            println!("wrote {}", report.report_path.display());
        }
        Command::Track(common) => {
            let report = cli::cmd_track(&load(&common)?)?;
            for (j, joint) in report.joints.iter().enumerate() {
                println!(
                    "joint {}: max |e| {:.4} rad ({:.2} deg), steady state {:.4} rad ({:.2} deg)",
                    j + 1,
                    joint.max_error_rad,
                    joint.max_error_deg,
                    joint.steady_state_rad,
                    joint.steady_state_deg
                );
            }
            println!("wrote {} and {}", report.log_path.display(), report.summary_path.display());
            match report.outcome {
                TrackOutcome::Completed => println!("tracking completed"),
                TrackOutcome::Degraded { time } => {
                    eprintln!("torque collapse detected at t = {time:.3} s");
                    return Ok(ExitCode::from(4));
                }
                TrackOutcome::Diverged { time } => {
                    eprintln!("simulation diverged at t = {time:.3} s");
                    return Ok(ExitCode::from(4));
                }
            }
        }
        Command::DumpComponents { common, grid } => {
            let report = cli::cmd_dump_components(&load(&common)?, grid)?;
            println!("wrote {} ({} states)", report.path.display(), report.rows);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
