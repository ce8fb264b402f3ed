//! Command-line entry point: ingest, split, judge, analyze, gate-replay,
//! and plot-data over one TOML configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rater_equiv::gate::GateConfig;
use rater_equiv::report::{
    cmd_analyze, cmd_gate_replay, cmd_ingest, cmd_judge, cmd_split, emit_plot_data,
    replay_markdown, write_replay_outputs, AnalysisConfig, ReportError,
};

#[derive(Parser)]
#[command(
    name = "rater-equiv",
    version,
    about = "Agreement statistics, equivalence gating, and a model-judge harness for ordinal rating studies"
)]
struct Cli {
    /// Analysis configuration (TOML). Required by every subcommand except
    /// gate-replay, where it only supplies the gate section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the relevant seed (split selection or judge run).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Restrict the command to one configured metric.
    #[arg(long, global = true)]
    metric: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and merge the ratings files, emitting one normalized CSV.
    Ingest,
    /// Reserve the expert-agreed context pool and write the split manifest.
    Split,
    /// Rate the test set with a judge variant (HTTP or scripted mock).
    Judge {
        /// Override the configured judge variant.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Compute pair statistics, gate every candidate, and write all tables
    /// and plot data.
    Analyze,
    /// Re-evaluate a published statistics table from its CSV transcription.
    GateReplay {
        /// Gate-schema CSV with one baseline row (tost column `--`).
        stats: PathBuf,
    },
    /// Rewrite Bland-Altman and Jaccard-curve plot files from the analysis.
    PlotData,
}

fn load_config(cli: &Cli) -> Result<AnalysisConfig, ReportError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        ReportError::Config("this subcommand needs --config <path>".to_string())
    })?;
    let mut config = AnalysisConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.data.output_dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<ExitCode, ReportError> {
    match &cli.command {
        Command::Ingest => {
            let config = load_config(cli)?;
            let (path, count) = cmd_ingest(&config)?;
            println!("ingested {count} ratings -> {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Split => {
            let config = load_config(cli)?;
            let (path, split) = cmd_split(&config, cli.metric.as_deref(), cli.seed)?;
            println!(
                "context pool {} items, test set {} items -> {}",
                split.context_pool.len(),
                split.test_set.len(),
                path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Judge { variant } => {
            let config = load_config(cli)?;
            let output = cmd_judge(
                &config,
                cli.metric.as_deref(),
                cli.seed,
                variant.as_deref(),
            )?;
            println!(
                "rated {} items ({} failures, {} client calls, {} cache hits) -> {}",
                output.outcome.ratings.len(),
                output.outcome.failures.len(),
                output.outcome.client_calls,
                output.outcome.cache_hits,
                output.ratings_path.display()
            );
            if output.outcome.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "{} item(s) failed; see {}",
                    output.outcome.failures.len(),
                    output.failures_path.display()
                );
                Ok(ExitCode::from(2))
            }
        }
        Command::Analyze => {
            let config = load_config(cli)?;
            let bundle = cmd_analyze(&config, cli.metric.as_deref())?;
            for metric in &bundle.metrics {
                for (key, aggregate) in &metric.aggregates {
                    println!(
                        "{}: {} mean tests passed {:.2}",
                        metric.metric, key, aggregate.mean_passed
                    );
                }
            }
            println!("reports written under {}", bundle.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::GateReplay { stats } => {
            let gate_config = match &cli.config {
                Some(path) => AnalysisConfig::load(path)?.gate.to_config(),
                None => GateConfig::replay(),
            };
            let table = cmd_gate_replay(stats, &gate_config)?;
            print!("{}", replay_markdown(&table));
            if let Some(out) = &cli.out {
                let stem = stats
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "table".to_string());
                write_replay_outputs(&table, out, &stem)?;
                println!("replay files written under {}", out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotData => {
            let config = load_config(cli)?;
            let bundle = cmd_analyze(&config, cli.metric.as_deref())?;
            emit_plot_data(&bundle)?;
            println!(
                "plot data written under {}",
                bundle.output_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(&error);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::FAILURE
        }
    }
}
