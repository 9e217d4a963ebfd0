use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use dnrisk::synth::{generate_cohort, validate_marginals, CohortSpec};
use dnrisk::Execution;
use dnrisk_cli::figures::{explain_report, render_figure_data, Figure};
use dnrisk_cli::pipeline::dataset_csv;
use dnrisk_cli::{run_pipeline, PipelineConfig};

/// Explainable risk-prediction pipeline.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Pipeline config (`run`) or cohort spec (`synth`); bundled defaults
    /// when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config or spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full workflow and write a report directory.
    Run,
    /// Generate a synthetic cohort (cohort.csv, schema.toml, marginals.csv).
    Synth,
    /// Recompute SHAP outputs from a report's saved model.
    Explain {
        /// Report directory written by `run`.
        #[arg(long)]
        report: PathBuf,
        /// Dependence slice as `feature,colour_feature`; repeatable.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<[String; 2]>,
    },
    /// Write tidy plot data for one figure under `<report>/figures/`.
    Figures {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long)]
        feature: Option<String>,
        #[arg(long)]
        color: Option<String>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<[String; 2], String> {
    match s.split_once(',') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok([a.to_string(), b.to_string()]),
        _ => Err(format!("expected `feature,colour_feature`, got `{s}`")),
    }
}

fn synth(cli: &Cli) -> Result<()> {
    let mut spec = match &cli.config {
        Some(p) => CohortSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => CohortSpec::default_spec(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("cohort"));
    std::fs::create_dir_all(&out)?;
    let ds = generate_cohort(&spec)?;
    std::fs::write(out.join("cohort.csv"), dataset_csv(&ds)?)?;
    std::fs::write(out.join("schema.toml"), ds.schema().to_toml_string()?)?;
    let checks = validate_marginals(&ds, &spec)?;
    let mut w = csv::Writer::from_path(out.join("marginals.csv"))?;
    w.write_record(["feature", "group", "statistic", "expected", "observed", "z", "flagged"])?;
    for c in &checks {
        w.write_record([
            c.feature.clone(),
            c.group.to_string(),
            c.statistic.clone(),
            c.expected.to_string(),
            c.observed.to_string(),
            c.z.to_string(),
            c.flagged.to_string(),
        ])?;
    }
    w.flush()?;
    let flagged = checks.iter().filter(|c| c.flagged).count();
    println!(
        "{} rows written to {} ({flagged} marginal flags)",
        ds.n_rows(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let result = match &cli.command {
        Command::Run => {
            let cfg = match &cli.config {
                Some(p) => PipelineConfig::load(p),
                None => Ok(PipelineConfig::bundled()),
            };
            let mut cfg = match cfg {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: config: {e:#}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("dnrisk-report"));
            match run_pipeline(&cfg, &out, exec) {
                Ok(s) => {
                    for f in &s.families {
                        println!(
                            "{:<14} cv_auc={:.4} test_auc={:.4} test_accuracy={:.4}",
                            f.family.tag(),
                            f.cv_mean_auc,
                            f.test_auc,
                            f.test_accuracy
                        );
                    }
                    println!("report written to {}", out.display());
                    return ExitCode::SUCCESS;
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        Command::Synth => synth(&cli),
        Command::Explain { report, pairs } => {
            let out = cli.out.clone().unwrap_or_else(|| report.join("explain"));
            explain_report(report, &out, pairs, exec).map(|s| {
                println!("{} features explained; written to {}", s.features.len(), out.display());
            })
        }
        Command::Figures {
            report,
            figure,
            feature,
            color,
        } => {
            let pair = feature.as_deref().zip(color.as_deref());
            render_figure_data(report, *figure, pair, exec).map(|p| println!("{}", p.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
