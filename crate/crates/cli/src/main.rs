use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hyperrec_cli::compare::{cmd_compare, CompareArgs};
use hyperrec_cli::config::ExperimentConfig;
use hyperrec_cli::evaluate::{cmd_eval, EvalArgs};
use hyperrec_cli::prep::{cmd_prep, PrepArgs};
use hyperrec_cli::sweep::cmd_sweep;
use hyperrec_cli::train::cmd_train;
use hyperrec_cli::{error_kind, exit_code};
use hyperrec_core::data::{InteractionFormat, SplitKind};
use hyperrec_core::eval::{EvalTarget, Protocol};

#[derive(Parser)]
#[command(
    name = "hyperrec",
    version,
    about = "Euclidean vs. hyperbolic latent-space recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw files, reindex, split and write a prepared dataset directory.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "tsv", value_parser = parse_format)]
        format: InteractionFormat,
        #[arg(long)]
        trust: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        min_rating: f64,
        #[arg(long, default_value = "loo", value_parser = parse_split)]
        split: SplitKind,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration for every seed in the config.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set dim=50`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint on a prepared dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        dataset_name: Option<String>,
        /// `full`, `sampled:N` or `rating`.
        #[arg(long, default_value = "full", value_parser = parse_protocol)]
        protocol: Protocol,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "test", value_parser = parse_target)]
        target: EvalTarget,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the (model × space × dim × seed) grid.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare two report CSVs cell by cell.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        space_a: Option<String>,
        #[arg(long)]
        space_b: Option<String>,
        #[arg(long, default_value = "a")]
        label_a: String,
        #[arg(long, default_value = "b")]
        label_b: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_format(s: &str) -> Result<InteractionFormat, String> {
    s.parse().map_err(|e: hyperrec_core::HyperError| e.to_string())
}

fn parse_split(s: &str) -> Result<SplitKind, String> {
    s.parse().map_err(|e: hyperrec_core::HyperError| e.to_string())
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    s.parse().map_err(|e: hyperrec_core::HyperError| e.to_string())
}

fn parse_target(s: &str) -> Result<EvalTarget, String> {
    match s {
        "test" => Ok(EvalTarget::Test),
        "validation" => Ok(EvalTarget::Validation),
        _ => Err(format!("unknown target {s:?} (expected test or validation)")),
    }
}

fn experiment(config: Option<PathBuf>, overrides: &[String]) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(&p, overrides),
        None => ExperimentConfig::parse("", overrides),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prep {
            input,
            format,
            trust,
            min_rating,
            split,
            split_seed,
            out,
        } => {
            let stats = cmd_prep(&PrepArgs {
                input,
                format,
                trust,
                min_rating,
                split,
                split_seed,
                out: out.clone(),
            })?;
            print!("{}", stats.to_text());
            println!("wrote {}", out.display());
        }
        Command::Train { config, overrides } => {
            let exp = experiment(config, &overrides)?;
            let outcomes = cmd_train(&exp)?;
            for o in &outcomes {
                println!(
                    "seed {}: best epoch {}, validation {:.4}",
                    o.seed, o.best_epoch, o.val_metric
                );
            }
            println!("wrote {}", exp.output.join("summary.csv").display());
        }
        Command::Eval {
            checkpoint,
            dataset,
            dataset_name,
            protocol,
            seed,
            target,
            out,
        } => {
            let report = cmd_eval(&EvalArgs {
                checkpoint,
                dataset,
                dataset_name,
                protocol,
                seed,
                target,
                out: out.clone(),
            })?;
            for (k, v) in &report.hr {
                println!("hr@{k} {v:.4}  ndcg@{k} {:.4}", report.ndcg[k]);
            }
            if let (Some(mae), Some(rmse)) = (report.mae, report.rmse) {
                println!("mae {mae:.4}  rmse {rmse:.4}");
            }
            println!("wrote {}", out.display());
        }
        Command::Sweep { config, overrides } => {
            let exp = experiment(config, &overrides)?;
            let s = cmd_sweep(&exp)?;
            println!(
                "trained {} cell(s), reused {}, failed {}",
                s.trained,
                s.reused,
                s.failed.len()
            );
            println!("wrote {}", exp.output.join("curve.csv").display());
            if !s.failed.is_empty() {
                anyhow::bail!("{} sweep cell(s) failed; see failures.txt", s.failed.len());
            }
        }
        Command::Compare {
            a,
            b,
            space_a,
            space_b,
            label_a,
            label_b,
            out,
        } => {
            let rows = cmd_compare(&CompareArgs {
                a,
                b,
                space_a,
                space_b,
                label_a,
                label_b,
                out: out.clone(),
            })?;
            println!("compared {} cell(s); wrote {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            let code = exit_code(&e);
            eprintln!("error[{}]: {e:#}", error_kind(code));
            ExitCode::from(code)
        }
        Err(_) => ExitCode::from(2),
    }
}
