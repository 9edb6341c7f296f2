//! `eval`: a checkpoint against a prepared dataset, plus the shared
//! evaluation and report-writing helpers.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hyperrec_core::eval::{
    evaluate_full_ranking, evaluate_ratings, evaluate_sampled, report_rows, write_report_csv, write_report_json,
    EvalTarget, HeldOut, MetricsReport, Protocol, ReportRow, RunLabels, DEFAULT_KS,
};
use hyperrec_core::models::Model;

use crate::config::resolve_data_path;
use crate::prepared::{load_prepared, Prepared};

/// Scores `model` on `target` under `protocol`.
pub fn evaluate_model(
    model: &Model,
    data: &Prepared,
    protocol: Protocol,
    eval_seed: u64,
    target: EvalTarget,
) -> Result<MetricsReport> {
    let m = model.materialized();
    let report = match protocol {
        Protocol::Rating => {
            let pairs = match target {
                EvalTarget::Test => &data.split.test,
                EvalTarget::Validation => &data.split.validation,
            };
            evaluate_ratings(&m, pairs, data.ds.rating_range)?
        }
        Protocol::Full | Protocol::Sampled(_) => {
            let held = HeldOut::from_split(data.ds.n_users, data.ds.n_items, &data.split)?;
            match protocol {
                Protocol::Full => evaluate_full_ranking(&m, &held, target, &DEFAULT_KS)?,
                Protocol::Sampled(n) => evaluate_sampled(&m, &held, target, n, eval_seed, &DEFAULT_KS)?,
                Protocol::Rating => unreachable!(),
            }
        }
    };
    Ok(report)
}

/// Writes `report.csv` and `report.json` into `dir`.
pub fn write_reports(dir: &Path, rows: &[ReportRow]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join("report.csv");
    let f = File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    write_report_csv(BufWriter::new(f), rows)?;
    let json_path = dir.join("report.json");
    let f = File::create(&json_path).with_context(|| format!("writing {}", json_path.display()))?;
    write_report_json(BufWriter::new(f), rows)?;
    Ok(())
}

pub fn labels_for(model: &Model, dataset: &str) -> RunLabels {
    RunLabels {
        dataset: dataset.to_string(),
        model: model.config.model.name().to_string(),
        space: model.config.space.name().to_string(),
        dim: model.config.dim,
        seed: model.config.seed,
    }
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub dataset_name: Option<String>,
    pub protocol: Protocol,
    pub seed: u64,
    pub target: EvalTarget,
    pub out: PathBuf,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<MetricsReport> {
    let (model, meta) =
        Model::load(&args.checkpoint).with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let dir = resolve_data_path(&args.dataset);
    let data = load_prepared(&dir)?;
    if meta.n_users != data.ds.n_users || meta.n_items != data.ds.n_items {
        bail!(
            "checkpoint covers {} users × {} items but {} has {} users × {} items",
            meta.n_users,
            meta.n_items,
            dir.display(),
            data.ds.n_users,
            data.ds.n_items
        );
    }
    if model.n_users() != meta.n_users || model.n_items() != meta.n_items {
        bail!("checkpoint tables disagree with meta.json entity counts");
    }
    let report = evaluate_model(&model, &data, args.protocol, args.seed, args.target)?;
    let name = args.dataset_name.clone().unwrap_or_else(|| {
        args.dataset
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    write_reports(&args.out, &report_rows(&report, &labels_for(&model, &name)))?;
    Ok(report)
}
