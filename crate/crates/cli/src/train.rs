//! `train`: one model config over a list of seeds.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use hyperrec_core::eval::{report_rows, EvalTarget, MetricsReport};
use hyperrec_core::models::{fit, CheckpointMeta, ConfigRecord, EpochLog, FitResult, ModelConfig, ModelKind};

use crate::config::ExperimentConfig;
use crate::evaluate::{evaluate_model, labels_for, write_reports};
use crate::prepared::{load_prepared, Prepared};

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_metric: f64,
    pub report: MetricsReport,
}

fn val_column(kind: ModelKind) -> &'static str {
    if kind == ModelKind::MfRating {
        "val_mae"
    } else {
        "val_hr@10"
    }
}

fn log_csv(kind: ModelKind, rows: &[EpochLog]) -> String {
    let mut s = format!("epoch,loss,{},wall_time\n", val_column(kind));
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.3}", r.epoch, r.loss, r.val_metric, r.wall_time);
    }
    s
}

/// Trains `config`, stores the best-validation checkpoint with its log and
/// test report under `dir`.
pub fn train_one(config: &ModelConfig, data: &Prepared, exp: &ExperimentConfig, dir: &Path) -> Result<SeedOutcome> {
    let FitResult {
        best,
        best_epoch,
        best_val,
        log,
    } = fit(config, &data.ds, &data.split, |r| {
        log::info!(
            "seed {} epoch {}: loss {:.5}, validation {:.5}",
            config.seed,
            r.epoch,
            r.loss,
            r.val_metric
        );
    })?;
    let meta = CheckpointMeta {
        config: ConfigRecord::from_config(config),
        n_users: data.ds.n_users,
        n_items: data.ds.n_items,
        epoch: best_epoch,
        val_metric: Some(best_val),
        global_mean: best.global_mean,
    };
    best.save(dir, &meta)?;
    let log_path = dir.join("train_log.csv");
    std::fs::write(&log_path, log_csv(config.model, &log))
        .with_context(|| format!("writing {}", log_path.display()))?;
    let report = evaluate_model(&best, data, exp.protocol, exp.eval_seed, EvalTarget::Test)?;
    write_reports(dir, &report_rows(&report, &labels_for(&best, &exp.dataset_label())))?;
    Ok(SeedOutcome {
        seed: config.seed,
        best_epoch,
        val_metric: best_val,
        report,
    })
}

fn metric_columns(r: &MetricsReport) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = r.hr.iter().map(|(k, x)| (format!("hr@{k}"), *x)).collect();
    v.extend(r.ndcg.iter().map(|(k, x)| (format!("ndcg@{k}"), *x)));
    v.extend(r.mae.map(|x| ("mae".to_string(), x)));
    v.extend(r.rmse.map(|x| ("rmse".to_string(), x)));
    v
}

/// One row per seed plus a final `mean` row.
pub fn summary_csv(kind: ModelKind, outcomes: &[SeedOutcome]) -> String {
    let Some(first) = outcomes.first() else {
        return String::new();
    };
    let names: Vec<String> = metric_columns(&first.report).into_iter().map(|(n, _)| n).collect();
    let mut s = format!("seed,best_epoch,{},{}\n", val_column(kind), names.join(","));
    let n = outcomes.len() as f64;
    let mut sums = vec![0.0; names.len()];
    let (mut epoch_sum, mut val_sum) = (0.0, 0.0);
    for o in outcomes {
        let vals: Vec<f64> = metric_columns(&o.report).into_iter().map(|(_, x)| x).collect();
        for (a, b) in sums.iter_mut().zip(&vals) {
            *a += b;
        }
        epoch_sum += o.best_epoch as f64;
        val_sum += o.val_metric;
        let cells: Vec<String> = vals.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{}", o.seed, o.best_epoch, o.val_metric, cells.join(","));
    }
    let means: Vec<String> = sums.iter().map(|x| (x / n).to_string()).collect();
    let _ = writeln!(s, "mean,{},{},{}", epoch_sum / n, val_sum / n, means.join(","));
    s
}

pub fn cmd_train(exp: &ExperimentConfig) -> Result<Vec<SeedOutcome>> {
    let configs: Vec<ModelConfig> = exp
        .seeds
        .iter()
        .map(|&s| exp.model_config(exp.model, exp.space, exp.dim, s))
        .collect::<Result<_>>()?;
    for c in &configs {
        c.validate()?;
    }
    let data = load_prepared(&exp.dataset_dir())?;
    std::fs::create_dir_all(&exp.output).with_context(|| format!("creating {}", exp.output.display()))?;
    std::fs::write(exp.output.join("config.txt"), exp.to_text())?;
    let mut outcomes = Vec::new();
    for c in &configs {
        let dir = exp.output.join(format!("seed-{}", c.seed));
        outcomes.push(train_one(c, &data, exp, &dir).with_context(|| format!("seed {}", c.seed))?);
    }
    let path = exp.output.join("summary.csv");
    std::fs::write(&path, summary_csv(exp.model, &outcomes)).with_context(|| format!("writing {}", path.display()))?;
    Ok(outcomes)
}
