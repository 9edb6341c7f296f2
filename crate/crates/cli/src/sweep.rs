//! `sweep`: the (model × space × dim × seed) grid with resumable cells.
//!
//! A cell lives in `cells/<model>-<space>-d<dim>-s<seed>-<hash>`, where the
//! hash covers the cell's training config, the evaluation protocol and the
//! dataset statistics. A cell is complete once `cell.done` exists; complete
//! cells are reused on re-runs.

use std::fmt::Write as _;
use std::fs::File;
use std::path::PathBuf;

use anyhow::{Context, Result};
use hyperrec_core::eval::{read_report_csv, write_report_csv, ReportRow};
use hyperrec_core::models::{ConfigRecord, ModelConfig};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::prepared::{load_prepared, Prepared};
use crate::train::train_one;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepSummary {
    pub trained: usize,
    pub reused: usize,
    pub failed: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
}

struct Cell {
    name: String,
    config: ModelConfig,
}

fn cell_hash(config: &ModelConfig, exp: &ExperimentConfig, data: &Prepared) -> Result<String> {
    let record = serde_json::to_string(&ConfigRecord::from_config(config))?;
    let mut h = Sha256::new();
    for part in [
        record.as_str(),
        &exp.protocol.to_string(),
        &exp.eval_seed.to_string(),
        &exp.dataset_label(),
        &data.stats_text,
    ] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    Ok(format!("{:x}", h.finalize())[..16].to_string())
}

fn cells(exp: &ExperimentConfig, data: &Prepared) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for &model in &exp.sweep_models {
        for &space in &exp.sweep_spaces {
            for &dim in &exp.dims {
                for &seed in &exp.seeds {
                    let config = exp.model_config(model, space, dim, seed)?;
                    config.validate()?;
                    let hash = cell_hash(&config, exp, data)?;
                    out.push(Cell {
                        name: format!("{}-{}-d{dim}-s{seed}-{hash}", model.name(), space.as_str()),
                        config,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn metric_name(r: &ReportRow) -> String {
    match r.k {
        Some(k) => format!("{}@{k}", r.metric),
        None => r.metric.clone(),
    }
}

/// `model,dim,space,metric,mean,stddev` with the sample standard deviation
/// over seeds (0 for a single seed).
pub fn curve_csv(exp: &ExperimentConfig, rows: &[ReportRow]) -> String {
    let mut s = String::from("model,dim,space,metric,mean,stddev\n");
    let mut metrics: Vec<String> = Vec::new();
    for r in rows {
        let m = metric_name(r);
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }
    for &model in &exp.sweep_models {
        for &dim in &exp.dims {
            for &space in &exp.sweep_spaces {
                for metric in &metrics {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| {
                            r.model == model.name()
                                && r.dim == dim
                                && r.space == space.as_str()
                                && metric_name(r) == *metric
                        })
                        .map(|r| r.value)
                        .collect();
                    if vals.is_empty() {
                        continue;
                    }
                    let n = vals.len() as f64;
                    let mean = vals.iter().sum::<f64>() / n;
                    let sd = if vals.len() > 1 {
                        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                    } else {
                        0.0
                    };
                    let _ = writeln!(s, "{},{dim},{},{metric},{mean},{sd}", model.name(), space.as_str());
                }
            }
        }
    }
    s
}

pub fn cmd_sweep(exp: &ExperimentConfig) -> Result<SweepSummary> {
    let data = load_prepared(&exp.dataset_dir())?;
    let grid = cells(exp, &data)?;
    let root = exp.output.clone();
    std::fs::create_dir_all(root.join("cells")).with_context(|| format!("creating {}", root.display()))?;
    std::fs::write(root.join("config.txt"), exp.to_text())?;

    let mut summary = SweepSummary::default();
    for cell in &grid {
        let dir: PathBuf = root.join("cells").join(&cell.name);
        let done = dir.join("cell.done");
        if done.exists() {
            let f = File::open(dir.join("report.csv")).with_context(|| format!("reading {}", dir.display()))?;
            summary.rows.extend(read_report_csv(f)?);
            summary.reused += 1;
            log::info!("{}: reused", cell.name);
            continue;
        }
        log::info!("{}: training", cell.name);
        match train_one(&cell.config, &data, exp, &dir) {
            Ok(_) => {
                let f = File::open(dir.join("report.csv"))?;
                summary.rows.extend(read_report_csv(f)?);
                std::fs::write(&done, &cell.name)?;
                summary.trained += 1;
            }
            Err(e) => {
                log::warn!("{}: failed: {e:#}", cell.name);
                summary.failed.push((cell.name.clone(), format!("{e:#}")));
            }
        }
    }

    let f = File::create(root.join("reports.csv"))?;
    write_report_csv(f, &summary.rows)?;
    std::fs::write(root.join("curve.csv"), curve_csv(exp, &summary.rows))?;
    let failures = root.join("failures.txt");
    if summary.failed.is_empty() {
        if failures.exists() {
            std::fs::remove_file(&failures)?;
        }
    } else {
        let text: String = summary.failed.iter().map(|(c, e)| format!("{c}\t{e}\n")).collect();
        std::fs::write(&failures, text)?;
    }
    Ok(summary)
}

/// Number of training cells per seed for `exp`.
pub fn cells_per_seed(exp: &ExperimentConfig) -> usize {
    exp.sweep_models.len() * exp.sweep_spaces.len() * exp.dims.len()
}
