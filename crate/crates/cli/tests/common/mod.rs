//! Fixture builders shared by the harness tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hyperrec_cli::config::ExperimentConfig;
use hyperrec_cli::prep::{cmd_prep, PrepArgs};
use hyperrec_core::data::{DatasetStats, InteractionFormat, SplitKind};
use hyperrec_core::synth::{hierarchical_feedback, SyntheticConfig};

/// Writes hierarchical synthetic feedback as a whitespace-separated file.
pub fn write_synthetic(path: &Path, config: &SyntheticConfig) {
    let mut text = String::new();
    for r in hierarchical_feedback(config).unwrap() {
        let _ = writeln!(text, "{}\t{}\t{}\t{}", r.user, r.item, r.rating, r.timestamp);
    }
    std::fs::write(path, text).unwrap();
}

pub fn small_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig {
        n_users: 60,
        n_items: 40,
        density: 0.12,
        seed,
        ..SyntheticConfig::default()
    }
}

pub fn prep_args(input: &Path, out: &Path) -> PrepArgs {
    PrepArgs {
        input: input.to_path_buf(),
        format: InteractionFormat::Tsv,
        trust: None,
        min_rating: 0.0,
        split: SplitKind::LeaveOneOut,
        split_seed: 0,
        out: out.to_path_buf(),
    }
}

/// A prepared leave-one-out copy of [`small_config`] under `root/prepared`.
pub fn prepared_small(root: &Path) -> (PathBuf, DatasetStats) {
    let raw = root.join("raw.tsv");
    write_synthetic(&raw, &small_config(3));
    let out = root.join("prepared");
    let stats = cmd_prep(&prep_args(&raw, &out)).unwrap();
    (out, stats)
}

pub fn experiment(dataset: &Path, output: &Path, overrides: &[&str]) -> ExperimentConfig {
    let mut all = vec![
        format!("dataset={}", dataset.display()),
        format!("output={}", output.display()),
        "dataset_name=small".to_string(),
        "batch_size=64".to_string(),
    ];
    all.extend(overrides.iter().map(|s| s.to_string()));
    ExperimentConfig::parse("", &all).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
