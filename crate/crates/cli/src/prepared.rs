//! Layout of a prepared dataset directory.
//!
//! `interactions.tsv`, `idmap.tsv`, optional `trust.tsv`, the split files
//! `train.tsv` / `validation.tsv` / `test.tsv`, `split.txt` and `stats.txt`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hyperrec_core::data::{load_canonical, read_split, InteractionDataset, Split, SplitKind};

pub struct Prepared {
    pub ds: InteractionDataset,
    pub split: Split,
    /// Contents of `stats.txt`.
    pub stats_text: String,
}

/// `split.txt` contents.
pub fn split_text(kind: SplitKind, seed: u64, non_evaluable: usize) -> String {
    let kind = match kind {
        SplitKind::LeaveOneOut => "loo",
        SplitKind::Ratio => "ratio",
    };
    format!("kind={kind}\nseed={seed}\nnon_evaluable_users={non_evaluable}\n")
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    if !dir.join("interactions.tsv").exists() {
        bail!(
            "{} is not a prepared dataset (no interactions.tsv); run `hyperrec prep` first",
            dir.display()
        );
    }
    let ds = load_canonical(dir).with_context(|| format!("loading {}", dir.display()))?;
    let split_path = dir.join("split.txt");
    let text = std::fs::read_to_string(&split_path).with_context(|| format!("reading {}", split_path.display()))?;
    let kind = text
        .lines()
        .find_map(|l| l.strip_prefix("kind="))
        .ok_or_else(|| anyhow!("{}: missing kind=", split_path.display()))?
        .parse::<SplitKind>()?;
    let split = read_split(dir, kind, ds.n_users).with_context(|| format!("loading split from {}", dir.display()))?;
    let stats_path = dir.join("stats.txt");
    let stats_text =
        std::fs::read_to_string(&stats_path).with_context(|| format!("reading {}", stats_path.display()))?;
    Ok(Prepared { ds, split, stats_text })
}
