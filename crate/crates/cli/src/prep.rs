//! `prep`: raw files to a prepared dataset directory.

use std::path::PathBuf;

use anyhow::{Context, Result};
use hyperrec_core::data::{
    build_dataset, export_canonical, leave_one_out_split, parse_interactions, parse_trust, ratio_split, write_split,
    DatasetStats, InteractionFormat, SplitKind,
};

use crate::config::resolve_data_path;
use crate::prepared::split_text;

#[derive(Debug, Clone)]
pub struct PrepArgs {
    pub input: PathBuf,
    pub format: InteractionFormat,
    pub trust: Option<PathBuf>,
    pub min_rating: f64,
    pub split: SplitKind,
    pub split_seed: u64,
    pub out: PathBuf,
}

pub fn cmd_prep(args: &PrepArgs) -> Result<DatasetStats> {
    let input = resolve_data_path(&args.input);
    let (raw, report) = parse_interactions(&input, args.format)?;
    log::info!(
        "{}: {} interactions, {} malformed",
        input.display(),
        raw.len(),
        report.malformed
    );
    let edges = match &args.trust {
        Some(p) => parse_trust(&resolve_data_path(p))?.0,
        None => Vec::new(),
    };
    let ds = build_dataset(&raw, &edges, args.min_rating)?;
    export_canonical(&ds, &args.out)?;
    let split = match args.split {
        SplitKind::LeaveOneOut => leave_one_out_split(&ds),
        SplitKind::Ratio => ratio_split(&ds, args.split_seed),
    };
    write_split(&split, &args.out)?;
    let write = |name: &str, text: String| {
        let p = args.out.join(name);
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    write(
        "split.txt",
        split_text(args.split, args.split_seed, split.non_evaluable.len()),
    )?;
    let stats = ds.stats();
    write("stats.txt", stats.to_text())?;
    Ok(stats)
}
