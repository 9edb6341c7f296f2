//! `compare`: two report sets side by side.
//!
//! Rows are matched on (model, dim, metric, k) after averaging over seeds.
//! `hr` and `ndcg` are better when higher, `mae` and `rmse` when lower.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use hyperrec_core::eval::{read_report_csv, ReportRow};

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Keep only rows of this space from `a` / `b`.
    pub space_a: Option<String>,
    pub space_b: Option<String>,
    pub label_a: String,
    pub label_b: String,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub dim: usize,
    pub metric: String,
    pub k: Option<usize>,
    pub a: f64,
    pub b: f64,
    /// `b − a`.
    pub delta: f64,
    /// `(b − a) / |a|`; `None` when `a = 0`.
    pub rel_delta: Option<f64>,
    pub winner: Winner,
}

type Key = (String, usize, String, Option<usize>);

fn load(path: &PathBuf, space: Option<&str>) -> Result<(Vec<ReportRow>, String, String)> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<ReportRow> = read_report_csv(f)
        .with_context(|| format!("parsing {}", path.display()))?
        .into_iter()
        .filter(|r| space.is_none_or(|s| r.space == s))
        .collect();
    if rows.is_empty() {
        bail!("{}: no report rows to compare", path.display());
    }
    let unique = |f: fn(&ReportRow) -> &str, what: &str| -> Result<String> {
        let first = f(&rows[0]).to_string();
        if rows.iter().any(|r| f(r) != first) {
            bail!("{}: rows mix several {what}s", path.display());
        }
        Ok(first)
    };
    let protocol = unique(|r| &r.protocol, "protocol")?;
    let dataset = unique(|r| &r.dataset, "dataset")?;
    Ok((rows, protocol, dataset))
}

fn means(rows: &[ReportRow]) -> BTreeMap<Key, f64> {
    let mut acc: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc
            .entry((r.model.clone(), r.dim, r.metric.clone(), r.k))
            .or_insert((0.0, 0));
        e.0 += r.value;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

pub fn higher_is_better(metric: &str) -> bool {
    !matches!(metric, "mae" | "rmse")
}

/// Seed-averaged rows matched on (model, dim, metric, k).
pub fn compare_rows(a: &[ReportRow], b: &[ReportRow]) -> Vec<ComparisonRow> {
    let (ma, mb) = (means(a), means(b));
    ma.iter()
        .filter_map(|(key, &va)| {
            let &vb = mb.get(key)?;
            let delta = vb - va;
            let winner = if va == vb {
                Winner::Tie
            } else if (vb > va) == higher_is_better(&key.2) {
                Winner::B
            } else {
                Winner::A
            };
            Some(ComparisonRow {
                model: key.0.clone(),
                dim: key.1,
                metric: key.2.clone(),
                k: key.3,
                a: va,
                b: vb,
                delta,
                rel_delta: (va != 0.0).then(|| delta / va.abs()),
                winner,
            })
        })
        .collect()
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<ComparisonRow>> {
    let (ra, pa, da) = load(&args.a, args.space_a.as_deref())?;
    let (rb, pb, db) = load(&args.b, args.space_b.as_deref())?;
    if pa != pb {
        bail!(
            "protocol mismatch: {} uses {pa}, {} uses {pb}",
            args.label_a,
            args.label_b
        );
    }
    if da != db {
        bail!(
            "dataset mismatch: {} covers {da}, {} covers {db}",
            args.label_a,
            args.label_b
        );
    }
    let rows = compare_rows(&ra, &rb);
    if rows.is_empty() {
        bail!("the two report sets share no (model, dim, metric, k) cell");
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let label = |w: Winner| match w {
        Winner::A => args.label_a.as_str(),
        Winner::B => args.label_b.as_str(),
        Winner::Tie => "tie",
    };
    let k_str = |k: Option<usize>| k.map_or_else(String::new, |k| k.to_string());
    let rel_str = |r: Option<f64>| r.map_or_else(String::new, |r| r.to_string());

    let mut csv = String::from("model,dim,metric,k,a,b,delta,rel_delta,winner\n");
    let mut md = format!(
        "| model | dim | metric | k | {} | {} | delta | rel. delta | winner |\n|---|---:|---|---:|---:|---:|---:|---:|---|\n",
        args.label_a, args.label_b
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.model,
            r.dim,
            r.metric,
            k_str(r.k),
            r.a,
            r.b,
            r.delta,
            rel_str(r.rel_delta),
            label(r.winner)
        );
        let rel_md = r
            .rel_delta
            .map_or_else(|| "n/a".to_string(), |x| format!("{:+.2}%", 100.0 * x));
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {:.4} | {:.4} | {:+.4} | {} | {} |",
            r.model,
            r.dim,
            r.metric,
            k_str(r.k),
            r.a,
            r.b,
            r.delta,
            rel_md,
            label(r.winner)
        );
    }
    std::fs::write(args.out.join("comparison.csv"), csv)?;
    std::fs::write(args.out.join("comparison.md"), md)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, k: Option<usize>, value: f64, seed: u64) -> ReportRow {
        ReportRow {
            dataset: "d".into(),
            model: "cml".into(),
            space: "euclidean".into(),
            dim: 10,
            metric: metric.into(),
            k,
            value,
            seed,
            protocol: "full".into(),
        }
    }

    #[test]
    fn identical_reports_have_zero_deltas() {
        let a = vec![row("hr", Some(10), 0.2, 0), row("mae", None, 0.8, 0)];
        let rows = compare_rows(&a, &a);
        assert!(rows.iter().all(|r| r.delta == 0.0 && r.winner == Winner::Tie));
    }

    #[test]
    fn dominating_report_wins_every_cell() {
        let a = vec![
            row("hr", Some(10), 0.3, 0),
            row("hr", Some(10), 0.5, 1),
            row("rmse", None, 0.7, 0),
        ];
        let b = vec![row("hr", Some(10), 0.2, 0), row("rmse", None, 0.9, 0)];
        let rows = compare_rows(&a, &b);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.winner == Winner::A));
        let hr = rows.iter().find(|r| r.metric == "hr").unwrap();
        assert!((hr.a - 0.4).abs() < 1e-15);
        assert!((hr.rel_delta.unwrap() + 0.5).abs() < 1e-12);
    }
}
