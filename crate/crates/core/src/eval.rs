//! Ranking and rating metrics, and the two ranking protocols.
//!
//! Items are ranked by descending score; ties go to the lower item id. A
//! held-out item's rank is computed in one pass without sorting:
//! `1 + #{better candidates}`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Interaction, Split};
use crate::error::{HyperError, Result};

pub const DEFAULT_KS: [usize; 5] = [1, 5, 10, 15, 20];

/// A model seen by the ranking evaluator: higher scores rank first.
pub trait Scorer: Sync {
    fn n_users(&self) -> usize;
    fn n_items(&self) -> usize;
    /// Fills `out[i]` with the score of item `i` for `user`.
    fn score_items(&self, user: usize, out: &mut [f64]);
}

/// A model seen by the rating evaluator.
pub trait RatingPredictor: Sync {
    fn predict(&self, user: usize, item: usize) -> f64;
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(HyperError::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

/// 1.0 when `held_out` is among the first `k` entries of `ranked`.
pub fn hit_ratio_at_k(ranked: &[usize], held_out: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    Ok(if ranked.iter().take(k).any(|&i| i == held_out) {
        1.0
    } else {
        0.0
    })
}

/// DCG@k over IDCG@k with binary relevance and `1/log₂(i+1)` discounts.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Result<f64> {
    check_k(k)?;
    if relevant.is_empty() {
        return Err(HyperError::Empty("relevant set".into()));
    }
    let discount = |pos: usize| 1.0 / ((pos + 2) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(pos, _)| discount(pos))
        .sum();
    let idcg: f64 = (0..relevant.len().min(k)).map(discount).sum();
    Ok(dcg / idcg)
}

fn check_pairs(preds: &[f64], observed: &[f64]) -> Result<()> {
    if preds.len() != observed.len() {
        return Err(HyperError::DimensionMismatch {
            left: preds.len(),
            right: observed.len(),
        });
    }
    if preds.is_empty() {
        return Err(HyperError::Empty("prediction list".into()));
    }
    Ok(())
}

pub fn mae(preds: &[f64], observed: &[f64]) -> Result<f64> {
    check_pairs(preds, observed)?;
    Ok(preds.iter().zip(observed).map(|(p, o)| (p - o).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn rmse(preds: &[f64], observed: &[f64]) -> Result<f64> {
    check_pairs(preds, observed)?;
    let mse = preds.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum::<f64>() / preds.len() as f64;
    Ok(mse.sqrt())
}

/// NaN sorts below every number.
#[inline]
fn key(s: f64) -> f64 {
    if s.is_nan() {
        f64::NEG_INFINITY
    } else {
        s
    }
}

/// Whether item `a` ranks ahead of item `b`.
#[inline]
fn ahead(sa: f64, a: usize, sb: f64, b: usize) -> bool {
    let (sa, sb) = (key(sa), key(sb));
    sa > sb || (sa == sb && a < b)
}

/// 1-based rank of `target` among `candidates` (which must contain it).
pub fn rank_among(scores: &[f64], candidates: impl IntoIterator<Item = usize>, target: usize) -> usize {
    let st = scores[target];
    1 + candidates
        .into_iter()
        .filter(|&c| c != target && ahead(scores[c], c, st, target))
        .count()
}

/// Rank of `target` among all items outside the sorted list `excluded`.
fn rank_full(scores: &[f64], excluded: &[usize], target: usize) -> usize {
    let st = scores[target];
    let mut better = 0;
    let mut ex = excluded.iter().peekable();
    for (i, &s) in scores.iter().enumerate() {
        while ex.next_if(|&&e| e < i).is_some() {}
        if ex.peek() == Some(&&i) || i == target {
            continue;
        }
        if ahead(s, i, st, target) {
            better += 1;
        }
    }
    better + 1
}

/// Items ranked by descending score, excluding the sorted list `excluded`.
pub fn top_k(scores: &[f64], excluded: &[usize], k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..scores.len())
        .filter(|i| excluded.binary_search(i).is_err())
        .collect();
    let cmp = |a: &usize, b: &usize| {
        key(scores[*b])
            .partial_cmp(&key(scores[*a]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    Full,
    Sampled(usize),
    Rating,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::Full => write!(f, "full"),
            Protocol::Sampled(n) => write!(f, "sampled:{n}"),
            Protocol::Rating => write!(f, "rating"),
        }
    }
}

impl FromStr for Protocol {
    type Err = HyperError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Protocol::Full),
            "rating" => Ok(Protocol::Rating),
            _ => s
                .strip_prefix("sampled:")
                .and_then(|n| n.parse().ok())
                .map(Protocol::Sampled)
                .ok_or_else(|| {
                    HyperError::InvalidArgument(format!("unknown protocol {s:?} (expected full, sampled:N or rating)"))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub n_users_evaluated: usize,
    pub protocol: Protocol,
}

impl MetricsReport {
    fn from_ranks(ranks: &[usize], ks: &[usize], protocol: Protocol) -> Result<Self> {
        if ranks.is_empty() {
            return Err(HyperError::NoEvaluableUsers);
        }
        let n = ranks.len() as f64;
        let mut hr = BTreeMap::new();
        let mut ndcg = BTreeMap::new();
        for &k in ks {
            check_k(k)?;
            let (mut h, mut g) = (0.0, 0.0);
            for &r in ranks {
                if r <= k {
                    h += 1.0;
                    g += 1.0 / ((r + 1) as f64).log2();
                }
            }
            hr.insert(k, h / n);
            ndcg.insert(k, g / n);
        }
        Ok(MetricsReport {
            hr,
            ndcg,
            mae: None,
            rmse: None,
            n_users_evaluated: ranks.len(),
            protocol,
        })
    }

    pub fn hr_at(&self, k: usize) -> Option<f64> {
        self.hr.get(&k).copied()
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ndcg.get(&k).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    Validation,
    Test,
}

/// Per-user view of a leave-one-out split.
#[derive(Debug, Clone)]
pub struct HeldOut {
    pub n_items: usize,
    /// Sorted training items per user.
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Option<usize>>,
    pub test: Vec<Option<usize>>,
}

impl HeldOut {
    pub fn from_split(n_users: usize, n_items: usize, split: &Split) -> Result<Self> {
        let mut train = vec![Vec::new(); n_users];
        for it in &split.train {
            train[it.user].push(it.item);
        }
        for t in &mut train {
            t.sort_unstable();
            t.dedup();
        }
        let fill = |part: &[Interaction], what: &str| -> Result<Vec<Option<usize>>> {
            let mut out = vec![None; n_users];
            for it in part {
                if out[it.user].replace(it.item).is_some() {
                    return Err(HyperError::InvalidArgument(format!(
                        "user {} has more than one {what} item; ranking needs a leave-one-out split",
                        it.user
                    )));
                }
            }
            Ok(out)
        };
        Ok(HeldOut {
            n_items,
            train,
            validation: fill(&split.validation, "validation")?,
            test: fill(&split.test, "test")?,
        })
    }

    pub fn n_users(&self) -> usize {
        self.train.len()
    }

    /// Target item and the sorted excluded set (train plus the other
    /// held-out item) for `user`.
    pub fn query(&self, user: usize, target: EvalTarget) -> Option<(usize, Vec<usize>)> {
        let (t, other) = match target {
            EvalTarget::Validation => (self.validation[user]?, self.test[user]),
            EvalTarget::Test => (self.test[user]?, self.validation[user]),
        };
        let mut excluded = self.train[user].clone();
        if let Some(o) = other {
            if let Err(p) = excluded.binary_search(&o) {
                excluded.insert(p, o);
            }
        }
        Some((t, excluded))
    }

    fn evaluable(&self, target: EvalTarget) -> Vec<usize> {
        (0..self.n_users())
            .filter(|&u| match target {
                EvalTarget::Validation => self.validation[u].is_some(),
                EvalTarget::Test => self.test[u].is_some(),
            })
            .collect()
    }
}

fn check_scorer(scorer: &dyn Scorer, held: &HeldOut) -> Result<()> {
    if scorer.n_items() != held.n_items {
        return Err(HyperError::DimensionMismatch {
            left: scorer.n_items(),
            right: held.n_items,
        });
    }
    if scorer.n_users() < held.n_users() {
        return Err(HyperError::DimensionMismatch {
            left: scorer.n_users(),
            right: held.n_users(),
        });
    }
    Ok(())
}

/// Ranks each evaluable user's held-out item against every item not in the
/// user's train set or other held-out slot.
pub fn evaluate_full_ranking(
    scorer: &dyn Scorer,
    held: &HeldOut,
    target: EvalTarget,
    ks: &[usize],
) -> Result<MetricsReport> {
    check_scorer(scorer, held)?;
    let users = held.evaluable(target);
    let ranks: Vec<usize> = users
        .par_iter()
        .map_init(
            || vec![0.0; held.n_items],
            |scores, &u| {
                let (t, excluded) = held.query(u, target).expect("evaluable user");
                scorer.score_items(u, scores);
                rank_full(scores, &excluded, t)
            },
        )
        .collect();
    MetricsReport::from_ranks(&ranks, ks, Protocol::Full)
}

/// Ranks the held-out item against `n_negatives` items drawn uniformly
/// without replacement from those the user never interacted with. Draws are
/// a pure function of `(seed, user)`.
pub fn evaluate_sampled(
    scorer: &dyn Scorer,
    held: &HeldOut,
    target: EvalTarget,
    n_negatives: usize,
    seed: u64,
    ks: &[usize],
) -> Result<MetricsReport> {
    check_scorer(scorer, held)?;
    let users = held.evaluable(target);
    let ranks: Vec<usize> = users
        .par_iter()
        .map_init(
            || vec![0.0; held.n_items],
            |scores, &u| {
                let (t, mut excluded) = held.query(u, target).expect("evaluable user");
                if let Err(p) = excluded.binary_search(&t) {
                    excluded.insert(p, t);
                }
                let complement: Vec<usize> = (0..held.n_items)
                    .filter(|i| excluded.binary_search(i).is_err())
                    .collect();
                let negatives: Vec<usize> = if n_negatives >= complement.len() {
                    complement
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(u as u64);
                    index::sample(&mut rng, complement.len(), n_negatives)
                        .into_iter()
                        .map(|j| complement[j])
                        .collect()
                };
                scorer.score_items(u, scores);
                rank_among(scores, negatives.into_iter().chain(std::iter::once(t)), t)
            },
        )
        .collect();
    MetricsReport::from_ranks(&ranks, ks, Protocol::Sampled(n_negatives))
}

/// MAE and RMSE of predictions clamped to `range`.
pub fn evaluate_ratings(
    model: &dyn RatingPredictor,
    pairs: &[Interaction],
    range: (f64, f64),
) -> Result<MetricsReport> {
    let preds: Vec<f64> = pairs
        .par_iter()
        .map(|it| model.predict(it.user, it.item).clamp(range.0, range.1))
        .collect();
    let observed: Vec<f64> = pairs.iter().map(|it| it.rating).collect();
    Ok(MetricsReport {
        hr: BTreeMap::new(),
        ndcg: BTreeMap::new(),
        mae: Some(mae(&preds, &observed)?),
        rmse: Some(rmse(&preds, &observed)?),
        n_users_evaluated: pairs.len(),
        protocol: Protocol::Rating,
    })
}

/// Labels attached to every serialized report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabels {
    pub dataset: String,
    pub model: String,
    pub space: String,
    pub dim: usize,
    pub seed: u64,
}

/// One serialized metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: String,
    pub space: String,
    pub dim: usize,
    pub metric: String,
    /// Empty for `mae` / `rmse`.
    pub k: Option<usize>,
    pub value: f64,
    pub seed: u64,
    pub protocol: String,
}

pub const REPORT_HEADER: &str = "dataset,model,space,dim,metric,k,value,seed,protocol";

/// Flattens a report into rows: hr then ndcg by ascending k, then mae, rmse.
pub fn report_rows(report: &MetricsReport, labels: &RunLabels) -> Vec<ReportRow> {
    let row = |metric: &str, k: Option<usize>, value: f64| ReportRow {
        dataset: labels.dataset.clone(),
        model: labels.model.clone(),
        space: labels.space.clone(),
        dim: labels.dim,
        metric: metric.to_string(),
        k,
        value,
        seed: labels.seed,
        protocol: report.protocol.to_string(),
    };
    let mut rows = Vec::new();
    rows.extend(report.hr.iter().map(|(&k, &v)| row("hr", Some(k), v)));
    rows.extend(report.ndcg.iter().map(|(&k, &v)| row("ndcg", Some(k), v)));
    rows.extend(report.mae.map(|v| row("mae", None, v)));
    rows.extend(report.rmse.map(|v| row("rmse", None, v)));
    rows
}

pub fn write_report_csv<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)
            .map_err(|e| HyperError::InvalidArgument(format!("csv: {e}")))?;
    }
    out.flush()
        .map_err(|e| HyperError::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_report_csv<R: std::io::Read>(r: R) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<ReportRow>, _>>()
        .map_err(|e| HyperError::InvalidArgument(format!("csv: {e}")))
}

pub fn write_report_json<W: Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    serde_json::to_writer_pretty(w, rows).map_err(|e| HyperError::InvalidArgument(format!("json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Table(Vec<Vec<f64>>);

    impl Scorer for Table {
        fn n_users(&self) -> usize {
            self.0.len()
        }
        fn n_items(&self) -> usize {
            self.0[0].len()
        }
        fn score_items(&self, user: usize, out: &mut [f64]) {
            out.copy_from_slice(&self.0[user]);
        }
    }

    #[test]
    fn hit_ratio_examples() {
        assert_eq!(hit_ratio_at_k(&[4, 1, 2], 4, 1).unwrap(), 1.0);
        let ranked: Vec<usize> = (0..20).collect();
        assert_eq!(hit_ratio_at_k(&ranked, 10, 10).unwrap(), 0.0);
        assert!(hit_ratio_at_k(&ranked, 10, 0).is_err());
        let hits: f64 = [0usize, 6, 29]
            .iter()
            .map(|&r| hit_ratio_at_k(&ranked_with(r), 99, 10).unwrap())
            .sum();
        assert!((hits / 3.0 - 2.0 / 3.0).abs() < 1e-15);
    }

    fn ranked_with(pos: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..40).collect();
        v[pos] = 99;
        v
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_k(&[7, 1, 2], &[7], 5).unwrap(), 1.0);
        assert!((ndcg_at_k(&[1, 2, 7], &[7], 5).unwrap() - 0.5).abs() < 1e-15);
        let expect = (1.0 + 0.5) / (1.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&[7, 1, 8, 2, 3], &[7, 8], 5).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.919721).abs() < 1e-6);
        assert_eq!(ndcg_at_k(&[1, 2], &[9], 2).unwrap(), 0.0);
        assert!(ndcg_at_k(&[1], &[], 1).is_err());
    }

    #[test]
    fn rating_metric_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[2.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0, 3.0], &[0.0, 0.0]).unwrap(), 1.5);
        assert!((rmse(&[0.0, 3.0], &[0.0, 0.0]).unwrap() - 2.121320).abs() < 1e-6);
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ties_break_by_lower_id() {
        let scores = [0.5, 0.5, 0.5, 0.9];
        assert_eq!(rank_full(&scores, &[], 3), 1);
        assert_eq!(rank_full(&scores, &[], 0), 2);
        assert_eq!(rank_full(&scores, &[], 2), 4);
        assert_eq!(rank_full(&scores, &[1], 2), 3);
        assert_eq!(top_k(&scores, &[], 10), vec![3, 0, 1, 2]);
        assert_eq!(top_k(&scores, &[3], 2), vec![0, 1]);
    }

    #[test]
    fn nan_scores_rank_last() {
        let scores = [f64::NAN, 0.1, -5.0];
        assert_eq!(rank_full(&scores, &[], 0), 3);
        assert_eq!(top_k(&scores, &[], 3), vec![1, 2, 0]);
    }

    fn held_fixture() -> HeldOut {
        HeldOut {
            n_items: 6,
            train: vec![vec![0, 1], vec![2], vec![0]],
            validation: vec![Some(2), Some(3), None],
            test: vec![Some(5), Some(4), None],
        }
    }

    #[test]
    fn full_ranking_excludes_train_and_other_held_out() {
        let held = held_fixture();
        // User 0 test item 5: candidates {3,4,5}; user 1 test item 4: {0,1,4,5}.
        let s = Table(vec![
            vec![9.0, 9.0, 9.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.5, 9.0, 9.0, 0.7, 0.0],
            vec![0.0; 6],
        ]);
        let r = evaluate_full_ranking(&s, &held, EvalTarget::Test, &DEFAULT_KS).unwrap();
        assert_eq!(r.n_users_evaluated, 2);
        assert_eq!(r.hr_at(1), Some(0.5));
        assert_eq!(r.hr_at(5), Some(1.0));
        let expect = (1.0 + 1.0 / 3f64.log2()) / 2.0;
        assert!((r.ndcg_at(5).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn sampled_with_zero_negatives_always_hits() {
        let held = held_fixture();
        let s = Table(vec![vec![0.0; 6]; 3]);
        let r = evaluate_sampled(&s, &held, EvalTarget::Test, 0, 1, &DEFAULT_KS).unwrap();
        assert!(r.hr.values().all(|&v| v == 1.0));
        assert_eq!(r.protocol, Protocol::Sampled(0));
    }

    #[test]
    fn sampled_covering_complement_equals_full() {
        let held = held_fixture();
        let s = Table(vec![
            vec![0.3, 0.2, 0.8, 0.1, 0.4, 0.3],
            vec![0.9, 0.1, 0.5, 0.2, 0.2, 0.6],
            vec![0.0; 6],
        ]);
        let full = evaluate_full_ranking(&s, &held, EvalTarget::Test, &DEFAULT_KS).unwrap();
        let samp = evaluate_sampled(&s, &held, EvalTarget::Test, 999, 1, &DEFAULT_KS).unwrap();
        assert_eq!(full.hr, samp.hr);
        assert_eq!(full.ndcg, samp.ndcg);
    }

    #[test]
    fn no_evaluable_users_is_an_error() {
        let held = HeldOut {
            n_items: 3,
            train: vec![vec![0]],
            validation: vec![None],
            test: vec![None],
        };
        let s = Table(vec![vec![0.0; 3]]);
        assert!(matches!(
            evaluate_full_ranking(&s, &held, EvalTarget::Test, &DEFAULT_KS),
            Err(HyperError::NoEvaluableUsers)
        ));
    }

    #[test]
    fn protocol_parsing() {
        assert_eq!("full".parse::<Protocol>().unwrap(), Protocol::Full);
        assert_eq!("sampled:999".parse::<Protocol>().unwrap(), Protocol::Sampled(999));
        assert_eq!(Protocol::Sampled(999).to_string(), "sampled:999");
        assert!("sampled:x".parse::<Protocol>().is_err());
    }

    #[test]
    fn report_rows_round_trip_through_csv() {
        let r = MetricsReport::from_ranks(&[1, 3, 12], &DEFAULT_KS, Protocol::Full).unwrap();
        let labels = RunLabels {
            dataset: "toy".into(),
            model: "cml".into(),
            space: "poincare".into(),
            dim: 10,
            seed: 7,
        };
        let rows = report_rows(&r, &labels);
        assert_eq!(rows.len(), 10);
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(REPORT_HEADER));
        assert_eq!(read_report_csv(&buf[..]).unwrap(), rows);
    }
}
