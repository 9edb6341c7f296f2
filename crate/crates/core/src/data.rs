//! Dataset ingestion, reindexing, splitting and negative sampling.
//!
//! Two interaction formats are read: MovieLens `.dat` (`user::item::rating::ts`)
//! and whitespace/tab separated `user item rating [ts]`. Trust lists are
//! `truster trustee [weight]`. Parsers keep raw external ids; [`build_dataset`]
//! maps them to dense 0-based ids in ascending external-id order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HyperError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionFormat {
    MovielensDat,
    Tsv,
}

impl FromStr for InteractionFormat {
    type Err = HyperError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens_dat" | "dat" => Ok(InteractionFormat::MovielensDat),
            "tsv" => Ok(InteractionFormat::Tsv),
            other => Err(HyperError::InvalidArgument(format!(
                "unknown interaction format {other:?} (expected movielens_dat or tsv)"
            ))),
        }
    }
}

/// An interaction as read from disk, with external ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawInteraction {
    pub user: u64,
    pub item: u64,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawEdge {
    pub truster: u64,
    pub trustee: u64,
}

/// An interaction with dense internal ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SocialEdge {
    pub truster: usize,
    pub trustee: usize,
}

/// Line accounting for one parsed file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    /// Non-blank, non-comment lines.
    pub lines: usize,
    pub malformed: usize,
    /// Up to the first ten malformed lines as (1-based line number, reason).
    pub errors: Vec<(usize, String)>,
    pub self_loops: usize,
}

impl ParseReport {
    fn reject(&mut self, line: usize, why: String) {
        self.malformed += 1;
        if self.errors.len() < 10 {
            self.errors.push((line, why));
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        // More than 1% malformed lines is a hard error.
        if self.malformed * 100 > self.lines {
            let (first_line, first_message) = self.errors.first().cloned().unwrap_or_default();
            return Err(HyperError::TooManyMalformed {
                path: path.to_path_buf(),
                malformed: self.malformed,
                total: self.lines,
                first_line,
                first_message,
            });
        }
        if self.malformed > 0 {
            log::warn!(
                "{}: skipped {} malformed line(s), first at line {}",
                path.display(),
                self.malformed,
                self.errors[0].0
            );
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HyperError::io(path, e))
}

fn parse_timestamp(s: &str) -> Option<i64> {
    s.parse::<i64>()
        .ok()
        .or_else(|| s.parse::<f64>().ok().filter(|t| t.is_finite()).map(|t| t as i64))
}

fn parse_interaction_line(line: &str, format: InteractionFormat) -> std::result::Result<RawInteraction, String> {
    let fields: Vec<&str> = match format {
        InteractionFormat::MovielensDat => line.split("::").map(str::trim).collect(),
        InteractionFormat::Tsv => line.split_whitespace().collect(),
    };
    let min_fields = match format {
        InteractionFormat::MovielensDat => 4,
        InteractionFormat::Tsv => 3,
    };
    if fields.len() < min_fields || fields.len() > 4 {
        return Err(format!("expected {min_fields}-4 fields, found {}", fields.len()));
    }
    let user = fields[0].parse().map_err(|_| format!("bad user id {:?}", fields[0]))?;
    let item = fields[1].parse().map_err(|_| format!("bad item id {:?}", fields[1]))?;
    let rating: f64 = fields[2].parse().map_err(|_| format!("bad rating {:?}", fields[2]))?;
    if !rating.is_finite() {
        return Err(format!("non-finite rating {:?}", fields[2]));
    }
    let timestamp = match fields.get(3) {
        Some(t) => parse_timestamp(t).ok_or_else(|| format!("bad timestamp {t:?}"))?,
        None => 0,
    };
    Ok(RawInteraction {
        user,
        item,
        rating,
        timestamp,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses interactions from text; `path` only labels errors.
pub fn parse_interactions_str(
    text: &str,
    format: InteractionFormat,
    path: &Path,
) -> Result<(Vec<RawInteraction>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        report.lines += 1;
        match parse_interaction_line(line, format) {
            Ok(r) => out.push(r),
            Err(why) => report.reject(no, why),
        }
    }
    if report.lines == 0 {
        log::warn!("{}: no interactions", path.display());
    }
    report.check(path)?;
    Ok((out, report))
}

pub fn parse_interactions(path: &Path, format: InteractionFormat) -> Result<(Vec<RawInteraction>, ParseReport)> {
    parse_interactions_str(&read_text(path)?, format, path)
}

pub fn parse_trust_str(text: &str, path: &Path) -> Result<(Vec<RawEdge>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for (no, line) in content_lines(text) {
        report.lines += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            report.reject(no, format!("expected 2-3 fields, found {}", fields.len()));
            continue;
        }
        let (Ok(truster), Ok(trustee)) = (fields[0].parse::<u64>(), fields[1].parse::<u64>()) else {
            report.reject(no, format!("bad user ids {:?} {:?}", fields[0], fields[1]));
            continue;
        };
        if truster == trustee {
            report.self_loops += 1;
            continue;
        }
        out.push(RawEdge { truster, trustee });
    }
    if report.self_loops > 0 {
        log::info!("{}: dropped {} self-loop(s)", path.display(), report.self_loops);
    }
    report.check(path)?;
    Ok((out, report))
}

/// Reads a trust list; self-loops are dropped and counted.
pub fn parse_trust(path: &Path) -> Result<(Vec<RawEdge>, ParseReport)> {
    parse_trust_str(&read_text(path)?, path)
}

/// Directed trust graph with per-user sorted out-neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    pub edges: Vec<SocialEdge>,
    pub neighbors: Vec<Vec<usize>>,
}

impl SocialGraph {
    /// Deduplicates and drops self-loops.
    pub fn new(n_users: usize, edges: &[SocialEdge]) -> Result<Self> {
        let mut edges: Vec<SocialEdge> = edges.iter().copied().filter(|e| e.truster != e.trustee).collect();
        for e in &edges {
            for id in [e.truster, e.trustee] {
                if id >= n_users {
                    return Err(HyperError::IndexOutOfRange {
                        index: id,
                        len: n_users,
                    });
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut neighbors = vec![Vec::new(); n_users];
        for e in &edges {
            neighbors[e.truster].push(e.trustee);
        }
        Ok(SocialGraph { edges, neighbors })
    }
}

/// Users, items, interactions and (optionally) the trust graph, all with
/// dense ids.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub n_users: usize,
    pub n_items: usize,
    /// In input order, one entry per distinct (user, item).
    pub interactions: Vec<Interaction>,
    /// Sorted item ids per user.
    pub by_user: Vec<Vec<usize>>,
    pub social: Option<SocialGraph>,
    pub rating_range: (f64, f64),
    /// External id of each internal user / item.
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

impl InteractionDataset {
    /// Builds a dataset from already-dense ids. External ids default to the
    /// internal ones.
    pub fn from_parts(
        n_users: usize,
        n_items: usize,
        interactions: Vec<Interaction>,
        social: Option<&[SocialEdge]>,
    ) -> Result<Self> {
        if interactions.is_empty() {
            return Err(HyperError::Empty("dataset has no interactions".into()));
        }
        let mut by_user = vec![Vec::new(); n_users];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for it in &interactions {
            if it.user >= n_users {
                return Err(HyperError::IndexOutOfRange {
                    index: it.user,
                    len: n_users,
                });
            }
            if it.item >= n_items {
                return Err(HyperError::IndexOutOfRange {
                    index: it.item,
                    len: n_items,
                });
            }
            by_user[it.user].push(it.item);
            lo = lo.min(it.rating);
            hi = hi.max(it.rating);
        }
        for items in &mut by_user {
            items.sort_unstable();
            let before = items.len();
            items.dedup();
            if items.len() != before {
                return Err(HyperError::InvalidArgument("duplicate (user, item) pair".into()));
            }
        }
        let social = social.map(|e| SocialGraph::new(n_users, e)).transpose()?;
        Ok(InteractionDataset {
            n_users,
            n_items,
            interactions,
            by_user,
            social,
            rating_range: (lo, hi),
            user_ids: (0..n_users as u64).collect(),
            item_ids: (0..n_items as u64).collect(),
        })
    }

    pub fn density(&self) -> f64 {
        self.interactions.len() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    pub fn stats(&self) -> DatasetStats {
        let social_edges = self.social.as_ref().map(|s| s.edges.len());
        DatasetStats {
            users: self.n_users,
            items: self.n_items,
            ratings: self.interactions.len(),
            density: self.density(),
            social_edges,
            social_density: social_edges.map(|e| e as f64 / (self.n_users as f64 * self.n_users as f64)),
        }
    }
}

/// Summary counts of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub density: f64,
    pub social_edges: Option<usize>,
    pub social_density: Option<f64>,
}

impl DatasetStats {
    /// `key=value` lines; densities as percentages with four decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "users={}", self.users);
        let _ = writeln!(s, "items={}", self.items);
        let _ = writeln!(s, "ratings={}", self.ratings);
        let _ = writeln!(s, "density={:.4}%", self.density * 100.0);
        if let (Some(e), Some(d)) = (self.social_edges, self.social_density) {
            let _ = writeln!(s, "social_edges={e}");
            let _ = writeln!(s, "social_density={:.4}%", d * 100.0);
        }
        s
    }
}

/// Reindexes users and items to dense ids (ascending external id), keeps
/// only ratings ≥ `min_rating_as_positive`, and for duplicate (user, item)
/// pairs keeps the latest timestamp (later line on ties). Trust edges whose
/// endpoints have no interactions are dropped.
pub fn build_dataset(
    interactions: &[RawInteraction],
    edges: &[RawEdge],
    min_rating_as_positive: f64,
) -> Result<InteractionDataset> {
    let kept: Vec<(usize, &RawInteraction)> = interactions
        .iter()
        .enumerate()
        .filter(|(_, r)| r.rating >= min_rating_as_positive)
        .collect();
    if kept.is_empty() {
        return Err(HyperError::Empty("no interactions to build a dataset from".into()));
    }

    let mut latest: HashMap<(u64, u64), (i64, usize)> = HashMap::with_capacity(kept.len());
    for &(seq, r) in &kept {
        let entry = latest.entry((r.user, r.item)).or_insert((r.timestamp, seq));
        if (r.timestamp, seq) >= *entry {
            *entry = (r.timestamp, seq);
        }
    }
    let mut survivors: Vec<usize> = latest.into_values().map(|(_, seq)| seq).collect();
    survivors.sort_unstable();

    let mut user_ids: Vec<u64> = survivors.iter().map(|&s| interactions[s].user).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = survivors.iter().map(|&s| interactions[s].item).collect();
    item_ids.sort_unstable();
    item_ids.dedup();
    let user_index: HashMap<u64, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let item_index: HashMap<u64, usize> = item_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();

    let dense: Vec<Interaction> = survivors
        .iter()
        .map(|&s| {
            let r = &interactions[s];
            Interaction {
                user: user_index[&r.user],
                item: item_index[&r.item],
                rating: r.rating,
                timestamp: r.timestamp,
            }
        })
        .collect();

    let social: Option<Vec<SocialEdge>> = if edges.is_empty() {
        None
    } else {
        let mapped: Vec<SocialEdge> = edges
            .iter()
            .filter_map(|e| {
                Some(SocialEdge {
                    truster: *user_index.get(&e.truster)?,
                    trustee: *user_index.get(&e.trustee)?,
                })
            })
            .collect();
        let dropped = edges.len() - mapped.len();
        if dropped > 0 {
            log::info!("dropped {dropped} trust edge(s) touching users without interactions");
        }
        Some(mapped)
    };

    let mut ds = InteractionDataset::from_parts(user_ids.len(), item_ids.len(), dense, social.as_deref())?;
    ds.user_ids = user_ids;
    ds.item_ids = item_ids;
    Ok(ds)
}

/// Writes `interactions.tsv` (`user\titem\trating\ttimestamp`, internal
/// ids), `idmap.tsv` (`kind\tinternal\texternal`) and, when present,
/// `trust.tsv`.
pub fn export_canonical(ds: &InteractionDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HyperError::io(dir, e))?;
    let mut inter = String::with_capacity(ds.interactions.len() * 24);
    for it in &ds.interactions {
        let _ = writeln!(inter, "{}\t{}\t{}\t{}", it.user, it.item, it.rating, it.timestamp);
    }
    write_file(&dir.join("interactions.tsv"), &inter)?;

    let mut idmap = String::new();
    for (i, ext) in ds.user_ids.iter().enumerate() {
        let _ = writeln!(idmap, "user\t{i}\t{ext}");
    }
    for (i, ext) in ds.item_ids.iter().enumerate() {
        let _ = writeln!(idmap, "item\t{i}\t{ext}");
    }
    write_file(&dir.join("idmap.tsv"), &idmap)?;

    if let Some(social) = &ds.social {
        let mut trust = String::new();
        for e in &social.edges {
            let _ = writeln!(trust, "{}\t{}", e.truster, e.trustee);
        }
        write_file(&dir.join("trust.tsv"), &trust)?;
    }
    Ok(())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| HyperError::io(path, e))
}

/// Reads a split written by [`write_split`]. Non-evaluable users are those
/// with no test item.
pub fn read_split(dir: &Path, kind: SplitKind, n_users: usize) -> Result<Split> {
    let read = |name: &str| -> Result<Vec<Interaction>> {
        let (raw, _) = parse_interactions(&dir.join(name), InteractionFormat::Tsv)?;
        Ok(raw
            .iter()
            .map(|r| Interaction {
                user: r.user as usize,
                item: r.item as usize,
                rating: r.rating,
                timestamp: r.timestamp,
            })
            .collect())
    };
    let (train, validation, test) = (read("train.tsv")?, read("validation.tsv")?, read("test.tsv")?);
    for it in train.iter().chain(&validation).chain(&test) {
        if it.user >= n_users {
            return Err(HyperError::IndexOutOfRange {
                index: it.user,
                len: n_users,
            });
        }
    }
    let non_evaluable = if kind == SplitKind::LeaveOneOut {
        let mut has_test = vec![false; n_users];
        let mut has_any = vec![false; n_users];
        for it in &test {
            has_test[it.user] = true;
        }
        for it in &train {
            has_any[it.user] = true;
        }
        (0..n_users).filter(|&u| has_any[u] && !has_test[u]).collect()
    } else {
        Vec::new()
    };
    Ok(Split {
        kind,
        train,
        validation,
        test,
        non_evaluable,
    })
}

/// Reads a directory written by [`export_canonical`].
pub fn load_canonical(dir: &Path) -> Result<InteractionDataset> {
    let idmap_path = dir.join("idmap.tsv");
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    for (no, line) in content_lines(&read_text(&idmap_path)?) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || HyperError::TooManyMalformed {
            path: idmap_path.clone(),
            malformed: 1,
            total: 1,
            first_line: no,
            first_message: format!("bad idmap line {line:?}"),
        };
        if f.len() != 3 {
            return Err(bad());
        }
        let internal: usize = f[1].parse().map_err(|_| bad())?;
        let external: u64 = f[2].parse().map_err(|_| bad())?;
        let target = match f[0] {
            "user" => &mut user_ids,
            "item" => &mut item_ids,
            _ => return Err(bad()),
        };
        if internal != target.len() {
            return Err(bad());
        }
        target.push(external);
    }

    let inter_path = dir.join("interactions.tsv");
    let (raw, _) = parse_interactions(&inter_path, InteractionFormat::Tsv)?;
    let interactions: Vec<Interaction> = raw
        .iter()
        .map(|r| Interaction {
            user: r.user as usize,
            item: r.item as usize,
            rating: r.rating,
            timestamp: r.timestamp,
        })
        .collect();

    let trust_path = dir.join("trust.tsv");
    let social: Option<Vec<SocialEdge>> = if trust_path.exists() {
        let (edges, _) = parse_trust(&trust_path)?;
        Some(
            edges
                .iter()
                .map(|e| SocialEdge {
                    truster: e.truster as usize,
                    trustee: e.trustee as usize,
                })
                .collect(),
        )
    } else {
        None
    };
    let mut ds = InteractionDataset::from_parts(user_ids.len(), item_ids.len(), interactions, social.as_deref())?;
    ds.user_ids = user_ids;
    ds.item_ids = item_ids;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    LeaveOneOut,
    Ratio,
}

impl FromStr for SplitKind {
    type Err = HyperError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loo" | "leave_one_out" => Ok(SplitKind::LeaveOneOut),
            "ratio" => Ok(SplitKind::Ratio),
            other => Err(HyperError::InvalidArgument(format!(
                "unknown split {other:?} (expected loo or ratio)"
            ))),
        }
    }
}

/// Train / validation / test partition of a dataset's interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub kind: SplitKind,
    pub train: Vec<Interaction>,
    pub validation: Vec<Interaction>,
    pub test: Vec<Interaction>,
    /// Users excluded from leave-one-out evaluation (fewer than 3 interactions).
    pub non_evaluable: Vec<usize>,
}

/// Per user: the last interaction goes to test, the second-to-last to
/// validation, the rest to train. Ties in time keep input order. Users with
/// fewer than three interactions stay entirely in train and are reported as
/// non-evaluable.
pub fn leave_one_out_split(ds: &InteractionDataset) -> Split {
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); ds.n_users];
    for (i, it) in ds.interactions.iter().enumerate() {
        per_user[it.user].push(i);
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Part {
        Train,
        Validation,
        Test,
    }
    let mut part = vec![Part::Train; ds.interactions.len()];
    let mut non_evaluable = Vec::new();
    for (user, idx) in per_user.iter_mut().enumerate() {
        if idx.len() < 3 {
            if !idx.is_empty() {
                non_evaluable.push(user);
            }
            continue;
        }
        idx.sort_by_key(|&i| ds.interactions[i].timestamp);
        let n = idx.len();
        part[idx[n - 1]] = Part::Test;
        part[idx[n - 2]] = Part::Validation;
    }
    if !non_evaluable.is_empty() {
        log::info!(
            "{} user(s) with fewer than 3 interactions excluded from evaluation",
            non_evaluable.len()
        );
    }
    let pick = |p: Part| -> Vec<Interaction> {
        ds.interactions
            .iter()
            .zip(&part)
            .filter(|(_, q)| **q == p)
            .map(|(it, _)| *it)
            .collect()
    };
    Split {
        kind: SplitKind::LeaveOneOut,
        train: pick(Part::Train),
        validation: pick(Part::Validation),
        test: pick(Part::Test),
        non_evaluable,
    }
}

/// Uniform random 60/20/20 partition of the interactions.
pub fn ratio_split(ds: &InteractionDataset, seed: u64) -> Split {
    let n = ds.interactions.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = (n as f64 * 0.2).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut val: Vec<usize> = order[n_test..n_test + n_val].to_vec();
    let mut train: Vec<usize> = order[n_test + n_val..].to_vec();
    for part in [&mut test, &mut val, &mut train] {
        part.sort_unstable();
    }
    let take = |idx: &[usize]| idx.iter().map(|&i| ds.interactions[i]).collect();
    Split {
        kind: SplitKind::Ratio,
        train: take(&train),
        validation: take(&val),
        test: take(&test),
        non_evaluable: Vec::new(),
    }
}

/// Writes `train.tsv`, `validation.tsv` and `test.tsv` into `dir`.
pub fn write_split(split: &Split, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HyperError::io(dir, e))?;
    for (name, part) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        let mut s = String::new();
        for it in part {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", it.user, it.item, it.rating, it.timestamp);
        }
        write_file(&dir.join(format!("{name}.tsv")), &s)?;
    }
    Ok(())
}

/// A sampled (user, positive item, negative item) unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingTriplet {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// A sampled (user, trusted user, untrusted user) unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocialTriplet {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Membership index over training positives and trust lists.
#[derive(Debug, Clone)]
pub struct TrainIndex {
    pub n_users: usize,
    pub n_items: usize,
    pub items: Vec<Vec<usize>>,
    pub neighbors: Vec<Vec<usize>>,
}

impl TrainIndex {
    pub fn new(n_users: usize, n_items: usize, train: &[Interaction], social: Option<&SocialGraph>) -> Self {
        let mut items = vec![Vec::new(); n_users];
        for it in train {
            items[it.user].push(it.item);
        }
        for v in &mut items {
            v.sort_unstable();
            v.dedup();
        }
        let neighbors = match social {
            Some(s) => s.neighbors.clone(),
            None => vec![Vec::new(); n_users],
        };
        TrainIndex {
            n_users,
            n_items,
            items,
            neighbors,
        }
    }

    pub fn from_split(ds: &InteractionDataset, split: &Split) -> Self {
        Self::new(ds.n_users, ds.n_items, &split.train, ds.social.as_ref())
    }

    pub fn is_positive(&self, user: usize, item: usize) -> bool {
        self.items[user].binary_search(&item).is_ok()
    }

    fn check_user(&self, user: usize) -> Result<()> {
        if user >= self.n_users {
            return Err(HyperError::IndexOutOfRange {
                index: user,
                len: self.n_users,
            });
        }
        Ok(())
    }
}

/// Uniform draw from `0..n` excluding the sorted set `excluded`.
fn sample_complement<R: Rng + ?Sized>(n: usize, excluded: &[usize], rng: &mut R) -> Option<usize> {
    let free = n.checked_sub(excluded.len())?;
    if free == 0 {
        return None;
    }
    if excluded.len() * 2 <= n {
        loop {
            let c = rng.random_range(0..n);
            if excluded.binary_search(&c).is_err() {
                return Some(c);
            }
        }
    }
    // Dense exclusion: pick the k-th free id directly.
    let mut k = rng.random_range(0..free);
    let mut prev = 0;
    for &e in excluded {
        let gap = e - prev;
        if k < gap {
            return Some(prev + k);
        }
        k -= gap;
        prev = e + 1;
    }
    Some(prev + k)
}

/// Uniform negative item for `user` (rejection sampling over non-positives).
pub fn sample_negative_item<R: Rng + ?Sized>(index: &TrainIndex, user: usize, rng: &mut R) -> Result<usize> {
    index.check_user(user)?;
    sample_complement(index.n_items, &index.items[user], rng).ok_or(HyperError::Unsatisfiable { user })
}

/// Uniform positive and uniform negative item for `user`.
pub fn sample_bpr_triplet<R: Rng + ?Sized>(index: &TrainIndex, user: usize, rng: &mut R) -> Result<TrainingTriplet> {
    index.check_user(user)?;
    let pos = &index.items[user];
    if pos.is_empty() {
        return Err(HyperError::InvalidArgument(format!(
            "user {user} has no training positives"
        )));
    }
    let positive = pos[rng.random_range(0..pos.len())];
    let negative = sample_negative_item(index, user, rng)?;
    Ok(TrainingTriplet {
        user,
        positive,
        negative,
    })
}

/// Uniform trusted neighbor and a uniform user outside the trust list (and
/// not `user` itself). `None` when the user trusts nobody.
pub fn sample_social_pair<R: Rng + ?Sized>(
    index: &TrainIndex,
    user: usize,
    rng: &mut R,
) -> Result<Option<SocialTriplet>> {
    index.check_user(user)?;
    let nb = &index.neighbors[user];
    if nb.is_empty() {
        return Ok(None);
    }
    let positive = nb[rng.random_range(0..nb.len())];
    let mut excluded = nb.clone();
    if let Err(pos) = excluded.binary_search(&user) {
        excluded.insert(pos, user);
    }
    let negative = sample_complement(index.n_users, &excluded, rng).ok_or(HyperError::Unsatisfiable { user })?;
    Ok(Some(SocialTriplet {
        user,
        positive,
        negative,
    }))
}
