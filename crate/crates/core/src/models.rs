//! Projection and distance recommenders, their losses and the training loop.
//!
//! Every model keeps a user table and an item table of unconstrained
//! parameters. A batch materializes each touched row once, accumulates the
//! loss gradient on the materialized points, then pulls it back to the
//! parameters; the only space-dependent steps are materialization and the
//! distance/inner-product kernels.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    sample_negative_item, sample_social_pair, Interaction, InteractionDataset, SocialGraph, SocialTriplet, Split,
    TrainIndex, TrainingTriplet,
};
use crate::error::{HyperError, Result};
use crate::eval::{self, EvalTarget, HeldOut, RatingPredictor, Scorer};
use crate::optim::{clip_global_norm, clip_rows, post_step_project, AdamConfig, AdamState, SparseGrad};
use crate::spaces::{read_table, write_table, EmbeddingTable, SpaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MfBpr,
    MfRating,
    Cml,
    Scml,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MfBpr => "mf_bpr",
            ModelKind::MfRating => "mf_rating",
            ModelKind::Cml => "cml",
            ModelKind::Scml => "scml",
        }
    }

    /// Scores by distance rather than inner product.
    pub fn is_distance(self) -> bool {
        matches!(self, ModelKind::Cml | ModelKind::Scml)
    }

    pub fn has_biases(self) -> bool {
        !self.is_distance()
    }
}

impl FromStr for ModelKind {
    type Err = HyperError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf_bpr" => Ok(ModelKind::MfBpr),
            "mf_rating" => Ok(ModelKind::MfRating),
            "cml" => Ok(ModelKind::Cml),
            "scml" => Ok(ModelKind::Scml),
            other => Err(HyperError::InvalidArgument(format!(
                "unknown model {other:?} (expected mf_bpr, mf_rating, cml or scml)"
            ))),
        }
    }
}

/// Default item/social margin of the distance models for `space`.
pub fn default_margin(space: &SpaceKind) -> f64 {
    if space.is_hyperbolic() {
        2.0
    } else {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub space: SpaceKind,
    pub dim: usize,
    pub margin_item: f64,
    pub margin_social: f64,
    pub social_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub init_scale: f64,
    /// WARP-style weighting of the hardest sampled negative; off by default.
    pub rank_weighting: bool,
    /// Row-norm bound for Euclidean distance models.
    pub euclidean_max_norm: Option<f64>,
    /// Global gradient-norm bound per batch.
    pub grad_clip: Option<f64>,
}

impl ModelConfig {
    pub fn new(model: ModelKind, space: SpaceKind, dim: usize) -> Self {
        let margin = default_margin(&space);
        ModelConfig {
            model,
            space,
            dim,
            margin_item: margin,
            margin_social: margin,
            social_weight: 0.1,
            lr: 0.01,
            batch_size: 1000,
            epochs: 30,
            seed: 0,
            negatives_per_positive: if model.is_distance() { 10 } else { 1 },
            init_scale: 0.01,
            rank_weighting: false,
            euclidean_max_norm: if model.is_distance() { Some(1.0) } else { None },
            grad_clip: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HyperError::InvalidArgument(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        for (name, v) in [
            ("margin_item", self.margin_item),
            ("margin_social", self.margin_social),
            ("social_weight", self.social_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a finite value ≥ 0, got {v}"));
            }
        }
        for (name, v) in [("lr", self.lr), ("init_scale", self.init_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.batch_size == 0 || self.negatives_per_positive == 0 {
            return bad("batch_size and negatives_per_positive must be at least 1".into());
        }
        for (name, v) in [
            ("euclidean_max_norm", self.euclidean_max_norm),
            ("grad_clip", self.grad_clip),
        ] {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return bad(format!("{name} must be positive, got {x}"));
                }
            }
        }
        Ok(())
    }
}

/// `−ln σ(pos − neg)`, evaluated without overflow.
pub fn bpr_loss(pos_score: f64, neg_score: f64) -> f64 {
    softplus(neg_score - pos_score)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max(margin + d_pos² − d_neg², 0)` on raw distances.
pub fn hinge_triplet_loss(d_pos: f64, d_neg: f64, margin: f64) -> f64 {
    (margin + d_pos * d_pos - d_neg * d_neg).max(0.0)
}

pub fn mf_rating_loss(pred: f64, observed: f64) -> f64 {
    (pred - observed) * (pred - observed)
}

/// Training units of one mini-batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub item_triplets: Vec<TrainingTriplet>,
    pub social: Vec<SocialTriplet>,
    pub ratings: Vec<Interaction>,
}

/// Summed loss of a batch with gradients for both tables.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub loss: f64,
    /// Number of item-side loss terms (triplets or ratings).
    pub terms: usize,
    pub users: SparseGrad,
    pub items: SparseGrad,
}

/// Materialized rows of one table with point-gradient accumulators.
struct Cache<'a> {
    space: SpaceKind,
    table: &'a EmbeddingTable,
    dim: usize,
    index: HashMap<usize, usize>,
    rows: Vec<usize>,
    points: Vec<f64>,
    grads: Vec<f64>,
    bias_grads: Vec<f64>,
}

impl<'a> Cache<'a> {
    fn new(space: SpaceKind, table: &'a EmbeddingTable) -> Self {
        Cache {
            space,
            table,
            dim: table.dim(),
            index: HashMap::new(),
            rows: Vec::new(),
            points: Vec::new(),
            grads: Vec::new(),
            bias_grads: Vec::new(),
        }
    }

    fn slot(&mut self, row: usize) -> Result<usize> {
        if let Some(&s) = self.index.get(&row) {
            return Ok(s);
        }
        if row >= self.table.rows() {
            return Err(HyperError::IndexOutOfRange {
                index: row,
                len: self.table.rows(),
            });
        }
        let s = self.rows.len();
        self.index.insert(row, s);
        self.rows.push(row);
        let start = self.points.len();
        self.points.resize(start + self.dim, 0.0);
        self.space
            .materialize_into(self.table.row(row), &mut self.points[start..]);
        self.grads.resize(start + self.dim, 0.0);
        self.bias_grads.push(0.0);
        Ok(s)
    }

    fn point(&self, s: usize) -> &[f64] {
        &self.points[s * self.dim..(s + 1) * self.dim]
    }

    fn bias(&self, s: usize) -> f64 {
        self.table.bias(self.rows[s])
    }

    fn add_grad(&mut self, s: usize, scale: f64, g: &[f64]) {
        for (a, b) in self.grads[s * self.dim..(s + 1) * self.dim].iter_mut().zip(g) {
            *a += scale * b;
        }
    }

    fn into_sparse(self) -> SparseGrad {
        let mut out = SparseGrad::new(self.dim);
        for (s, &row) in self.rows.iter().enumerate() {
            let g = &self.grads[s * self.dim..(s + 1) * self.dim];
            self.space.pullback(self.table.row(row), g, out.row_mut(row));
            if self.table.biases().is_some() {
                out.add_bias(row, self.bias_grads[s]);
            }
        }
        out
    }
}

/// Gradient scratch for one pairwise kernel evaluation.
struct Pair {
    gu: Vec<f64>,
    gv: Vec<f64>,
}

impl Pair {
    fn new(dim: usize) -> Self {
        Pair {
            gu: vec![0.0; dim],
            gv: vec![0.0; dim],
        }
    }

    fn dist_sq(&mut self, space: &SpaceKind, u: &[f64], v: &[f64]) -> f64 {
        self.gu.iter_mut().for_each(|x| *x = 0.0);
        self.gv.iter_mut().for_each(|x| *x = 0.0);
        space.distance_sq_grad(u, v, 1.0, &mut self.gu, &mut self.gv)
    }

    fn inner(&mut self, space: &SpaceKind, u: &[f64], v: &[f64]) -> f64 {
        self.gu.iter_mut().for_each(|x| *x = 0.0);
        self.gv.iter_mut().for_each(|x| *x = 0.0);
        space.inner_grad(u, v, 1.0, &mut self.gu, &mut self.gv)
    }
}

/// Hinge terms over item triplets (and weighted social triplets) sharing
/// one pair of caches. Returns the summed loss.
fn hinge_terms(
    config: &ModelConfig,
    n_items: usize,
    triplets: &[TrainingTriplet],
    social: &[SocialTriplet],
    users: &mut Cache,
    items: &mut Cache,
) -> Result<f64> {
    let space = config.space;
    let dim = config.dim;
    let mut pos = Pair::new(dim);
    let mut neg = Pair::new(dim);
    let mut loss = 0.0;

    let mut groups: Vec<&[TrainingTriplet]> = Vec::new();
    if config.rank_weighting {
        groups.extend(triplets.chunk_by(|a, b| a.user == b.user && a.positive == b.positive));
    } else {
        groups.extend(triplets.chunks(1));
    }

    for group in groups {
        let t0 = group[0];
        let su = users.slot(t0.user)?;
        let sp = items.slot(t0.positive)?;
        let dp2 = pos.dist_sq(&space, users.point(su), items.point(sp));
        if !config.rank_weighting {
            let sn = items.slot(t0.negative)?;
            let dn2 = neg.dist_sq(&space, users.point(su), items.point(sn));
            let h = config.margin_item + dp2 - dn2;
            if h > 0.0 {
                loss += h;
                users.add_grad(su, 1.0, &pos.gu);
                items.add_grad(sp, 1.0, &pos.gv);
                users.add_grad(su, -1.0, &neg.gu);
                items.add_grad(sn, -1.0, &neg.gv);
            }
            continue;
        }
        // Hardest sampled negative, weighted by the estimated rank of the positive.
        let mut active = 0usize;
        let mut hardest: Option<(usize, f64)> = None;
        for t in group {
            let sn = items.slot(t.negative)?;
            let dn2 = space.distance(users.point(su), items.point(sn)).powi(2);
            if config.margin_item + dp2 - dn2 > 0.0 {
                active += 1;
            }
            if hardest.is_none_or(|(_, d)| dn2 < d) {
                hardest = Some((sn, dn2));
            }
        }
        if active == 0 {
            continue;
        }
        let (sn, _) = hardest.expect("non-empty group");
        let dn2 = neg.dist_sq(&space, users.point(su), items.point(sn));
        let rank = (n_items * active / group.len()) as f64;
        let w = rank.ln_1p();
        let h = config.margin_item + dp2 - dn2;
        if h > 0.0 && w > 0.0 {
            loss += w * h;
            users.add_grad(su, w, &pos.gu);
            items.add_grad(sp, w, &pos.gv);
            users.add_grad(su, -w, &neg.gu);
            items.add_grad(sn, -w, &neg.gv);
        }
    }

    if config.social_weight > 0.0 {
        let lambda = config.social_weight;
        for s in social {
            let si = users.slot(s.user)?;
            let sm = users.slot(s.positive)?;
            let sn = users.slot(s.negative)?;
            let dm2 = pos.dist_sq(&space, users.point(si), users.point(sm));
            let dn2 = neg.dist_sq(&space, users.point(si), users.point(sn));
            let h = config.margin_social + dm2 - dn2;
            if h > 0.0 {
                loss += lambda * h;
                users.add_grad(si, lambda, &pos.gu);
                users.add_grad(sm, lambda, &pos.gv);
                users.add_grad(si, -lambda, &neg.gu);
                users.add_grad(sn, -lambda, &neg.gv);
            }
        }
    }
    Ok(loss)
}

/// Item loss plus `λ` times the social loss, with gradients through
/// materialization. `λ = 0` gives the plain item loss.
#[allow(clippy::too_many_arguments)]
pub fn scml_loss(
    item_triplets: &[TrainingTriplet],
    social_pairs: &[SocialTriplet],
    lambda: f64,
    m_item: f64,
    m_so: f64,
    space: SpaceKind,
    users: &EmbeddingTable,
    items: &EmbeddingTable,
) -> Result<BatchLoss> {
    let mut config = ModelConfig::new(ModelKind::Scml, space, users.dim());
    config.margin_item = m_item;
    config.margin_social = m_so;
    config.social_weight = lambda;
    let mut uc = Cache::new(space, users);
    let mut ic = Cache::new(space, items);
    let loss = hinge_terms(&config, items.rows(), item_triplets, social_pairs, &mut uc, &mut ic)?;
    Ok(BatchLoss {
        loss,
        terms: item_triplets.len(),
        users: uc.into_sparse(),
        items: ic.into_sparse(),
    })
}

/// A trained or initialized model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub users: EmbeddingTable,
    pub items: EmbeddingTable,
    /// Constant offset of rating predictions (mean training rating).
    pub global_mean: f64,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Model {
    pub fn init(config: ModelConfig, n_users: usize, n_items: usize, global_mean: f64) -> Result<Self> {
        config.validate()?;
        let mut users = EmbeddingTable::init(n_users, config.dim, config.init_scale, derive_seed(config.seed, 1))?;
        let mut items = EmbeddingTable::init(n_items, config.dim, config.init_scale, derive_seed(config.seed, 2))?;
        if config.model.has_biases() {
            users = users.with_biases();
            items = items.with_biases();
        }
        Ok(Model {
            config,
            users,
            items,
            global_mean,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.rows()
    }

    pub fn n_items(&self) -> usize {
        self.items.rows()
    }

    /// Summed loss of `batch` and its gradients with respect to the stored
    /// parameters.
    pub fn batch_loss(&self, batch: &Batch) -> Result<BatchLoss> {
        let config = &self.config;
        let space = config.space;
        let mut uc = Cache::new(space, &self.users);
        let mut ic = Cache::new(space, &self.items);
        let (loss, terms) = match config.model {
            ModelKind::Cml | ModelKind::Scml => {
                let social: &[SocialTriplet] = if config.model == ModelKind::Scml {
                    &batch.social
                } else {
                    &[]
                };
                let l = hinge_terms(config, self.n_items(), &batch.item_triplets, social, &mut uc, &mut ic)?;
                (l, batch.item_triplets.len())
            }
            ModelKind::MfBpr => {
                let mut pos = Pair::new(config.dim);
                let mut neg = Pair::new(config.dim);
                let mut loss = 0.0;
                for t in &batch.item_triplets {
                    let su = uc.slot(t.user)?;
                    let sp = ic.slot(t.positive)?;
                    let sn = ic.slot(t.negative)?;
                    let ip = pos.inner(&space, uc.point(su), ic.point(sp));
                    let inn = neg.inner(&space, uc.point(su), ic.point(sn));
                    let gap = (ip + ic.bias(sp)) - (inn + ic.bias(sn));
                    loss += softplus(-gap);
                    let g = -sigmoid(-gap);
                    uc.add_grad(su, g, &pos.gu);
                    ic.add_grad(sp, g, &pos.gv);
                    uc.add_grad(su, -g, &neg.gu);
                    ic.add_grad(sn, -g, &neg.gv);
                    ic.bias_grads[sp] += g;
                    ic.bias_grads[sn] -= g;
                }
                (loss, batch.item_triplets.len())
            }
            ModelKind::MfRating => {
                let mut pair = Pair::new(config.dim);
                let mut loss = 0.0;
                for it in &batch.ratings {
                    let su = uc.slot(it.user)?;
                    let si = ic.slot(it.item)?;
                    let ip = pair.inner(&space, uc.point(su), ic.point(si));
                    let pred = self.global_mean + ip + uc.bias(su) + ic.bias(si);
                    loss += mf_rating_loss(pred, it.rating);
                    let g = 2.0 * (pred - it.rating);
                    uc.add_grad(su, g, &pair.gu);
                    ic.add_grad(si, g, &pair.gv);
                    uc.bias_grads[su] += g;
                    ic.bias_grads[si] += g;
                }
                (loss, batch.ratings.len())
            }
        };
        Ok(BatchLoss {
            loss,
            terms,
            users: uc.into_sparse(),
            items: ic.into_sparse(),
        })
    }

    /// Both tables materialized once, ready for scoring.
    pub fn materialized(&self) -> Materialized {
        Materialized {
            kind: self.config.model,
            space: self.config.space,
            dim: self.config.dim,
            n_users: self.n_users(),
            n_items: self.n_items(),
            users: self.users.materialize_all(&self.config.space),
            items: self.items.materialize_all(&self.config.space),
            user_bias: (0..self.n_users()).map(|r| self.users.bias(r)).collect(),
            item_bias: (0..self.n_items()).map(|r| self.items.bias(r)).collect(),
            global_mean: self.global_mean,
        }
    }

    /// Writes `users.hrec`, `items.hrec` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path, meta: &CheckpointMeta) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HyperError::io(dir, e))?;
        for (name, table) in [("users.hrec", &self.users), ("items.hrec", &self.items)] {
            let path = dir.join(name);
            let f = File::create(&path).map_err(|e| HyperError::io(&path, e))?;
            let mut w = BufWriter::new(f);
            write_table(&mut w, &self.config.space, table).map_err(|e| HyperError::io(&path, e))?;
            std::io::Write::flush(&mut w).map_err(|e| HyperError::io(&path, e))?;
        }
        let path = dir.join("meta.json");
        let text = serde_json::to_string_pretty(meta).map_err(|e| HyperError::Checkpoint(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| HyperError::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, CheckpointMeta)> {
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|e| HyperError::io(&path, e))?;
        let meta: CheckpointMeta =
            serde_json::from_str(&text).map_err(|e| HyperError::Checkpoint(format!("{}: {e}", path.display())))?;
        let config = meta.config.to_config()?;
        let mut tables = Vec::new();
        for name in ["users.hrec", "items.hrec"] {
            let path = dir.join(name);
            let f = File::open(&path).map_err(|e| HyperError::io(&path, e))?;
            let (header, table) = read_table(BufReader::new(f))?;
            if header.dim != config.dim {
                return Err(HyperError::Checkpoint(format!(
                    "{} has dim {} but meta.json declares dim {}",
                    path.display(),
                    header.dim,
                    config.dim
                )));
            }
            if header.hyperbolic != config.space.is_hyperbolic() {
                return Err(HyperError::Checkpoint(format!(
                    "{} stores a different space than meta.json ({})",
                    path.display(),
                    config.space.name()
                )));
            }
            tables.push(table);
        }
        let items = tables.pop().expect("two tables");
        let users = tables.pop().expect("two tables");
        Ok((
            Model {
                config,
                users,
                items,
                global_mean: meta.global_mean,
            },
            meta,
        ))
    }
}

/// Flat, serializable echo of a [`ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub model: ModelKind,
    pub space: String,
    pub curvature: f64,
    pub max_hyp_norm: f64,
    pub dim: usize,
    pub margin_item: f64,
    pub margin_social: f64,
    pub social_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub negatives_per_positive: usize,
    pub init_scale: f64,
    pub rank_weighting: bool,
    pub euclidean_max_norm: Option<f64>,
    pub grad_clip: Option<f64>,
}

impl ConfigRecord {
    pub fn from_config(c: &ModelConfig) -> Self {
        let (curvature, max_hyp_norm) = match c.space {
            SpaceKind::Euclidean => (0.0, 0.0),
            SpaceKind::PoincareBall {
                curvature,
                max_hyp_norm,
            } => (curvature.value(), max_hyp_norm),
        };
        ConfigRecord {
            model: c.model,
            space: c.space.name().to_string(),
            curvature,
            max_hyp_norm,
            dim: c.dim,
            margin_item: c.margin_item,
            margin_social: c.margin_social,
            social_weight: c.social_weight,
            lr: c.lr,
            batch_size: c.batch_size,
            epochs: c.epochs,
            seed: c.seed,
            negatives_per_positive: c.negatives_per_positive,
            init_scale: c.init_scale,
            rank_weighting: c.rank_weighting,
            euclidean_max_norm: c.euclidean_max_norm,
            grad_clip: c.grad_clip,
        }
    }

    pub fn to_config(&self) -> Result<ModelConfig> {
        let space = match self.space.as_str() {
            "euclidean" => SpaceKind::Euclidean,
            "poincare" => SpaceKind::poincare(self.curvature, self.max_hyp_norm)?,
            other => return Err(HyperError::Checkpoint(format!("unknown space {other:?}"))),
        };
        let c = ModelConfig {
            model: self.model,
            space,
            dim: self.dim,
            margin_item: self.margin_item,
            margin_social: self.margin_social,
            social_weight: self.social_weight,
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            negatives_per_positive: self.negatives_per_positive,
            init_scale: self.init_scale,
            rank_weighting: self.rank_weighting,
            euclidean_max_norm: self.euclidean_max_norm,
            grad_clip: self.grad_clip,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Sidecar record stored next to checkpoint tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ConfigRecord,
    pub n_users: usize,
    pub n_items: usize,
    pub epoch: usize,
    /// Validation HR@10 (top-n models) or MAE (rating model).
    pub val_metric: Option<f64>,
    pub global_mean: f64,
}

/// Read-only scoring view of a model.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub kind: ModelKind,
    pub space: SpaceKind,
    pub dim: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub users: Vec<f64>,
    pub items: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_mean: f64,
}

impl Materialized {
    fn user(&self, u: usize) -> &[f64] {
        &self.users[u * self.dim..(u + 1) * self.dim]
    }

    fn item(&self, i: usize) -> &[f64] {
        &self.items[i * self.dim..(i + 1) * self.dim]
    }

    /// Higher is better: negative distance or biased inner product.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let (u, v) = (self.user(user), self.item(item));
        if self.kind.is_distance() {
            -self.space.distance(u, v)
        } else {
            self.global_mean + self.space.inner(u, v) + self.user_bias[user] + self.item_bias[item]
        }
    }
}

impl Scorer for Materialized {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.score(user, i);
        }
    }
}

impl RatingPredictor for Materialized {
    fn predict(&self, user: usize, item: usize) -> f64 {
        self.score(user, item)
    }
}

/// Top-`k` items for `user` by descending score, skipping `exclude`; ties
/// go to the lower item id.
pub fn recommend_topn(model: &Materialized, user: usize, k: usize, exclude: &[usize]) -> Result<Vec<usize>> {
    if user >= model.n_users {
        return Err(HyperError::IndexOutOfRange {
            index: user,
            len: model.n_users,
        });
    }
    let mut scores = vec![0.0; model.n_items];
    model.score_items(user, &mut scores);
    let mut ex = exclude.to_vec();
    ex.sort_unstable();
    ex.dedup();
    Ok(eval::top_k(&scores, &ex, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub triplets: usize,
    pub rejected_batches: usize,
    pub wall_time: Duration,
}

/// Stateful single-threaded trainer; deterministic given the config seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: Model,
    user_opt: AdamState,
    item_opt: AdamState,
    rng: ChaCha8Rng,
    index: TrainIndex,
    positives: Vec<Interaction>,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(
        config: ModelConfig,
        n_users: usize,
        n_items: usize,
        train: &[Interaction],
        social: Option<&SocialGraph>,
    ) -> Result<Self> {
        let global_mean = if train.is_empty() {
            0.0
        } else {
            train.iter().map(|i| i.rating).sum::<f64>() / train.len() as f64
        };
        let model = Model::init(config, n_users, n_items, global_mean)?;
        if model.config.model == ModelKind::Scml && social.is_none() {
            log::warn!("scml without a trust graph trains the item loss only");
        }
        let adam = AdamConfig::with_lr(model.config.lr);
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        rng.set_stream(3);
        Ok(Trainer {
            user_opt: AdamState::new(adam, &model.users),
            item_opt: AdamState::new(adam, &model.items),
            rng,
            index: TrainIndex::new(n_users, n_items, train, social),
            positives: train.to_vec(),
            model,
            epochs_done: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    fn build_batch(&mut self, chunk: &[usize]) -> Result<Batch> {
        let config = &self.model.config;
        let mut batch = Batch::default();
        for &p in chunk {
            let it = self.positives[p];
            if config.model == ModelKind::MfRating {
                batch.ratings.push(it);
                continue;
            }
            for _ in 0..config.negatives_per_positive {
                let negative = sample_negative_item(&self.index, it.user, &mut self.rng)?;
                batch.item_triplets.push(TrainingTriplet {
                    user: it.user,
                    positive: it.item,
                    negative,
                });
            }
            if config.model == ModelKind::Scml && config.social_weight > 0.0 {
                if let Some(s) = sample_social_pair(&self.index, it.user, &mut self.rng)? {
                    batch.social.push(s);
                }
            }
        }
        Ok(batch)
    }

    /// One pass over the training positives in a fresh random order.
    pub fn train_epoch(&mut self) -> Result<EpochStats> {
        if self.positives.is_empty() {
            return Err(HyperError::Empty("training set".into()));
        }
        let start = Instant::now();
        let mut order: Vec<usize> = (0..self.positives.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut total, mut terms, mut rejected) = (0.0, 0usize, 0usize);
        for chunk in order.chunks(self.model.config.batch_size) {
            let batch = self.build_batch(chunk)?;
            let BatchLoss {
                loss,
                terms: n,
                users: mut gu,
                items: mut gi,
            } = self.model.batch_loss(&batch)?;
            if n == 0 {
                continue;
            }
            gu.scale(1.0 / n as f64);
            gi.scale(1.0 / n as f64);
            if let Some(max) = self.model.config.grad_clip {
                clip_global_norm(&mut [&mut gu, &mut gi], max);
            }
            // Both tables are checked before either moves.
            let bad = gu
                .first_non_finite()
                .map(|r| ("user", r))
                .or(gi.first_non_finite().map(|r| ("item", r)));
            if let Some((table, row)) = bad {
                log::warn!("batch rejected: non-finite gradient for {table} row {row}");
                rejected += 1;
                continue;
            }
            self.user_opt.step(&mut self.model.users, &gu)?;
            self.item_opt.step(&mut self.model.items, &gi)?;
            self.project(gu.rows(), gi.rows());
            total += loss;
            terms += n;
        }
        self.epochs_done += 1;
        if terms == 0 && rejected > 0 {
            return Err(HyperError::NonFinite("gradients of every batch in the epoch"));
        }
        let mean_loss = if terms > 0 { total / terms as f64 } else { 0.0 };
        if !mean_loss.is_finite() {
            return Err(HyperError::NonFinite("epoch loss"));
        }
        Ok(EpochStats {
            epoch: self.epochs_done,
            mean_loss,
            triplets: terms,
            rejected_batches: rejected,
            wall_time: start.elapsed(),
        })
    }

    fn project(&mut self, user_rows: &[usize], item_rows: &[usize]) {
        let config = &self.model.config;
        match (config.space.is_hyperbolic(), config.euclidean_max_norm) {
            (true, _) => {
                post_step_project(&config.space, &mut self.model.users, user_rows);
                post_step_project(&config.space, &mut self.model.items, item_rows);
            }
            (false, Some(max)) if config.model.is_distance() => {
                clip_rows(&mut self.model.users, user_rows, max);
                clip_rows(&mut self.model.items, item_rows, max);
            }
            _ => {}
        }
    }
}

/// Free-function form of [`Trainer::train_epoch`].
pub fn train_epoch(trainer: &mut Trainer) -> Result<EpochStats> {
    trainer.train_epoch()
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_metric: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best-validation model (the initialization when no epoch improves).
    pub best: Model,
    pub best_epoch: usize,
    pub best_val: f64,
    pub log: Vec<EpochLog>,
}

/// Validation score of `model`: HR@10 under full ranking for top-n models,
/// MAE for the rating model.
pub fn validation_metric(model: &Model, ds: &InteractionDataset, split: &Split, held: Option<&HeldOut>) -> Result<f64> {
    let m = model.materialized();
    if model.config.model == ModelKind::MfRating {
        let r = eval::evaluate_ratings(&m, &split.validation, ds.rating_range)?;
        Ok(r.mae.expect("rating report has mae"))
    } else {
        let held =
            held.ok_or_else(|| HyperError::InvalidArgument("top-n validation needs a leave-one-out split".into()))?;
        let r = eval::evaluate_full_ranking(&m, held, EvalTarget::Validation, &[10])?;
        Ok(r.hr_at(10).expect("k=10 requested"))
    }
}

/// Trains for `config.epochs` epochs, validating after each one and keeping
/// the best model. `on_epoch` sees every log row as it is produced.
pub fn fit(
    config: &ModelConfig,
    ds: &InteractionDataset,
    split: &Split,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitResult> {
    config.validate()?;
    let rating = config.model == ModelKind::MfRating;
    let held = if rating {
        None
    } else {
        Some(HeldOut::from_split(ds.n_users, ds.n_items, split)?)
    };
    let social = if config.model == ModelKind::Scml {
        ds.social.as_ref()
    } else {
        None
    };
    let mut trainer = Trainer::new(config.clone(), ds.n_users, ds.n_items, &split.train, social)?;
    let better = |a: f64, b: f64| if rating { a < b } else { a > b };

    let mut best = trainer.model().clone();
    let mut best_val = validation_metric(&best, ds, split, held.as_ref())?;
    let mut best_epoch = 0;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let stats = trainer.train_epoch()?;
        let val = validation_metric(trainer.model(), ds, split, held.as_ref())?;
        let row = EpochLog {
            epoch: stats.epoch,
            loss: stats.mean_loss,
            val_metric: val,
            wall_time: stats.wall_time.as_secs_f64(),
        };
        on_epoch(&row);
        log.push(row);
        if better(val, best_val) {
            best_val = val;
            best_epoch = stats.epoch;
            best = trainer.model().clone();
        }
    }
    Ok(FitResult {
        best,
        best_epoch,
        best_val,
        log,
    })
}
