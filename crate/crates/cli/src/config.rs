//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key except `dataset` has
//! a default; unknown keys are rejected. Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hyperrec_core::eval::Protocol;
use hyperrec_core::models::{ModelConfig, ModelKind};
use hyperrec_core::spaces::SpaceKind;

/// Environment variable naming the root for relative dataset paths.
pub const DATA_DIR_ENV: &str = "HYPERREC_DATA_DIR";

/// Resolves a relative path against `HYPERREC_DATA_DIR` when it is set.
pub fn resolve_data_path(p: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpaceName {
    Euclidean,
    Poincare,
}

impl SpaceName {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceName::Euclidean => "euclidean",
            SpaceName::Poincare => "poincare",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(SpaceName::Euclidean),
            "poincare" | "hyperbolic" => Ok(SpaceName::Poincare),
            other => bail!("unknown space {other:?} (expected euclidean or poincare)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Prepared dataset directory (output of `prep`).
    pub dataset: PathBuf,
    pub dataset_name: Option<String>,
    pub model: ModelKind,
    pub space: SpaceName,
    pub curvature: f64,
    pub max_hyp_norm: f64,
    pub dim: usize,
    pub margin_item_euclidean: f64,
    pub margin_item_poincare: f64,
    pub margin_social_euclidean: f64,
    pub margin_social_poincare: f64,
    pub social_weight: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// `None` picks the model's default.
    pub negatives_per_positive: Option<usize>,
    pub init_scale: f64,
    pub rank_weighting: bool,
    pub euclidean_max_norm: Option<f64>,
    pub grad_clip: Option<f64>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub sweep_models: Vec<ModelKind>,
    pub sweep_spaces: Vec<SpaceName>,
    pub output: PathBuf,
    pub protocol: Protocol,
    pub eval_seed: u64,
}

const KEYS: &[&str] = &[
    "dataset",
    "dataset_name",
    "model",
    "space",
    "curvature",
    "max_hyp_norm",
    "dim",
    "margin_item_euclidean",
    "margin_item_poincare",
    "margin_social_euclidean",
    "margin_social_poincare",
    "social_weight",
    "lr",
    "batch_size",
    "epochs",
    "negatives_per_positive",
    "init_scale",
    "rank_weighting",
    "euclidean_max_norm",
    "grad_clip",
    "dims",
    "seeds",
    "sweep_models",
    "sweep_spaces",
    "output",
    "protocol",
    "eval_seed",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("config key {key}: cannot parse {v:?}"))
}

/// Floats must be finite; `NaN` and `inf` are rejected as input errors.
fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_num(key, v)?;
    if !x.is_finite() {
        bail!("config key {key}: {v:?} is not a finite number");
    }
    Ok(x)
}

fn parse_opt_f64(key: &str, v: &str) -> Result<Option<f64>> {
    match v {
        "none" | "" => Ok(None),
        _ => parse_f64(key, v).map(Some),
    }
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect::<Result<_>>()
        .with_context(|| format!("config key {key}"))?;
    if items.is_empty() {
        bail!("config key {key}: empty list");
    }
    Ok(items)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("config key {key}: expected true or false, got {v:?}"),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    fn defaults(dataset: PathBuf) -> Self {
        ExperimentConfig {
            dataset,
            dataset_name: None,
            model: ModelKind::Cml,
            space: SpaceName::Euclidean,
            curvature: 1.0,
            max_hyp_norm: 6.0,
            dim: 10,
            margin_item_euclidean: 0.5,
            margin_item_poincare: 2.0,
            margin_social_euclidean: 0.5,
            margin_social_poincare: 2.0,
            social_weight: 0.1,
            lr: 0.01,
            batch_size: 1000,
            epochs: 30,
            negatives_per_positive: None,
            init_scale: 0.01,
            rank_weighting: false,
            euclidean_max_norm: Some(1.0),
            grad_clip: None,
            dims: vec![10, 50, 100],
            seeds: vec![0],
            sweep_models: vec![ModelKind::Cml],
            sweep_spaces: vec![SpaceName::Euclidean, SpaceName::Poincare],
            output: PathBuf::from("out"),
            protocol: Protocol::Full,
            eval_seed: 0,
        }
    }

    /// Parses file text, then applies `overrides` (`key=value`) in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (format!("line {}", i + 1), l.to_string()))
            .chain(overrides.iter().map(|o| (format!("override {o:?}"), o.clone())));
        for (at, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config {at}: expected key = value"))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                bail!("config {at}: unknown key {k:?}");
            }
            pairs.insert(k.to_string(), v.trim().to_string());
        }
        let dataset = pairs
            .remove("dataset")
            .ok_or_else(|| anyhow!("config: missing required key dataset"))?;
        let mut c = Self::defaults(PathBuf::from(dataset));
        for (k, v) in &pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, overrides).with_context(|| format!("in {}", path.display()))
    }

    fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "dataset_name" => self.dataset_name = Some(v.to_string()),
            "model" => self.model = v.parse()?,
            "space" => self.space = SpaceName::parse(v)?,
            "curvature" => self.curvature = parse_f64(k, v)?,
            "max_hyp_norm" => self.max_hyp_norm = parse_f64(k, v)?,
            "dim" => self.dim = parse_num(k, v)?,
            "margin_item_euclidean" => self.margin_item_euclidean = parse_f64(k, v)?,
            "margin_item_poincare" => self.margin_item_poincare = parse_f64(k, v)?,
            "margin_social_euclidean" => self.margin_social_euclidean = parse_f64(k, v)?,
            "margin_social_poincare" => self.margin_social_poincare = parse_f64(k, v)?,
            "social_weight" => self.social_weight = parse_f64(k, v)?,
            "lr" => self.lr = parse_f64(k, v)?,
            "batch_size" => self.batch_size = parse_num(k, v)?,
            "epochs" => self.epochs = parse_num(k, v)?,
            "negatives_per_positive" => {
                self.negatives_per_positive = if v == "auto" { None } else { Some(parse_num(k, v)?) }
            }
            "init_scale" => self.init_scale = parse_f64(k, v)?,
            "rank_weighting" => self.rank_weighting = parse_bool(k, v)?,
            "euclidean_max_norm" => self.euclidean_max_norm = parse_opt_f64(k, v)?,
            "grad_clip" => self.grad_clip = parse_opt_f64(k, v)?,
            "dims" => self.dims = parse_list(k, v, |s| parse_num(k, s))?,
            "seeds" => self.seeds = parse_list(k, v, |s| parse_num(k, s))?,
            "sweep_models" => self.sweep_models = parse_list(k, v, |s| Ok(s.parse::<ModelKind>()?))?,
            "sweep_spaces" => self.sweep_spaces = parse_list(k, v, SpaceName::parse)?,
            "output" => self.output = PathBuf::from(v),
            "protocol" => self.protocol = v.parse()?,
            "eval_seed" => self.eval_seed = parse_num(k, v)?,
            other => bail!("unknown key {other:?}"),
        }
        Ok(())
    }

    /// Checks every model config the experiment can produce.
    pub fn validate(&self) -> Result<()> {
        if self.protocol == Protocol::Rating && self.model != ModelKind::MfRating {
            bail!("protocol rating is only meaningful for model mf_rating");
        }
        let mut spaces = self.sweep_spaces.clone();
        spaces.push(self.space);
        let mut models = self.sweep_models.clone();
        models.push(self.model);
        let mut dims = self.dims.clone();
        dims.push(self.dim);
        for &m in &models {
            for &s in &spaces {
                for &d in &dims {
                    self.model_config(m, s, d, 0)?.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn space_kind(&self, space: SpaceName) -> Result<SpaceKind> {
        Ok(match space {
            SpaceName::Euclidean => SpaceKind::Euclidean,
            SpaceName::Poincare => SpaceKind::poincare(self.curvature, self.max_hyp_norm)?,
        })
    }

    /// The training config of one (model, space, dim, seed) cell.
    pub fn model_config(&self, model: ModelKind, space: SpaceName, dim: usize, seed: u64) -> Result<ModelConfig> {
        let mut c = ModelConfig::new(model, self.space_kind(space)?, dim);
        (c.margin_item, c.margin_social) = match space {
            SpaceName::Euclidean => (self.margin_item_euclidean, self.margin_social_euclidean),
            SpaceName::Poincare => (self.margin_item_poincare, self.margin_social_poincare),
        };
        c.social_weight = self.social_weight;
        c.lr = self.lr;
        c.batch_size = self.batch_size;
        c.epochs = self.epochs;
        c.seed = seed;
        if let Some(n) = self.negatives_per_positive {
            c.negatives_per_positive = n;
        }
        c.init_scale = self.init_scale;
        c.rank_weighting = self.rank_weighting;
        c.euclidean_max_norm = if model.is_distance() {
            self.euclidean_max_norm
        } else {
            None
        };
        c.grad_clip = self.grad_clip;
        Ok(c)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        resolve_data_path(&self.dataset)
    }

    pub fn dataset_label(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    /// Canonical text form: every key, fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let models: Vec<&str> = self.sweep_models.iter().map(|m| m.name()).collect();
        let spaces: Vec<&str> = self.sweep_spaces.iter().map(|m| m.as_str()).collect();
        let fields: Vec<(&str, String)> = vec![
            ("dataset", self.dataset.display().to_string()),
            ("dataset_name", self.dataset_label()),
            ("model", self.model.name().into()),
            ("space", self.space.as_str().into()),
            ("curvature", self.curvature.to_string()),
            ("max_hyp_norm", self.max_hyp_norm.to_string()),
            ("dim", self.dim.to_string()),
            ("margin_item_euclidean", self.margin_item_euclidean.to_string()),
            ("margin_item_poincare", self.margin_item_poincare.to_string()),
            ("margin_social_euclidean", self.margin_social_euclidean.to_string()),
            ("margin_social_poincare", self.margin_social_poincare.to_string()),
            ("social_weight", self.social_weight.to_string()),
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            (
                "negatives_per_positive",
                self.negatives_per_positive
                    .map_or_else(|| "auto".into(), |n| n.to_string()),
            ),
            ("init_scale", self.init_scale.to_string()),
            ("rank_weighting", self.rank_weighting.to_string()),
            ("euclidean_max_norm", opt(self.euclidean_max_norm)),
            ("grad_clip", opt(self.grad_clip)),
            ("dims", join(&self.dims)),
            ("seeds", join(&self.seeds)),
            ("sweep_models", models.join(",")),
            ("sweep_spaces", spaces.join(",")),
            ("output", self.output.display().to_string()),
            ("protocol", self.protocol.to_string()),
            ("eval_seed", self.eval_seed.to_string()),
        ];
        for (k, v) in fields {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
