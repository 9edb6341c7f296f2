//! Graph embedding by distance regression, and its multiplicative distortion.
//!
//! Nodes are fitted so that embedded distances match hop distances:
//! `Σ_{a<b} (d(a,b)/d_G(a,b) − 1)²`, full-batch Adam on the stored rows.

use crate::error::{HyperError, Result};
use crate::optim::{post_step_project, AdamConfig, AdamState, SparseGrad};
use crate::spaces::{EmbeddingTable, SpaceKind};
use crate::synth::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub space: SpaceKind,
    pub dim: usize,
    pub steps: usize,
    pub lr: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl EmbedConfig {
    pub fn new(space: SpaceKind, dim: usize, seed: u64) -> Self {
        EmbedConfig {
            space,
            dim,
            steps: 3000,
            lr: 0.01,
            init_scale: 0.1,
            seed,
        }
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
}

/// Fits `tree` and returns the stored rows.
pub fn embed_tree(tree: &Tree, config: &EmbedConfig) -> Result<EmbeddingTable> {
    let n = tree.len();
    if n < 2 {
        return Err(HyperError::InvalidArgument("need at least two nodes".into()));
    }
    let dim = config.dim;
    let space = config.space;
    let mut table = EmbeddingTable::init(n, dim, config.init_scale, config.seed)?;
    let mut opt = AdamState::new(AdamConfig::with_lr(config.lr), &table);
    let all_rows: Vec<usize> = (0..n).collect();
    let mut ga = vec![0.0; dim];
    let mut gb = vec![0.0; dim];
    for _ in 0..config.steps {
        let points = table.materialize_all(&space);
        let mut gpoint = vec![0.0; n * dim];
        for (a, b) in pairs(n) {
            let target = tree.distance(a, b) as f64;
            ga.iter_mut().for_each(|x| *x = 0.0);
            gb.iter_mut().for_each(|x| *x = 0.0);
            let pa = &points[a * dim..(a + 1) * dim];
            let pb = &points[b * dim..(b + 1) * dim];
            let d = space.distance_grad(pa, pb, 1.0, &mut ga, &mut gb);
            let scale = 2.0 * (d / target - 1.0) / target;
            for i in 0..dim {
                gpoint[a * dim + i] += scale * ga[i];
                gpoint[b * dim + i] += scale * gb[i];
            }
        }
        let mut grads = SparseGrad::new(dim);
        for r in 0..n {
            space.pullback(table.row(r), &gpoint[r * dim..(r + 1) * dim], grads.row_mut(r));
        }
        opt.step(&mut table, &grads)?;
        post_step_project(&space, &mut table, &all_rows);
    }
    Ok(table)
}

/// Mean over node pairs of `max(r/s, s/r)`, where `r = d_emb / d_G` and `s`
/// is the geometric mean of all ratios. Equals 1 exactly for an embedding
/// that is isometric up to a global scale.
pub fn mean_distortion(space: &SpaceKind, points: &[f64], dim: usize, tree: &Tree) -> Result<f64> {
    let n = tree.len();
    if points.len() != n * dim {
        return Err(HyperError::DimensionMismatch {
            left: points.len(),
            right: n * dim,
        });
    }
    let ratios: Vec<f64> = pairs(n)
        .map(|(a, b)| {
            let d = space.distance(&points[a * dim..(a + 1) * dim], &points[b * dim..(b + 1) * dim]);
            d / tree.distance(a, b) as f64
        })
        .collect();
    if ratios.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
        return Ok(f64::INFINITY);
    }
    let log_mean = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    let s = log_mean.exp();
    Ok(ratios.iter().map(|&r| (r / s).max(s / r)).sum::<f64>() / ratios.len() as f64)
}
