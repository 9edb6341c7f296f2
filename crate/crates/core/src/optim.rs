//! Sparse Adam over embedding tables, plus the post-step norm cap for
//! tables that materialize into the Poincaré ball.

use std::collections::HashMap;

use crate::error::{HyperError, Result};
use crate::geometry::raw;
use crate::spaces::{EmbeddingTable, SpaceKind};

/// Row-indexed gradient for one table. Rows keep first-touch order.
#[derive(Debug, Clone)]
pub struct SparseGrad {
    dim: usize,
    index: HashMap<usize, usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
    bias: Vec<f64>,
}

impl SparseGrad {
    pub fn new(dim: usize) -> Self {
        SparseGrad {
            dim,
            index: HashMap::new(),
            rows: Vec::new(),
            values: Vec::new(),
            bias: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    fn slot(&mut self, row: usize) -> usize {
        if let Some(&s) = self.index.get(&row) {
            return s;
        }
        let s = self.rows.len();
        self.index.insert(row, s);
        self.rows.push(row);
        self.values.extend(std::iter::repeat_n(0.0, self.dim));
        self.bias.push(0.0);
        s
    }

    /// Mutable gradient slice for `row`, created zeroed on first use.
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let s = self.slot(row);
        &mut self.values[s * self.dim..(s + 1) * self.dim]
    }

    pub fn add(&mut self, row: usize, grad: &[f64]) {
        for (g, x) in self.row_mut(row).iter_mut().zip(grad) {
            *g += x;
        }
    }

    pub fn add_bias(&mut self, row: usize, g: f64) {
        let s = self.slot(row);
        self.bias[s] += g;
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.index
            .get(&row)
            .map(|&s| &self.values[s * self.dim..(s + 1) * self.dim])
    }

    pub fn get_bias(&self, row: usize) -> Option<f64> {
        self.index.get(&row).map(|&s| self.bias[s])
    }

    /// Slots sorted by row id, for order-independent results.
    fn sorted_slots(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.rows.iter().enumerate().map(|(s, &r)| (r, s)).collect();
        v.sort_unstable();
        v
    }

    fn sq_norm(&self) -> f64 {
        self.sorted_slots()
            .iter()
            .map(|&(_, s)| raw::norm_sq(&self.values[s * self.dim..(s + 1) * self.dim]) + self.bias[s] * self.bias[s])
            .sum()
    }

    /// Lowest row holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.sorted_slots().into_iter().find_map(|(row, s)| {
            let g = &self.values[s * self.dim..(s + 1) * self.dim];
            (g.iter().any(|x| !x.is_finite()) || !self.bias[s].is_finite()).then_some(row)
        })
    }

    pub fn scale(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
        self.bias.iter_mut().for_each(|v| *v *= k);
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut SparseGrad], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.sq_norm()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale(k);
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one table. Only rows present in a gradient have their
/// moments advanced; bias correction uses the global step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    bias_m: Vec<f64>,
    bias_v: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, table: &EmbeddingTable) -> Self {
        let n = table.rows() * table.dim();
        AdamState {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            bias_m: vec![0.0; table.rows()],
            bias_v: vec![0.0; table.rows()],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam update of the rows named in `grads`. A
    /// non-finite gradient rejects the whole batch before anything changes.
    pub fn step(&mut self, table: &mut EmbeddingTable, grads: &SparseGrad) -> Result<()> {
        if grads.dim() != table.dim() {
            return Err(HyperError::DimensionMismatch {
                left: grads.dim(),
                right: table.dim(),
            });
        }
        if self.m.len() != table.rows() * table.dim() {
            return Err(HyperError::DimensionMismatch {
                left: self.m.len(),
                right: table.rows() * table.dim(),
            });
        }
        let slots = grads.sorted_slots();
        for &(row, s) in &slots {
            if row >= table.rows() {
                return Err(HyperError::IndexOutOfRange {
                    index: row,
                    len: table.rows(),
                });
            }
            let g = &grads.values[s * grads.dim..(s + 1) * grads.dim];
            if g.iter().any(|x| !x.is_finite()) || !grads.bias[s].is_finite() {
                return Err(HyperError::NonFiniteGradient { row });
            }
        }

        self.step_count += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let dim = table.dim();

        for &(row, s) in &slots {
            let g = &grads.values[s * dim..(s + 1) * dim];
            let params = table.row_mut(row);
            for i in 0..dim {
                let k = row * dim + i;
                self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g[i];
                self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        if let Some(biases) = table.bias_mut() {
            for &(row, s) in &slots {
                let g = grads.bias[s];
                self.bias_m[row] = beta1 * self.bias_m[row] + (1.0 - beta1) * g;
                self.bias_v[row] = beta2 * self.bias_v[row] + (1.0 - beta2) * g * g;
                let m_hat = self.bias_m[row] / c1;
                let v_hat = self.bias_v[row] / c2;
                biases[row] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, table: &mut EmbeddingTable, grads: &SparseGrad) -> Result<()> {
    state.step(table, grads)
}

/// Clips the tangent norm of each touched row so the materialized point's
/// hyperbolic norm stays within the space's cap. No-op for Euclidean tables.
pub fn post_step_project(space: &SpaceKind, table: &mut EmbeddingTable, rows: &[usize]) {
    if let Some(cap) = space.tangent_norm_cap() {
        clip_rows(table, rows, cap);
    }
}

/// Rescales the listed rows to Euclidean norm at most `max_norm`.
pub fn clip_rows(table: &mut EmbeddingTable, rows: &[usize], max_norm: f64) {
    for &r in rows {
        let row = table.row_mut(r);
        let n = raw::norm(row);
        if n > max_norm {
            let k = max_norm / n;
            row.iter_mut().for_each(|x| *x *= k);
        }
    }
}
