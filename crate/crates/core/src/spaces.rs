//! Euclidean vs. Poincaré-ball latent spaces behind one type.
//!
//! Embedding parameters are always stored unconstrained: plain coordinates
//! for the Euclidean space, tangent vectors at the origin for the ball.
//! [`SpaceKind::materialize_into`] turns a stored row into a point of the
//! space and [`SpaceKind::pullback`] carries a gradient on that point back
//! to the stored row, so a single optimizer serves both spaces.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HyperError, Result};
use crate::geometry::{self, raw, BallPoint, Curvature, TangentVec, ARTANH_MAX};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceKind {
    Euclidean,
    PoincareBall { curvature: Curvature, max_hyp_norm: f64 },
}

impl SpaceKind {
    pub fn poincare(c: f64, max_hyp_norm: f64) -> Result<Self> {
        let curvature = Curvature::new(c)?;
        if !(max_hyp_norm.is_finite() && max_hyp_norm > 0.0) {
            return Err(HyperError::InvalidArgument(format!(
                "max_hyp_norm must be positive, got {max_hyp_norm}"
            )));
        }
        Ok(SpaceKind::PoincareBall {
            curvature,
            max_hyp_norm,
        })
    }

    /// Unit curvature, hyperbolic norm capped at 6.
    pub fn poincare_default() -> Self {
        SpaceKind::PoincareBall {
            curvature: Curvature::default(),
            max_hyp_norm: geometry::DEFAULT_MAX_HYP_NORM,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::Euclidean => "euclidean",
            SpaceKind::PoincareBall { .. } => "poincare",
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, SpaceKind::PoincareBall { .. })
    }

    /// Largest tangent norm a stored row may have. The hyperbolic norm of
    /// `exp_o(t)` is `2‖t‖`, so the cap halves; it is further limited so the
    /// materialized radius never reaches the `artanh` clamp.
    pub fn tangent_norm_cap(&self) -> Option<f64> {
        match *self {
            SpaceKind::Euclidean => None,
            SpaceKind::PoincareBall {
                curvature,
                max_hyp_norm,
            } => {
                let saturation = 0.999 * ARTANH_MAX.atanh() / curvature.sqrt();
                Some((max_hyp_norm / 2.0).min(saturation))
            }
        }
    }

    /// Writes the point of the space represented by stored row `params`.
    pub fn materialize_into(&self, params: &[f64], out: &mut [f64]) {
        match *self {
            SpaceKind::Euclidean => out.copy_from_slice(params),
            SpaceKind::PoincareBall { curvature, .. } => {
                let cap = self.tangent_norm_cap().unwrap_or(f64::INFINITY);
                let s = raw::norm(params);
                if s > cap {
                    let clipped: Vec<f64> = params.iter().map(|p| p * cap / s).collect();
                    raw::exp_map(&clipped, curvature.value(), out);
                } else {
                    raw::exp_map(params, curvature.value(), out);
                }
            }
        }
    }

    /// Adds `Jᵀ · grad_point` into `grad_params`, where `J` is the Jacobian
    /// of [`Self::materialize_into`] at `params`.
    pub fn pullback(&self, params: &[f64], grad_point: &[f64], grad_params: &mut [f64]) {
        match *self {
            SpaceKind::Euclidean => {
                for (g, gp) in grad_params.iter_mut().zip(grad_point) {
                    *g += gp;
                }
            }
            SpaceKind::PoincareBall { curvature, .. } => {
                let c = curvature.value();
                let cap = self.tangent_norm_cap().unwrap_or(f64::INFINITY);
                let s = raw::norm(params);
                if s > cap {
                    let clipped: Vec<f64> = params.iter().map(|p| p * cap / s).collect();
                    let mut g_clipped = vec![0.0; params.len()];
                    raw::exp_map_vjp(&clipped, c, grad_point, &mut g_clipped);
                    // Radial clip t ↦ cap·t/‖t‖ has Jacobian (cap/s)(I - t̂t̂ᵀ).
                    let radial = raw::dot(&g_clipped, params) / s;
                    for i in 0..params.len() {
                        grad_params[i] += cap / s * (g_clipped[i] - radial * params[i] / s);
                    }
                } else {
                    raw::exp_map_vjp(params, c, grad_point, grad_params);
                }
            }
        }
    }

    /// Distance between two materialized points.
    #[inline]
    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            SpaceKind::Euclidean => raw::diff_norm_sq(u, v).sqrt(),
            SpaceKind::PoincareBall { curvature, .. } => raw::distance(u, v, curvature.value()),
        }
    }

    /// Squared distance, adding `scale`-weighted gradients into `gu`, `gv`.
    #[inline]
    pub fn distance_sq_grad(&self, u: &[f64], v: &[f64], scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        match *self {
            SpaceKind::Euclidean => {
                let mut sq = 0.0;
                for i in 0..u.len() {
                    let d = u[i] - v[i];
                    sq += d * d;
                    gu[i] += scale * 2.0 * d;
                    gv[i] -= scale * 2.0 * d;
                }
                sq
            }
            SpaceKind::PoincareBall { curvature, .. } => raw::distance_sq_grad(u, v, curvature.value(), scale, gu, gv),
        }
    }

    /// Distance (not squared), adding `scale`-weighted gradients.
    #[inline]
    pub fn distance_grad(&self, u: &[f64], v: &[f64], scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        match *self {
            SpaceKind::Euclidean => {
                let d = raw::diff_norm_sq(u, v).sqrt();
                if d > 0.0 {
                    for i in 0..u.len() {
                        let g = scale * (u[i] - v[i]) / d;
                        gu[i] += g;
                        gv[i] -= g;
                    }
                }
                d
            }
            SpaceKind::PoincareBall { curvature, .. } => raw::distance_grad(u, v, curvature.value(), scale, gu, gv),
        }
    }

    /// Inner product of the space (Euclidean dot or Poincaré inner product).
    #[inline]
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match *self {
            SpaceKind::Euclidean => raw::dot(u, v),
            SpaceKind::PoincareBall { curvature, .. } => raw::inner(u, v, curvature.value()),
        }
    }

    #[inline]
    pub fn inner_grad(&self, u: &[f64], v: &[f64], scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        match *self {
            SpaceKind::Euclidean => {
                for i in 0..u.len() {
                    gu[i] += scale * v[i];
                    gv[i] += scale * u[i];
                }
                raw::dot(u, v)
            }
            SpaceKind::PoincareBall { curvature, .. } => raw::inner_grad(u, v, curvature.value(), scale, gu, gv),
        }
    }
}

/// A materialized embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Euclidean(Vec<f64>),
    Ball(BallPoint),
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        match self {
            Point::Euclidean(v) => v,
            Point::Ball(b) => b.coords(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords().len()
    }
}

/// Per-entity parameters in the unconstrained domain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: usize,
    dim: usize,
    params: Vec<f64>,
    biases: Option<Vec<f64>>,
}

impl EmbeddingTable {
    /// Entries i.i.d. uniform in `[-scale, scale]`, deterministic in `seed`.
    pub fn init(rows: usize, dim: usize, scale: f64, seed: u64) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(HyperError::InvalidArgument(format!(
                "embedding table needs rows ≥ 1 and dim ≥ 1, got {rows}×{dim}"
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(HyperError::InvalidArgument(format!(
                "init scale must be positive, got {scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..rows * dim).map(|_| rng.random_range(-scale..=scale)).collect();
        Ok(EmbeddingTable {
            rows,
            dim,
            params,
            biases: None,
        })
    }

    pub fn from_params(rows: usize, dim: usize, params: Vec<f64>, biases: Option<Vec<f64>>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(HyperError::InvalidArgument("empty embedding table".into()));
        }
        if params.len() != rows * dim {
            return Err(HyperError::DimensionMismatch {
                left: params.len(),
                right: rows * dim,
            });
        }
        if let Some(b) = &biases {
            if b.len() != rows {
                return Err(HyperError::DimensionMismatch {
                    left: b.len(),
                    right: rows,
                });
            }
        }
        let all_finite = params.iter().chain(biases.iter().flatten()).all(|x| x.is_finite());
        if !all_finite {
            return Err(HyperError::NonFinite("embedding table"));
        }
        Ok(EmbeddingTable {
            rows,
            dim,
            params,
            biases,
        })
    }

    /// Attaches zero-initialized per-row biases.
    pub fn with_biases(mut self) -> Self {
        self.biases = Some(vec![0.0; self.rows]);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn biases(&self) -> Option<&[f64]> {
        self.biases.as_deref()
    }

    #[inline]
    pub fn bias(&self, row: usize) -> f64 {
        self.biases.as_ref().map_or(0.0, |b| b[row])
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.params[row * self.dim..(row + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.params[row * self.dim..(row + 1) * self.dim]
    }

    pub(crate) fn bias_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.biases.as_mut()
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows {
            return Err(HyperError::IndexOutOfRange {
                index: row,
                len: self.rows,
            });
        }
        Ok(())
    }

    /// Every row materialized, row-major.
    pub fn materialize_all(&self, space: &SpaceKind) -> Vec<f64> {
        let mut out = vec![0.0; self.params.len()];
        for (src, dst) in self.params.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            space.materialize_into(src, dst);
        }
        out
    }
}

/// Builds a table with entries i.i.d. uniform in `[-scale, scale]`.
pub fn init_embeddings(rows: usize, dim: usize, scale: f64, seed: u64) -> Result<EmbeddingTable> {
    EmbeddingTable::init(rows, dim, scale, seed)
}

/// The point of `space` represented by row `index`: identity for the
/// Euclidean space, `exp_o` followed by the norm cap for the ball.
pub fn materialize(space: &SpaceKind, table: &EmbeddingTable, index: usize) -> Result<Point> {
    table.check_row(index)?;
    let row = table.row(index);
    match *space {
        SpaceKind::Euclidean => Ok(Point::Euclidean(row.to_vec())),
        SpaceKind::PoincareBall {
            curvature,
            max_hyp_norm,
        } => {
            let t = TangentVec::new(row.to_vec())?;
            let x = geometry::exp_map_origin(&t, curvature);
            let clipped = geometry::project_into_ball(x.coords(), curvature, max_hyp_norm)?;
            Ok(Point::Ball(clipped))
        }
    }
}

fn check_dims(u: &Point, v: &Point) -> Result<()> {
    if u.dim() != v.dim() {
        return Err(HyperError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(())
}

/// Relation of a distance model: Euclidean or geodesic distance.
pub fn score_distance(space: &SpaceKind, u: &Point, v: &Point) -> Result<f64> {
    check_dims(u, v)?;
    match (space, u, v) {
        (SpaceKind::Euclidean, _, _) => Ok(space.distance(u.coords(), v.coords())),
        (SpaceKind::PoincareBall { .. }, Point::Ball(a), Point::Ball(b)) => geometry::poincare_distance(a, b),
        _ => Err(HyperError::InvalidArgument(
            "Poincaré scores need points materialized in the ball".into(),
        )),
    }
}

/// Relation of a projection model: inner product of the space plus `b`.
pub fn score_projection(space: &SpaceKind, u: &Point, v: &Point, b: f64) -> Result<f64> {
    check_dims(u, v)?;
    match (space, u, v) {
        (SpaceKind::Euclidean, _, _) => Ok(raw::dot(u.coords(), v.coords()) + b),
        (SpaceKind::PoincareBall { .. }, Point::Ball(a), Point::Ball(b2)) => Ok(geometry::hyperbolic_inner(a, b2)? + b),
        _ => Err(HyperError::InvalidArgument(
            "Poincaré scores need points materialized in the ball".into(),
        )),
    }
}

const MAGIC: &[u8; 5] = b"HREC1";

/// Writes `table` in the binary checkpoint layout: magic `HREC1`, space tag
/// (u8: 0 Euclidean, 1 Poincaré), curvature (f64, 0 for Euclidean), rows and
/// dim (u64), bias flag (u8), then row-major parameters and optional biases,
/// all little-endian.
pub fn write_table<W: Write>(mut w: W, space: &SpaceKind, table: &EmbeddingTable) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    let (tag, c) = match space {
        SpaceKind::Euclidean => (0u8, 0.0),
        SpaceKind::PoincareBall { curvature, .. } => (1u8, curvature.value()),
    };
    w.write_all(&[tag])?;
    w.write_all(&c.to_le_bytes())?;
    w.write_all(&(table.rows as u64).to_le_bytes())?;
    w.write_all(&(table.dim as u64).to_le_bytes())?;
    w.write_all(&[table.biases.is_some() as u8])?;
    for p in &table.params {
        w.write_all(&p.to_le_bytes())?;
    }
    if let Some(b) = &table.biases {
        for x in b {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Header fields of a stored table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableHeader {
    pub hyperbolic: bool,
    pub curvature: f64,
    pub rows: usize,
    pub dim: usize,
    pub has_bias: bool,
}

pub fn read_table<R: Read>(mut r: R) -> Result<(TableHeader, EmbeddingTable)> {
    let bad = |e: std::io::Error| HyperError::Checkpoint(e.to_string());
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(bad)?;
    if &magic != MAGIC {
        return Err(HyperError::Checkpoint("bad magic".into()));
    }
    let mut b1 = [0u8; 1];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b1).map_err(bad)?;
    let hyperbolic = match b1[0] {
        0 => false,
        1 => true,
        t => return Err(HyperError::Checkpoint(format!("unknown space tag {t}"))),
    };
    r.read_exact(&mut b8).map_err(bad)?;
    let curvature = f64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(bad)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(bad)?;
    let dim = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b1).map_err(bad)?;
    let has_bias = b1[0] == 1;
    let mut read_vec = |n: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8).map_err(bad)?;
            out.push(f64::from_le_bytes(b8));
        }
        Ok(out)
    };
    let params = read_vec(
        rows.checked_mul(dim)
            .ok_or_else(|| HyperError::Checkpoint("size overflow".into()))?,
    )?;
    let biases = if has_bias { Some(read_vec(rows)?) } else { None };
    let header = TableHeader {
        hyperbolic,
        curvature,
        rows,
        dim,
        has_bias,
    };
    Ok((header, EmbeddingTable::from_params(rows, dim, params, biases)?))
}
