//! Poincaré ball kernel.
//!
//! Points live in the open ball `{x : c‖x‖² < 1}` of a space with constant
//! curvature `-c`. Everything here is a pure function of its inputs.
//!
//! The typed API (`BallPoint`, `TangentVec`) validates its inputs. The slice
//! functions in [`raw`] skip validation and are what the trainers call in
//! their inner loops; they also carry the analytic gradients.

use crate::error::{HyperError, Result};

/// Upper bound applied to every `artanh` argument.
pub const ARTANH_MAX: f64 = 1.0 - 1e-7;

/// Floor for `z² - 1` style denominators, where `z` is the `arcosh` argument.
pub const ARCOSH_EPS: f64 = 1e-15;

/// Default cap on the hyperbolic norm of a materialized point.
pub const DEFAULT_MAX_HYP_NORM: f64 = 6.0;

/// Curvature magnitude `c`; the space has sectional curvature `-c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(HyperError::NonFinite("curvature"));
        }
        if c <= 0.0 {
            return Err(HyperError::InvalidArgument(format!(
                "curvature must be positive, got {c}"
            )));
        }
        Ok(Curvature(c))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }
}

impl Default for Curvature {
    fn default() -> Self {
        Curvature(1.0)
    }
}

/// A point strictly inside the ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    curvature: Curvature,
}

impl BallPoint {
    pub fn new(coords: Vec<f64>, curvature: Curvature) -> Result<Self> {
        if coords.is_empty() {
            return Err(HyperError::InvalidArgument("empty point".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(HyperError::NonFinite("ball point"));
        }
        let scaled = curvature.value() * raw::norm_sq(&coords);
        if scaled >= 1.0 {
            return Err(HyperError::OutsideBall { scaled_norm_sq: scaled });
        }
        Ok(BallPoint { coords, curvature })
    }

    pub fn origin(dim: usize, curvature: Curvature) -> Self {
        BallPoint {
            coords: vec![0.0; dim.max(1)],
            curvature,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }
}

/// A vector in the tangent space at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec(Vec<f64>);

impl TangentVec {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(HyperError::InvalidArgument("empty tangent vector".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(HyperError::NonFinite("tangent vector"));
        }
        Ok(TangentVec(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        TangentVec(vec![0.0; dim.max(1)])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Elementwise activation applied in the tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Dense row-major matrix used as the tangent-space weight of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(HyperError::InvalidArgument("matrix with a zero dimension".into()));
        }
        if data.len() != rows * cols {
            return Err(HyperError::DimensionMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(HyperError::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = s;
        }
        Matrix { rows: n, cols: n, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.cols).map(|row| raw::dot(row, x)).collect()
    }
}

/// Weight, bias and activation of a hyperbolic linear layer. Weight and bias
/// are Euclidean (tangent-space) quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct HypLinearParams {
    pub weight: Matrix,
    pub bias: TangentVec,
    pub activation: Activation,
}

impl HypLinearParams {
    pub fn new(weight: Matrix, bias: TangentVec, activation: Activation) -> Result<Self> {
        if bias.dim() != weight.rows() {
            return Err(HyperError::DimensionMismatch {
                left: bias.dim(),
                right: weight.rows(),
            });
        }
        Ok(HypLinearParams {
            weight,
            bias,
            activation,
        })
    }
}

fn same_space(u: &BallPoint, v: &BallPoint) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(HyperError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    if u.curvature != v.curvature {
        return Err(HyperError::InvalidArgument(format!(
            "curvature mismatch: {} vs {}",
            u.curvature.value(),
            v.curvature.value()
        )));
    }
    Ok(u.curvature.value())
}

/// Geodesic distance between two points of the same ball.
pub fn poincare_distance(u: &BallPoint, v: &BallPoint) -> Result<f64> {
    let c = same_space(u, v)?;
    Ok(raw::distance(&u.coords, &v.coords, c))
}

/// Distance to the origin.
pub fn hyperbolic_norm(u: &BallPoint) -> Result<f64> {
    let origin = BallPoint::origin(u.dim(), u.curvature);
    poincare_distance(u, &origin)
}

/// Conformal factor `λ_x = 2 / (1 - c‖x‖²)`.
pub fn conformal_factor(x: &BallPoint) -> Result<f64> {
    let denom = 1.0 - x.curvature.value() * raw::norm_sq(&x.coords);
    if denom <= 0.0 {
        return Err(HyperError::OutsideBall {
            scaled_norm_sq: 1.0 - denom,
        });
    }
    Ok(2.0 / denom)
}

/// Hyperbolic norms times the cosine of the Euclidean angle. Returns 0 when
/// either point is the origin.
pub fn hyperbolic_inner(u: &BallPoint, v: &BallPoint) -> Result<f64> {
    let c = same_space(u, v)?;
    Ok(raw::inner(&u.coords, &v.coords, c))
}

pub fn exp_map_origin(t: &TangentVec, curvature: Curvature) -> BallPoint {
    let mut out = vec![0.0; t.dim()];
    raw::exp_map(&t.0, curvature.value(), &mut out);
    BallPoint { coords: out, curvature }
}

pub fn log_map_origin(u: &BallPoint) -> TangentVec {
    let mut out = vec![0.0; u.dim()];
    raw::log_map(&u.coords, u.curvature.value(), &mut out);
    TangentVec(out)
}

/// Rescales `x` radially so its hyperbolic norm does not exceed
/// `max_hyp_norm`. Points already within the cap come back unchanged;
/// points on or outside the boundary sphere are pulled to the cap radius.
pub fn project_into_ball(x: &[f64], curvature: Curvature, max_hyp_norm: f64) -> Result<BallPoint> {
    if x.is_empty() {
        return Err(HyperError::InvalidArgument("empty point".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HyperError::NonFinite("point to project"));
    }
    if !(max_hyp_norm.is_finite() && max_hyp_norm > 0.0) {
        return Err(HyperError::InvalidArgument(format!(
            "max_hyp_norm must be positive and finite, got {max_hyp_norm}"
        )));
    }
    let c = curvature.value();
    let norm = raw::norm(x);
    let inside = c * norm * norm < 1.0;
    if inside && raw::distance_to_origin(x, c) <= max_hyp_norm {
        return Ok(BallPoint {
            coords: x.to_vec(),
            curvature,
        });
    }
    let radius = raw::radius_for_hyp_norm(max_hyp_norm, c);
    let coords = x.iter().map(|v| v * radius / norm).collect();
    Ok(BallPoint { coords, curvature })
}

/// `W ⊙ u = exp_o(W · log_o(u))`.
pub fn hyp_matvec(w: &Matrix, u: &BallPoint) -> Result<BallPoint> {
    if w.cols() != u.dim() {
        return Err(HyperError::DimensionMismatch {
            left: w.cols(),
            right: u.dim(),
        });
    }
    let t = log_map_origin(u);
    let wt = TangentVec(w.matvec(t.coords()));
    Ok(exp_map_origin(&wt, u.curvature))
}

/// `u ⊕ b = exp_o(log_o(u) + b)`.
pub fn hyp_bias_add(u: &BallPoint, b: &TangentVec) -> Result<BallPoint> {
    if b.dim() != u.dim() {
        return Err(HyperError::DimensionMismatch {
            left: u.dim(),
            right: b.dim(),
        });
    }
    let mut t = log_map_origin(u).into_coords();
    for (ti, bi) in t.iter_mut().zip(b.coords()) {
        *ti += bi;
    }
    Ok(exp_map_origin(&TangentVec(t), u.curvature))
}

/// `exp_o(σ(log_o((W ⊙ u) ⊕ b)))`, composed literally from the primitives.
pub fn hyp_linear(params: &HypLinearParams, u: &BallPoint) -> Result<BallPoint> {
    let moved = hyp_matvec(&params.weight, u)?;
    let shifted = hyp_bias_add(&moved, &params.bias)?;
    let activated: Vec<f64> = log_map_origin(&shifted)
        .into_coords()
        .into_iter()
        .map(|x| params.activation.apply(x))
        .collect();
    Ok(exp_map_origin(&TangentVec(activated), u.curvature))
}

/// Unvalidated slice kernels and their gradients.
pub mod raw {
    use super::{ARCOSH_EPS, ARTANH_MAX};

    #[inline]
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[inline]
    pub fn norm_sq(a: &[f64]) -> f64 {
        dot(a, a)
    }

    #[inline]
    pub fn norm(a: &[f64]) -> f64 {
        norm_sq(a).sqrt()
    }

    #[inline]
    pub fn diff_norm_sq(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }

    /// `arcosh(1 + x)` for `x ≥ 0`, without forming `1 + x`.
    #[inline]
    pub fn arcosh1p(x: f64) -> f64 {
        let x = x.max(0.0);
        (x + (x * (x + 2.0)).sqrt()).ln_1p()
    }

    #[inline]
    pub fn artanh_clamped(x: f64) -> f64 {
        x.min(ARTANH_MAX).atanh()
    }

    /// Offset `x = z - 1` of the `arcosh` argument, plus the pieces reused by
    /// the gradient: `(x, 1 - c‖u‖², 1 - c‖v‖², ‖u - v‖²)`.
    #[inline]
    fn distance_parts(u: &[f64], v: &[f64], c: f64) -> (f64, f64, f64, f64) {
        let alpha = 1.0 - c * norm_sq(u);
        let beta = 1.0 - c * norm_sq(v);
        let delta = diff_norm_sq(u, v);
        let x = (2.0 * c * delta / (alpha * beta)).max(0.0);
        (x, alpha, beta, delta)
    }

    /// Poincaré distance at curvature `-c`: the unit-curvature formula
    /// applied to `√c·u`, `√c·v`, divided by `√c`.
    #[inline]
    pub fn distance(u: &[f64], v: &[f64], c: f64) -> f64 {
        let (x, ..) = distance_parts(u, v, c);
        arcosh1p(x) / c.sqrt()
    }

    #[inline]
    pub fn distance_to_origin(u: &[f64], c: f64) -> f64 {
        let alpha = 1.0 - c * norm_sq(u);
        let x = (2.0 * c * norm_sq(u) / alpha).max(0.0);
        arcosh1p(x) / c.sqrt()
    }

    /// Euclidean radius whose hyperbolic norm is `hyp_norm`.
    #[inline]
    pub fn radius_for_hyp_norm(hyp_norm: f64, c: f64) -> f64 {
        let sc = c.sqrt();
        (sc * hyp_norm / 2.0).tanh().min(ARTANH_MAX) / sc
    }

    /// `arcosh(1+x) / sqrt(x(x+2))`, continuous at `x = 0` where it is 1.
    #[inline]
    fn arcosh_ratio(x: f64) -> f64 {
        if x < 1e-8 {
            1.0 - x / 3.0
        } else {
            arcosh1p(x) / (x * (x + 2.0)).max(ARCOSH_EPS).sqrt()
        }
    }

    /// Adds `scale · ∂(d²)/∂u` into `gu` and `scale · ∂(d²)/∂v` into `gv`;
    /// returns `d²`.
    pub fn distance_sq_grad(u: &[f64], v: &[f64], c: f64, scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        let (x, alpha, beta, delta) = distance_parts(u, v, c);
        let d = arcosh1p(x) / c.sqrt();
        // ∂(d²)/∂x = 2·arcosh(1+x) / (c·sqrt(x(x+2)))
        let dd_dx = 2.0 * arcosh_ratio(x) / c;
        let k = scale * dd_dx * 4.0 * c / (alpha * beta);
        let au = c * delta / alpha;
        let bv = c * delta / beta;
        for i in 0..u.len() {
            let diff = u[i] - v[i];
            gu[i] += k * (diff + au * u[i]);
            gv[i] += k * (-diff + bv * v[i]);
        }
        d * d
    }

    /// Adds `scale · ∂d/∂u`, `scale · ∂d/∂v`; returns `d`. Undefined at
    /// `u = v`, where the zero subgradient is used.
    pub fn distance_grad(u: &[f64], v: &[f64], c: f64, scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        let (x, alpha, beta, delta) = distance_parts(u, v, c);
        let d = arcosh1p(x) / c.sqrt();
        if x <= 0.0 {
            return d;
        }
        let dd_dx = 1.0 / (c.sqrt() * (x * (x + 2.0)).max(ARCOSH_EPS).sqrt());
        let k = scale * dd_dx * 4.0 * c / (alpha * beta);
        let au = c * delta / alpha;
        let bv = c * delta / beta;
        for i in 0..u.len() {
            let diff = u[i] - v[i];
            gu[i] += k * (diff + au * u[i]);
            gv[i] += k * (-diff + bv * v[i]);
        }
        d
    }

    #[inline]
    pub fn inner(u: &[f64], v: &[f64], c: f64) -> f64 {
        let nu = norm(u);
        let nv = norm(v);
        if nu == 0.0 || nv == 0.0 {
            return 0.0;
        }
        let cos = dot(u, v) / (nu * nv);
        distance_to_origin(u, c) * distance_to_origin(v, c) * cos
    }

    /// Adds `scale · ∂⟨u,v⟩_D/∂u` and `∂/∂v`; returns the inner product.
    pub fn inner_grad(u: &[f64], v: &[f64], c: f64, scale: f64, gu: &mut [f64], gv: &mut [f64]) -> f64 {
        let nu = norm(u);
        let nv = norm(v);
        let hu = distance_to_origin(u, c);
        let hv = distance_to_origin(v, c);
        match (nu == 0.0, nv == 0.0) {
            (true, true) => 0.0,
            // Limits: ⟨u, v⟩_D ≈ 2·N(v)·(u·v̂) near u = 0.
            (true, false) => {
                for i in 0..u.len() {
                    gu[i] += scale * 2.0 * hv * v[i] / nv;
                }
                0.0
            }
            (false, true) => {
                for i in 0..v.len() {
                    gv[i] += scale * 2.0 * hu * u[i] / nu;
                }
                0.0
            }
            (false, false) => {
                let cos = dot(u, v) / (nu * nv);
                // dN/dr = λ = 2 / (1 - c r²)
                let lu = 2.0 / (1.0 - c * nu * nu);
                let lv = 2.0 / (1.0 - c * nv * nv);
                for i in 0..u.len() {
                    let dcos_du = v[i] / (nu * nv) - cos * u[i] / (nu * nu);
                    let dcos_dv = u[i] / (nu * nv) - cos * v[i] / (nv * nv);
                    gu[i] += scale * hv * (lu * cos * u[i] / nu + hu * dcos_du);
                    gv[i] += scale * hu * (lv * cos * v[i] / nv + hv * dcos_dv);
                }
                hu * hv * cos
            }
        }
    }

    /// `exp_o(t)`. The output radius saturates at `ARTANH_MAX / √c` so the
    /// result is always strictly inside the ball.
    pub fn exp_map(t: &[f64], c: f64, out: &mut [f64]) {
        let s = norm(t);
        if s == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let sc = c.sqrt();
        let scale = (sc * s).tanh().min(ARTANH_MAX) / (sc * s);
        for (o, ti) in out.iter_mut().zip(t) {
            *o = scale * ti;
        }
    }

    pub fn log_map(u: &[f64], c: f64, out: &mut [f64]) {
        let r = norm(u);
        if r == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let sc = c.sqrt();
        let scale = artanh_clamped(sc * r) / (sc * r);
        for (o, ui) in out.iter_mut().zip(u) {
            *o = scale * ui;
        }
    }

    /// Adds the vector-Jacobian product of [`exp_map`] at `t` with `grad_out`
    /// into `grad_t`.
    pub fn exp_map_vjp(t: &[f64], c: f64, grad_out: &[f64], grad_t: &mut [f64]) {
        let s = norm(t);
        if s == 0.0 {
            // Jacobian at the origin is the identity.
            for (g, go) in grad_t.iter_mut().zip(grad_out) {
                *g += go;
            }
            return;
        }
        let sc = c.sqrt();
        let y = sc * s;
        let th = y.tanh();
        let proj = dot(t, grad_out);
        if th > ARTANH_MAX {
            // Saturated: constant radius, only the direction moves.
            let g = ARTANH_MAX / y;
            for i in 0..t.len() {
                grad_t[i] += g * (grad_out[i] - proj * t[i] / (s * s));
            }
            return;
        }
        // x = g(s)·t with g(s) = tanh(√c s)/(√c s); J = g·I + (g'(s)/s)·t tᵀ.
        let g = th / y;
        let h = if y < 0.05 {
            let y2 = y * y;
            c * (-2.0 / 3.0 + 8.0 * y2 / 15.0 - 102.0 * y2 * y2 / 315.0)
        } else {
            let sech2 = 1.0 - th * th;
            (y * sech2 - th) / (sc * s * s * s)
        };
        for i in 0..t.len() {
            grad_t[i] += g * grad_out[i] + h * proj * t[i];
        }
    }
}
