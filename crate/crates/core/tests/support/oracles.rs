//! Independent oracles shared by the integration tests and the acceptance
//! suite. Every check returns the worst observed error next to its tolerance
//! instead of asserting, so callers decide how to report.
#![allow(dead_code)]

use std::time::Instant;

use hyperrec_core::data::{Interaction, SocialTriplet, Split, SplitKind, TrainingTriplet};
use hyperrec_core::eval::{evaluate_full_ranking, EvalTarget, HeldOut, Scorer};
use hyperrec_core::geometry::{
    exp_map_origin, log_map_origin, poincare_distance, raw, BallPoint, Curvature, TangentVec,
};
use hyperrec_core::models::{Batch, Model, ModelConfig, ModelKind};
use hyperrec_core::spaces::{EmbeddingTable, SpaceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One measured quantity of a check.
#[derive(Debug, Clone)]
pub struct Measure {
    pub label: String,
    pub worst: f64,
    pub tol: f64,
}

impl Measure {
    pub fn new(label: impl Into<String>, worst: f64, tol: f64) -> Self {
        Measure {
            label: label.into(),
            worst,
            tol,
        }
    }

    /// NaN never passes.
    pub fn ok(&self) -> bool {
        self.worst <= self.tol
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub measures: Vec<Measure>,
    pub seconds: f64,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.measures.iter().all(Measure::ok)
    }

    pub fn failures(&self) -> Vec<&Measure> {
        self.measures.iter().filter(|m| !m.ok()).collect()
    }

    pub fn summary(&self) -> String {
        self.measures
            .iter()
            .map(|m| format!("{} {:.2e}/{:.0e}", m.label, m.worst, m.tol))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn timed(f: impl FnOnce() -> Vec<Measure>) -> CheckReport {
    let t = Instant::now();
    let measures = f();
    CheckReport {
        measures,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = raw::norm(&v);
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// A point at hyperbolic norm `h` in a random direction, built from the
/// closed form `r = tanh(√c·h/2)/√c`.
fn point_at(rng: &mut impl Rng, dim: usize, c: f64, h: f64) -> Vec<f64> {
    let r = (c.sqrt() * h / 2.0).tanh() / c.sqrt();
    unit_vector(rng, dim).iter().map(|x| x * r).collect()
}

fn random_point(rng: &mut impl Rng, dim: usize, c: f64, max_h: f64) -> Vec<f64> {
    let h = rng.random_range(0.0..max_h);
    point_at(rng, dim, c, h)
}

fn ball(coords: Vec<f64>, c: Curvature) -> BallPoint {
    BallPoint::new(coords, c).expect("sampled point lies inside the ball")
}

/// Radial identity, exp/log round trips, symmetry, triangle inequality and
/// angle preservation of the metric tensor.
pub fn geometry_identities(triples: usize, dims: &[usize], seed: u64) -> CheckReport {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Curvature::new(1.0).unwrap();
        let (mut radial, mut roundtrip, mut symmetry, mut triangle, mut conformal) = (0f64, 0f64, 0f64, 0f64, 0f64);
        for &dim in dims {
            let origin = BallPoint::origin(dim, unit);
            for _ in 0..triples {
                let u = random_point(&mut rng, dim, 1.0, 6.0);
                let r = raw::norm(&u);
                let pu = ball(u.clone(), unit);
                radial = radial.max((poincare_distance(&origin, &pu).unwrap() - 2.0 * r.atanh()).abs());

                // Tangent norms up to 3 reach hyperbolic norm 6.
                let t: Vec<f64> = unit_vector(&mut rng, dim)
                    .iter()
                    .map(|x| x * rng.random_range(0.0..3.0))
                    .collect();
                let back = log_map_origin(&exp_map_origin(&TangentVec::new(t.clone()).unwrap(), unit));
                let lu = log_map_origin(&pu);
                let again = exp_map_origin(&lu, unit);
                for i in 0..dim {
                    roundtrip = roundtrip.max((back.coords()[i] - t[i]).abs());
                    roundtrip = roundtrip.max((again.coords()[i] - u[i]).abs());
                }

                let c = [0.5, 1.0, 2.0][rng.random_range(0..3)];
                let cv = Curvature::new(c).unwrap();
                let [a, b, w] = [0; 3].map(|_| ball(random_point(&mut rng, dim, c, 6.0), cv));
                let dab = poincare_distance(&a, &b).unwrap();
                let dba = poincare_distance(&b, &a).unwrap();
                symmetry = symmetry.max((dab - dba).abs());
                let excess = poincare_distance(&a, &w).unwrap() - dab - poincare_distance(&b, &w).unwrap();
                triangle = triangle.max(excess);

                conformal = conformal.max(metric_angle_error(&mut rng, dim, c));
            }
        }
        vec![
            Measure::new("radial", radial, 1e-9),
            Measure::new("exp/log", roundtrip, 1e-9),
            Measure::new("symmetry", symmetry, 1e-9),
            Measure::new("triangle", triangle.max(0.0), 1e-9),
            Measure::new("angle", conformal, 1e-9),
        ]
    })
}

/// The metric tensor at `x` is recovered from the analytic gradient of `d²`:
/// `∇_v d²(x, x ± εa) = ±2εGa + O(ε³)`, so the central difference isolates
/// `Ga` up to `O(ε²)`, and Richardson extrapolation over `ε` and `ε/2`
/// removes that term. Returns the gap between the angle of two tangent
/// vectors under `G` and their Euclidean angle.
fn metric_angle_error(rng: &mut impl Rng, dim: usize, c: f64) -> f64 {
    if dim < 2 {
        return 0.0;
    }
    let x = random_point(rng, dim, c, 4.0);
    let central = |a: &[f64], eps: f64| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi + sign * eps * ai).collect();
            let mut gx = vec![0.0; dim];
            let mut gv = vec![0.0; dim];
            raw::distance_sq_grad(&x, &v, c, 1.0, &mut gx, &mut gv);
            for i in 0..dim {
                out[i] += sign * gv[i] / (4.0 * eps);
            }
        }
        out
    };
    // Steps shrink with the distance to the boundary, the local length scale.
    let eps = 1e-3 * (1.0 - c * raw::norm_sq(&x)) / c.sqrt();
    let g_times = |a: &[f64]| -> Vec<f64> {
        let coarse = central(a, eps);
        let fine = central(a, eps / 2.0);
        fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
    };
    let a = unit_vector(rng, dim);
    let b = unit_vector(rng, dim);
    let ga = g_times(&a);
    let gb = g_times(&b);
    let (na, nb) = (raw::dot(&a, &ga).sqrt(), raw::dot(&b, &gb).sqrt());
    // Half-angle form `2·atan2(‖â − b̂‖, ‖â + b̂‖)` stays accurate near 0 and π.
    let half = |sign: f64| -> f64 {
        let w: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x / na + sign * y / nb).collect();
        let gw: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x / na + sign * y / nb).collect();
        raw::dot(&w, &gw).max(0.0).sqrt()
    };
    let riemann = 2.0 * half(-1.0).atan2(half(1.0));
    let minus: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let plus: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let euclid = 2.0 * raw::norm(&minus).atan2(raw::norm(&plus));
    (riemann - euclid).abs()
}

/// Below this gradient magnitude the comparison is absolute. Draws whose
/// hinge terms cancel exactly have a zero gradient, and central differences
/// near the ball boundary then return rounding noise up to ~1e-7.
pub const GRAD_FLOOR: f64 = 1e-2;

/// Component-wise worst gap over the larger gradient magnitude.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let gap = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = analytic
        .iter()
        .chain(numeric)
        .map(|x| x.abs())
        .fold(GRAD_FLOOR, f64::max);
    gap / scale
}

pub const FD_STEP: f64 = 1e-5;

/// Central difference of `f` with respect to every coordinate of `x`.
pub fn numeric_gradient(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let hi = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * FD_STEP)
        })
        .collect()
}

fn spaces_under_test(rng: &mut impl Rng) -> [SpaceKind; 2] {
    let c = rng.random_range(0.5..2.0);
    [SpaceKind::Euclidean, SpaceKind::poincare(c, 6.0).unwrap()]
}

fn point_in(rng: &mut impl Rng, space: &SpaceKind, dim: usize) -> Vec<f64> {
    match *space {
        SpaceKind::Euclidean => (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
        SpaceKind::PoincareBall { curvature, .. } => random_point(rng, dim, curvature.value(), 5.0),
    }
}

/// Distance and inner-product kernels against central differences.
pub fn primitive_gradients(configs: usize, seed: u64) -> CheckReport {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = [[0f64; 2]; 2];
        for _ in 0..configs {
            let dim = rng.random_range(1..=10);
            for (si, space) in spaces_under_test(&mut rng).iter().enumerate() {
                let u = point_in(&mut rng, space, dim);
                let v = point_in(&mut rng, space, dim);
                let joint: Vec<f64> = u.iter().chain(&v).copied().collect();

                let mut gu = vec![0.0; dim];
                let mut gv = vec![0.0; dim];
                space.distance_grad(&u, &v, 1.0, &mut gu, &mut gv);
                let analytic: Vec<f64> = gu.iter().chain(&gv).copied().collect();
                let numeric = numeric_gradient(&joint, |p| space.distance(&p[..dim], &p[dim..]));
                worst[si][0] = worst[si][0].max(relative_error(&analytic, &numeric));

                let mut gu = vec![0.0; dim];
                let mut gv = vec![0.0; dim];
                space.inner_grad(&u, &v, 1.0, &mut gu, &mut gv);
                let analytic: Vec<f64> = gu.iter().chain(&gv).copied().collect();
                let numeric = numeric_gradient(&joint, |p| space.inner(&p[..dim], &p[dim..]));
                worst[si][1] = worst[si][1].max(relative_error(&analytic, &numeric));
            }
        }
        vec![
            Measure::new("euclidean distance", worst[0][0], 1e-4),
            Measure::new("euclidean inner", worst[0][1], 1e-4),
            Measure::new("poincare distance", worst[1][0], 1e-4),
            Measure::new("poincare inner", worst[1][1], 1e-4),
        ]
    })
}

/// Loss variants covered by [`loss_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossCase {
    Bpr,
    Rating,
    Cml,
    CmlRankWeighted,
    Scml,
}

impl LossCase {
    pub const ALL: [LossCase; 5] = [
        LossCase::Bpr,
        LossCase::Rating,
        LossCase::Cml,
        LossCase::CmlRankWeighted,
        LossCase::Scml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossCase::Bpr => "bpr",
            LossCase::Rating => "rating",
            LossCase::Cml => "cml",
            LossCase::CmlRankWeighted => "cml+rank",
            LossCase::Scml => "scml",
        }
    }

    fn kind(self) -> ModelKind {
        match self {
            LossCase::Bpr => ModelKind::MfBpr,
            LossCase::Rating => ModelKind::MfRating,
            LossCase::Cml | LossCase::CmlRankWeighted => ModelKind::Cml,
            LossCase::Scml => ModelKind::Scml,
        }
    }
}

/// Flat view of every trainable scalar of a model.
fn flatten(m: &Model) -> Vec<f64> {
    let mut out = m.users.params().to_vec();
    out.extend_from_slice(m.items.params());
    out.extend(m.users.biases().into_iter().flatten());
    out.extend(m.items.biases().into_iter().flatten());
    out
}

fn rebuild(template: &Model, flat: &[f64]) -> Model {
    let (nu, ni, dim) = (template.n_users(), template.n_items(), template.config.dim);
    let (up, rest) = flat.split_at(nu * dim);
    let (ip, rest) = rest.split_at(ni * dim);
    let (ub, ib) = if template.users.biases().is_some() {
        let (ub, ib) = rest.split_at(nu);
        (Some(ub.to_vec()), Some(ib.to_vec()))
    } else {
        (None, None)
    };
    let mut m = template.clone();
    m.users = EmbeddingTable::from_params(nu, dim, up.to_vec(), ub).unwrap();
    m.items = EmbeddingTable::from_params(ni, dim, ip.to_vec(), ib).unwrap();
    m
}

fn analytic_flat(m: &Model, batch: &Batch) -> (f64, Vec<f64>) {
    let bl = m.batch_loss(batch).unwrap();
    let dim = m.config.dim;
    let mut out = Vec::new();
    for (grads, rows) in [(&bl.users, m.n_users()), (&bl.items, m.n_items())] {
        for r in 0..rows {
            match grads.get(r) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat_n(0.0, dim)),
            }
        }
    }
    if m.users.biases().is_some() {
        for (grads, rows) in [(&bl.users, m.n_users()), (&bl.items, m.n_items())] {
            out.extend((0..rows).map(|r| grads.get_bias(r).unwrap_or(0.0)));
        }
    }
    (bl.loss, out)
}

/// Stored rows for a random model; Poincaré rows straddle the tangent cap
/// but stay clear of it.
fn random_rows(rng: &mut impl Rng, space: &SpaceKind, rows: usize, dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        match space.tangent_norm_cap() {
            None => out.extend((0..dim).map(|_| rng.random_range(-1.0..1.0))),
            Some(cap) => {
                let norm = loop {
                    let s: f64 = rng.random_range(0.05..cap + 1.0);
                    if (s - cap).abs() > 1e-2 {
                        break s;
                    }
                };
                out.extend(unit_vector(rng, dim).iter().map(|x| x * norm));
            }
        }
    }
    out
}

/// Smallest distance of any hinge or hardest-negative choice from its
/// switching point, so finite differences never straddle a kink.
fn kink_clearance(m: &Model, batch: &Batch) -> f64 {
    let space = m.config.space;
    let users = m.users.materialize_all(&space);
    let items = m.items.materialize_all(&space);
    let dim = m.config.dim;
    let row = |t: &[f64], r: usize| t[r * dim..(r + 1) * dim].to_vec();
    let d2 = |a: &[f64], b: &[f64]| space.distance(a, b).powi(2);
    let mut clearance = f64::INFINITY;
    let mut prev: Option<(usize, usize, f64)> = None;
    for t in &batch.item_triplets {
        let u = row(&users, t.user);
        let dp = d2(&u, &row(&items, t.positive));
        let dn = d2(&u, &row(&items, t.negative));
        clearance = clearance.min((m.config.margin_item + dp - dn).abs());
        if m.config.rank_weighting {
            if let Some((pu, pp, pdn)) = prev {
                if pu == t.user && pp == t.positive {
                    clearance = clearance.min((pdn - dn).abs());
                }
            }
            prev = Some((t.user, t.positive, dn));
        }
    }
    if m.config.model == ModelKind::Scml {
        for s in &batch.social {
            let u = row(&users, s.user);
            let dp = d2(&u, &row(&users, s.positive));
            let dn = d2(&u, &row(&users, s.negative));
            clearance = clearance.min((m.config.margin_social + dp - dn).abs());
        }
    }
    clearance
}

fn random_case(rng: &mut impl Rng, case: LossCase, space: SpaceKind) -> (Model, Batch) {
    let (nu, ni) = (5, 6);
    let dim = rng.random_range(1..=5);
    let mut config = ModelConfig::new(case.kind(), space, dim);
    config.margin_item = rng.random_range(0.2..3.0);
    config.margin_social = rng.random_range(0.2..3.0);
    config.social_weight = rng.random_range(0.05..1.0);
    config.rank_weighting = case == LossCase::CmlRankWeighted;
    let mut users = EmbeddingTable::from_params(nu, dim, random_rows(rng, &space, nu, dim), None).unwrap();
    let mut items = EmbeddingTable::from_params(ni, dim, random_rows(rng, &space, ni, dim), None).unwrap();
    if case.kind().has_biases() {
        let ub = (0..nu).map(|_| rng.random_range(-0.5..0.5)).collect();
        let ib = (0..ni).map(|_| rng.random_range(-0.5..0.5)).collect();
        users = EmbeddingTable::from_params(nu, dim, users.params().to_vec(), Some(ub)).unwrap();
        items = EmbeddingTable::from_params(ni, dim, items.params().to_vec(), Some(ib)).unwrap();
    }
    let model = Model {
        config,
        users,
        items,
        global_mean: rng.random_range(2.0..4.0),
    };
    let mut batch = Batch::default();
    let distinct = |rng: &mut dyn FnMut() -> usize, avoid: usize| loop {
        let x = rng();
        if x != avoid {
            break x;
        }
    };
    let groups = if case == LossCase::CmlRankWeighted { 2 } else { 4 };
    let per_group = if case == LossCase::CmlRankWeighted { 3 } else { 1 };
    for _ in 0..groups {
        let user = rng.random_range(0..nu);
        let positive = rng.random_range(0..ni);
        for _ in 0..per_group {
            let negative = distinct(&mut || rng.random_range(0..ni), positive);
            batch.item_triplets.push(TrainingTriplet {
                user,
                positive,
                negative,
            });
        }
    }
    for _ in 0..3 {
        let user = rng.random_range(0..nu);
        let positive = distinct(&mut || rng.random_range(0..nu), user);
        let negative = distinct(&mut || rng.random_range(0..nu), user);
        batch.social.push(SocialTriplet {
            user,
            positive,
            negative,
        });
    }
    for _ in 0..4 {
        batch.ratings.push(Interaction {
            user: rng.random_range(0..nu),
            item: rng.random_range(0..ni),
            rating: rng.random_range(1..=5) as f64,
            timestamp: 0,
        });
    }
    (model, batch)
}

/// Every loss composed through materialization, in both spaces, against
/// central differences over all stored parameters. Configurations whose
/// gradient vanishes or that sit within reach of a kink are redrawn.
pub fn loss_gradients(configs: usize, seed: u64) -> CheckReport {
    timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for case in LossCase::ALL {
            for space_index in 0..2 {
                let mut worst = 0f64;
                let mut done = 0;
                let mut space_name = "";
                while done < configs {
                    let space = spaces_under_test(&mut rng)[space_index];
                    space_name = space.name();
                    let (model, batch) = random_case(&mut rng, case, space);
                    if kink_clearance(&model, &batch) < 1e-2 {
                        continue;
                    }
                    let (loss, analytic) = analytic_flat(&model, &batch);
                    if loss == 0.0 {
                        continue;
                    }
                    let numeric = numeric_gradient(&flatten(&model), |p| {
                        rebuild(&model, p).batch_loss(&batch).unwrap().loss
                    });
                    worst = worst.max(relative_error(&analytic, &numeric));
                    done += 1;
                }
                out.push(Measure::new(format!("{} {}", case.name(), space_name), worst, 1e-4));
            }
        }
        out
    })
}

/// Scores read from a dense table.
pub struct TableScorer {
    pub n_items: usize,
    pub scores: Vec<f64>,
}

impl Scorer for TableScorer {
    fn n_users(&self) -> usize {
        self.scores.len() / self.n_items
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.scores[user * self.n_items..(user + 1) * self.n_items]);
    }
}

/// A random leave-one-out fixture: coarse integer scores so ties are common,
/// a sprinkling of NaN, and some users without held-out items.
pub fn ranking_fixture(seed: u64, n_users: usize, n_items: usize) -> (TableScorer, Split) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..n_users * n_items)
        .map(|_| {
            if rng.random_bool(0.02) {
                f64::NAN
            } else {
                rng.random_range(0..12) as f64 * 0.25
            }
        })
        .collect();
    let mut split = Split {
        kind: SplitKind::LeaveOneOut,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        non_evaluable: Vec::new(),
    };
    let at = |user, item| Interaction {
        user,
        item,
        rating: 1.0,
        timestamp: 0,
    };
    for user in 0..n_users {
        let mut items: Vec<usize> = (0..n_items).collect();
        for i in 0..n_items {
            let j = rng.random_range(i..n_items);
            items.swap(i, j);
        }
        let n_train = rng.random_range(0..n_items / 3);
        split.train.extend(items[..n_train].iter().map(|&i| at(user, i)));
        if rng.random_bool(0.9) {
            split.validation.push(at(user, items[n_train]));
            split.test.push(at(user, items[n_train + 1]));
        } else {
            split.non_evaluable.push(user);
        }
    }
    (TableScorer { n_items, scores }, split)
}

/// Brute force: sort all candidates by (NaN last, score descending, id
/// ascending) and read off the 0-based position of the target.
pub fn brute_force_metrics(
    scorer: &TableScorer,
    split: &Split,
    target: EvalTarget,
    ks: &[usize],
) -> Vec<(usize, f64, f64)> {
    let n_items = scorer.n_items;
    let held = match target {
        EvalTarget::Test => &split.test,
        EvalTarget::Validation => &split.validation,
    };
    let other = match target {
        EvalTarget::Test => &split.validation,
        EvalTarget::Validation => &split.test,
    };
    let mut positions = Vec::new();
    for h in held {
        let u = h.user;
        let row = &scorer.scores[u * n_items..(u + 1) * n_items];
        let blocked = |i: usize| {
            split.train.iter().any(|t| t.user == u && t.item == i) || other.iter().any(|t| t.user == u && t.item == i)
        };
        let mut cands: Vec<usize> = (0..n_items).filter(|&i| i == h.item || !blocked(i)).collect();
        cands.sort_by(|&a, &b| {
            let (sa, sb) = (row[a], row[b]);
            match (sa.is_nan(), sb.is_nan()) {
                (true, true) => a.cmp(&b),
                (true, false) => std::cmp::Ordering::Greater,
                (false, true) => std::cmp::Ordering::Less,
                (false, false) => sb.partial_cmp(&sa).unwrap().then(a.cmp(&b)),
            }
        });
        positions.push(cands.iter().position(|&i| i == h.item).unwrap());
    }
    let n = positions.len() as f64;
    ks.iter()
        .map(|&k| {
            let (mut hr, mut ndcg) = (0.0, 0.0);
            for &p in &positions {
                if p < k {
                    hr += 1.0;
                    ndcg += 1.0 / ((p + 2) as f64).log2();
                }
            }
            (k, hr / n, ndcg / n)
        })
        .collect()
}

/// Full-ranking evaluator against the brute-force oracle, compared with
/// exact floating-point equality.
pub fn ranking_oracle(fixtures: usize, seed: u64) -> CheckReport {
    timed(|| {
        let ks = [1, 3, 5, 10, 15, 20, 100];
        let mut mismatches = 0usize;
        for f in 0..fixtures as u64 {
            let (scorer, split) = ranking_fixture(seed + f, 50, 100);
            let held = HeldOut::from_split(50, 100, &split).unwrap();
            for target in [EvalTarget::Test, EvalTarget::Validation] {
                let report = evaluate_full_ranking(&scorer, &held, target, &ks).unwrap();
                for (k, hr, ndcg) in brute_force_metrics(&scorer, &split, target, &ks) {
                    if report.hr_at(k) != Some(hr) || report.ndcg_at(k) != Some(ndcg) {
                        mismatches += 1;
                    }
                }
            }
        }
        let hand = hyperrec_core::eval::ndcg_at_k(&[7, 3, 9], &[7, 9], 3).unwrap();
        vec![
            Measure::new("mismatches", mismatches as f64, 0.0),
            Measure::new("hand ndcg", (hand - 0.919721).abs(), 1e-6),
        ]
    })
}
