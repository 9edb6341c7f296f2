//! Synthetic fixtures: complete trees and hierarchical implicit feedback.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::RawInteraction;
use crate::error::{HyperError, Result};

/// A rooted tree with all-pairs hop distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub parent: Vec<Option<usize>>,
    /// Row-major `n × n` hop counts.
    pub distances: Vec<u32>,
}

impl Tree {
    /// Complete tree with `branching` children per inner node; depth 0 is a
    /// single root. Nodes are numbered in breadth-first order.
    pub fn complete(branching: usize, depth: u32) -> Result<Self> {
        if branching == 0 {
            return Err(HyperError::InvalidArgument("branching must be at least 1".into()));
        }
        let mut parent = vec![None];
        let mut frontier = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(frontier.len() * branching);
            for &p in &frontier {
                for _ in 0..branching {
                    next.push(parent.len());
                    parent.push(Some(p));
                }
            }
            frontier = next;
        }
        Ok(Self::from_parents(parent))
    }

    pub fn from_parents(parent: Vec<Option<usize>>) -> Self {
        let n = parent.len();
        let mut adj = vec![Vec::new(); n];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                adj[c].push(p);
                adj[p].push(c);
            }
        }
        let mut distances = vec![u32::MAX; n * n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            distances[s * n + s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                let d = distances[s * n + v];
                for &w in &adj[v] {
                    if distances[s * n + w] == u32::MAX {
                        distances[s * n + w] = d + 1;
                        queue.push_back(w);
                    }
                }
            }
        }
        Tree { parent, distances }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.distances[a * self.len() + b]
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for p in self.parent.iter().flatten() {
            has_child[*p] = true;
        }
        (0..self.len()).filter(|&v| !has_child[v]).collect()
    }
}

/// Parameters of [`hierarchical_feedback`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Target fraction of the user × item matrix that is observed.
    pub density: f64,
    pub branching: usize,
    /// Zipf exponent of item popularity.
    pub zipf_exponent: f64,
    /// Zipf exponent of per-user activity.
    pub activity_exponent: f64,
    /// Probability of climbing one more level before drawing an item.
    pub climb: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 2000,
            n_items: 1000,
            density: 0.003,
            branching: 4,
            zipf_exponent: 1.0,
            activity_exponent: 0.5,
            climb: 0.5,
            seed: 0,
        }
    }
}

/// Cumulative weights for inverse-CDF draws.
struct Cdf(Vec<f64>);

impl Cdf {
    fn new(weights: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        Cdf(weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let x = rng.random::<f64>() * self.0.last().copied().unwrap_or(0.0);
        self.0.partition_point(|&c| c <= x).min(self.0.len() - 1)
    }
}

/// Implicit feedback with a latent item hierarchy and power-law popularity.
///
/// Items are the leaves of a complete tree. Each user has a home leaf drawn
/// by popularity; every interaction climbs a geometric number of levels
/// from home and draws a leaf of that subtree by popularity. Activity per
/// user follows a Zipf law scaled to hit the target density. Timestamps are
/// the draw order. Items never drawn are then given to a user whose home
/// shares the smallest subtree with them, at timestamp 0, so every item
/// occurs at least once.
pub fn hierarchical_feedback(config: &SyntheticConfig) -> Result<Vec<RawInteraction>> {
    let SyntheticConfig {
        n_users,
        n_items,
        density,
        branching,
        zipf_exponent,
        activity_exponent,
        climb,
        seed,
    } = *config;
    if n_users == 0 || n_items == 0 || branching < 2 {
        return Err(HyperError::InvalidArgument(
            "synthetic data needs users, items and branching ≥ 2".into(),
        ));
    }
    if !(density > 0.0 && density <= 1.0) || !(0.0..1.0).contains(&climb) {
        return Err(HyperError::InvalidArgument(
            "density must be in (0, 1] and climb in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Smallest complete tree with enough leaves; extra leaves are dropped.
    let mut depth = 1u32;
    while branching.pow(depth) < n_items {
        depth += 1;
    }
    let leaves_total = branching.pow(depth);
    let keep: Vec<usize> = {
        let mut all: Vec<usize> = (0..leaves_total).collect();
        all.shuffle(&mut rng);
        let mut k = all[..n_items].to_vec();
        k.sort_unstable();
        k
    };
    // External item id of each kept leaf, shuffled so ids carry no structure.
    let mut item_of: Vec<Option<u64>> = vec![None; leaves_total];
    let mut ids: Vec<u64> = (1..=n_items as u64).collect();
    ids.shuffle(&mut rng);
    for (leaf, id) in keep.iter().zip(&ids) {
        item_of[*leaf] = Some(*id);
    }
    let mut pop = vec![0.0; leaves_total];
    let mut ranks: Vec<usize> = keep.clone();
    ranks.shuffle(&mut rng);
    for (r, &leaf) in ranks.iter().enumerate() {
        pop[leaf] = 1.0 / ((r + 1) as f64).powf(zipf_exponent);
    }

    let activity: Vec<f64> = (0..n_users)
        .map(|r| 1.0 / ((r + 1) as f64).powf(activity_exponent))
        .collect();
    let target = (density * n_users as f64 * n_items as f64).round();
    let scale = target / activity.iter().sum::<f64>();
    let mut counts: Vec<usize> = activity
        .iter()
        .map(|a| ((a * scale).round() as usize).clamp(1, n_items / 2))
        .collect();
    counts.shuffle(&mut rng);

    let home_cdf = Cdf::new(pop.iter().copied());
    let homes: Vec<usize> = (0..n_users).map(|_| home_cdf.draw(&mut rng)).collect();
    let mut out = Vec::new();
    let mut clock = 0i64;
    for (u, &count) in counts.iter().enumerate() {
        let home = homes[u];
        let mut seen = std::collections::HashSet::new();
        let mut attempts = 0;
        while seen.len() < count && attempts < 50 * count {
            attempts += 1;
            let mut level = 0;
            while level < depth && rng.random::<f64>() < climb {
                level += 1;
            }
            let width = branching.pow(level);
            let lo = home / width * width;
            let sub = Cdf::new(pop[lo..lo + width].iter().copied());
            let leaf = lo + sub.draw(&mut rng);
            let Some(item) = item_of[leaf] else { continue };
            if seen.insert(item) {
                clock += 1;
                out.push(RawInteraction {
                    user: u as u64 + 1,
                    item,
                    rating: 1.0,
                    timestamp: clock,
                });
            }
        }
    }
    let mut drawn = vec![false; n_items + 1];
    for r in &out {
        drawn[r.item as usize] = true;
    }
    for &leaf in &keep {
        let item = item_of[leaf].expect("kept leaf");
        if drawn[item as usize] {
            continue;
        }
        let mut width = 1;
        let owner = loop {
            let lo = leaf / width * width;
            let near: Vec<usize> = (0..n_users).filter(|&u| (lo..lo + width).contains(&homes[u])).collect();
            if !near.is_empty() {
                break near[rng.random_range(0..near.len())];
            }
            width *= branching;
        };
        out.push(RawInteraction {
            user: owner as u64 + 1,
            item,
            rating: 1.0,
            timestamp: 0,
        });
    }
    Ok(out)
}
