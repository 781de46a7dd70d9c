//! Second-order biased random walks.
//!
//! From the current node `c`, reached from `prev`, the next node `x` is drawn
//! with probability proportional to `alpha(x) * w(c, x)` where the search bias
//! `alpha` is `1/p` when `x == prev`, `1` when `x` is adjacent to `prev`, and
//! `1/q` otherwise. The edge weight factor is only used when
//! `use_edge_weights` is set (the reweighted target layer); source-layer walks
//! use the bias alone.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub p: f64,
    pub q: f64,
    pub use_edge_weights: bool,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 80,
            p: 1.0,
            q: 1.0,
            use_edge_weights: false,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 || self.walk_length < 1 {
            return Err(Error::value("walks_per_node and walk_length must be >= 1"));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::value(format!(
                "p and q must be positive, got p={}, q={}",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Layer {
    Source,
    Target,
}

/// Materialized walks plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    pub walks: Vec<Vec<usize>>,
    pub config: WalkConfig,
    pub layer: Layer,
    pub node_count: usize,
}

impl WalkSet {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    /// Occurrences of each node across all walks.
    pub fn visit_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.node_count];
        for walk in &self.walks {
            for &v in walk {
                counts[v] += 1;
            }
        }
        counts
    }

    /// Header `#walks k=<k> l=<l> p=<p> q=<q>` then one walk per line.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "#walks k={} l={} p={} q={}\n",
            c.walks_per_node, c.walk_length, c.p, c.q
        );
        for walk in &self.walks {
            let mut first = true;
            for v in walk {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`WalkSet::to_text`] output. `node_count` defaults to one past
    /// the largest index seen.
    pub fn from_text(text: &str, layer: Layer, node_count: Option<usize>) -> Result<Self> {
        let mut config = WalkConfig::default();
        let mut walks = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix("#walks") {
                for kv in header.split_whitespace() {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::parse(lineno + 1, format!("bad header field `{kv}`")))?;
                    let bad = || Error::parse(lineno + 1, format!("bad header value `{kv}`"));
                    match k {
                        "k" => config.walks_per_node = v.parse().map_err(|_| bad())?,
                        "l" => config.walk_length = v.parse().map_err(|_| bad())?,
                        "p" => config.p = v.parse().map_err(|_| bad())?,
                        "q" => config.q = v.parse().map_err(|_| bad())?,
                        _ => return Err(bad()),
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let walk = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::parse(lineno + 1, format!("bad node index `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            walks.push(walk);
        }
        let seen = walks.iter().flatten().max().map_or(0, |&m| m + 1);
        let node_count = node_count.unwrap_or(seen);
        if seen > node_count {
            return Err(Error::value(format!(
                "walk index {} out of range for {node_count} nodes",
                seen - 1
            )));
        }
        Ok(Self {
            walks,
            config,
            layer,
            node_count,
        })
    }
}

/// Normalized next-step distribution over the neighbors of the current node.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDistribution<T> {
    pub candidates: Vec<usize>,
    pub probabilities: Vec<T>,
}

/// Search bias of stepping to `x` given the previous node.
pub fn search_bias<T: Scalar>(g: &Graph<T>, prev: Option<usize>, x: usize, p: f64, q: f64) -> f64 {
    match prev {
        None => 1.0,
        Some(prev) if x == prev => 1.0 / p,
        Some(prev) if g.has_edge(prev, x) => 1.0,
        Some(_) => 1.0 / q,
    }
}

fn fill_scores<T: Scalar>(
    g: &Graph<T>,
    prev: Option<usize>,
    curr: usize,
    cfg: &WalkConfig,
    scores: &mut Vec<T>,
) -> T {
    scores.clear();
    let mut total = T::zero();
    for (&x, &w) in g.neighbors(curr).iter().zip(g.neighbor_weights(curr)) {
        let mut s = T::of(search_bias(g, prev, x, cfg.p, cfg.q));
        if cfg.use_edge_weights {
            s *= w;
        }
        total += s;
        scores.push(s);
    }
    total
}

/// Transition distribution out of `curr`; `None` when `curr` has no
/// neighbors.
pub fn transition<T: Scalar>(
    g: &Graph<T>,
    prev: Option<usize>,
    curr: usize,
    cfg: &WalkConfig,
) -> Option<TransitionDistribution<T>> {
    if g.out_degree(curr) == 0 {
        return None;
    }
    let mut scores = Vec::new();
    let total = fill_scores(g, prev, curr, cfg, &mut scores);
    Some(TransitionDistribution {
        candidates: g.neighbors(curr).to_vec(),
        probabilities: scores.into_iter().map(|s| s / total).collect(),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the RNG stream for one `(root, repeat)` walk.
pub fn walk_seed(seed: u64, root: usize, repeat: usize) -> u64 {
    seed ^ splitmix64(((root as u64) << 20) ^ splitmix64(repeat as u64))
}

/// One walk of at most `cfg.walk_length` nodes from `root`.
pub fn walk_from<T: Scalar>(g: &Graph<T>, root: usize, repeat: usize, cfg: &WalkConfig) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(cfg.seed, root, repeat));
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(root);
    let mut scores = Vec::new();
    while walk.len() < cfg.walk_length {
        let curr = *walk.last().expect("walk is never empty");
        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
        if g.out_degree(curr) == 0 {
            break;
        }
        let total = fill_scores(g, prev, curr, cfg, &mut scores);
        let mut target = T::of(rng.random::<f64>()) * total;
        let neighbors = g.neighbors(curr);
        let mut next = neighbors[neighbors.len() - 1];
        for (i, &s) in scores.iter().enumerate() {
            if target < s {
                next = neighbors[i];
                break;
            }
            target -= s;
        }
        walk.push(next);
    }
    walk
}

/// `walks_per_node` walks from every node with neighbors, in `(node,
/// repeat)` order, plus a singleton walk for each isolated node.
///
/// `workers` caps the thread count (`None` uses the global pool). The
/// result does not depend on it.
pub fn generate_walks<T: Scalar>(
    g: &Graph<T>,
    cfg: &WalkConfig,
    layer: Layer,
    workers: Option<usize>,
) -> Result<WalkSet> {
    cfg.validate()?;
    let n = g.node_count();
    let k = cfg.walks_per_node;
    let run = || -> Vec<Vec<usize>> {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|u| {
                let reps = if g.out_degree(u) == 0 { 1 } else { k };
                (0..reps).map(move |r| {
                    if g.out_degree(u) == 0 {
                        vec![u]
                    } else {
                        walk_from(g, u, r, cfg)
                    }
                })
            })
            .collect()
    };
    let walks = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(WalkSet {
        walks,
        config: *cfg,
        layer,
        node_count: n,
    })
}
