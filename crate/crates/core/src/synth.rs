//! Seeded synthetic graphs used as fixtures.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// A graph whose nodes carry one or more label ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph<T> {
    pub graph: Graph<T>,
    /// Label ids per dense node index.
    pub labels: Vec<Vec<usize>>,
}

impl<T: Scalar> LabeledGraph<T> {
    /// Label file text: `<external_id> <label> [<label> ...]` per node.
    pub fn label_text(&self) -> String {
        let mut out = String::new();
        for (u, ls) in self.labels.iter().enumerate() {
            let _ = write!(out, "{}", self.graph.ids().name(u));
            for l in ls {
                let _ = write!(out, " {l}");
            }
            out.push('\n');
        }
        out
    }
}

/// Preferential attachment: a complete graph on `m + 1` seed nodes, then
/// every later node attaches `m` edges to distinct existing nodes with
/// probability proportional to their degree.
pub fn scale_free<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<Graph<T>> {
    if m < 1 || n <= m {
        return Err(Error::value(format!("scale_free needs n > m >= 1, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * m);
    // one entry per edge endpoint: sampling uniformly from it is degree-proportional
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n * m);
    for u in 0..=m {
        for v in (u + 1)..=m {
            edges.push((u, v, T::one()));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for u in (m + 1)..n {
        chosen.clear();
        while chosen.len() < m {
            let v = endpoints[rng.random_range(0..endpoints.len())];
            if !chosen.contains(&v) {
                chosen.push(v);
            }
        }
        for &v in &chosen {
            edges.push((u, v, T::one()));
            endpoints.push(u);
            endpoints.push(v);
        }
    }
    Graph::from_edges(n, edges, false)
}

/// Planted partition: `n` nodes in `communities` equal contiguous blocks;
/// each within-block pair is an edge with probability `p_in`, each
/// cross-block pair with probability `p_out`. A node's label is its block.
pub fn planted_partition<T: Scalar>(
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<LabeledGraph<T>> {
    if communities < 2 {
        return Err(Error::value("planted_partition needs at least 2 communities"));
    }
    if n == 0 || !n.is_multiple_of(communities) {
        return Err(Error::value(format!(
            "n={n} must be a positive multiple of communities={communities}"
        )));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::value(format!(
            "need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let size = n / communities;
    let block = |u: usize| u / size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v, T::one()));
            }
        }
    }
    Ok(LabeledGraph {
        graph: Graph::from_edges(n, edges, false)?,
        labels: (0..n).map(|u| vec![block(u)]).collect(),
    })
}

/// Keeps `round(keep_fraction * |E|)` edges sampled uniformly without
/// replacement. Every node survives, possibly as an isolate.
pub fn degrade<T: Scalar>(g: &Graph<T>, keep_fraction: f64, seed: u64) -> Result<Graph<T>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::value(format!("keep_fraction must be in (0, 1], got {keep_fraction}")));
    }
    let edges: Vec<_> = g.edges().collect();
    let keep = ((edges.len() as f64) * keep_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, edges.len(), keep).into_vec();
    picked.sort_unstable();
    g.with_edges(picked.into_iter().map(|i| edges[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_free_boundary_is_complete_seed() {
        let g: Graph<f64> = scale_free(4, 3, 1).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert!((0..4).all(|u| g.degree(u) == 3));
    }

    #[test]
    fn scale_free_shape_and_errors() {
        let g: Graph<f64> = scale_free(200, 2, 9).unwrap();
        assert_eq!(g.node_count(), 200);
        assert_eq!(g.edge_count(), 3 + 2 * (200 - 3));
        assert!(scale_free::<f64>(3, 3, 0).is_err());
        assert!(scale_free::<f64>(5, 0, 0).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let a: Graph<f64> = scale_free(300, 3, 42).unwrap();
        let b: Graph<f64> = scale_free(300, 3, 42).unwrap();
        assert_eq!(a, b);
        let c: Graph<f64> = scale_free(300, 3, 43).unwrap();
        assert_ne!(a, c);
        let p: LabeledGraph<f64> = planted_partition(60, 3, 0.3, 0.05, 5).unwrap();
        let q: LabeledGraph<f64> = planted_partition(60, 3, 0.3, 0.05, 5).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn extreme_probabilities_give_disjoint_cliques() {
        let lg: LabeledGraph<f64> = planted_partition(12, 3, 1.0, 0.0, 0).unwrap();
        assert_eq!(lg.graph.edge_count(), 3 * 6);
        for (u, v, _) in lg.graph.edges() {
            assert_eq!(lg.labels[u], lg.labels[v]);
        }
        assert!((0..12).all(|u| lg.graph.degree(u) == 3));
    }

    #[test]
    fn planted_partition_expected_degrees() {
        // binomial expectations: (n/k - 1) p_in = 9.9 and (n - n/k) p_out = 2.0
        let mut intra = 0.0;
        let mut inter = 0.0;
        let seeds = 10;
        for seed in 0..seeds {
            let lg: LabeledGraph<f64> = planted_partition(300, 3, 0.1, 0.01, seed).unwrap();
            for (u, v, _) in lg.graph.edges() {
                if lg.labels[u] == lg.labels[v] {
                    intra += 2.0;
                } else {
                    inter += 2.0;
                }
            }
        }
        let nodes = 300.0 * seeds as f64;
        assert!((intra / nodes - 9.9).abs() < 0.3, "{}", intra / nodes);
        assert!((inter / nodes - 2.0).abs() < 0.15, "{}", inter / nodes);
    }

    #[test]
    fn planted_partition_rejects_bad_parameters() {
        assert!(planted_partition::<f64>(10, 3, 0.5, 0.1, 0).is_err());
        assert!(planted_partition::<f64>(12, 1, 0.5, 0.1, 0).is_err());
        assert!(planted_partition::<f64>(12, 3, 0.1, 0.1, 0).is_err());
        assert!(planted_partition::<f64>(12, 3, 1.1, 0.1, 0).is_err());
    }

    #[test]
    fn degrade_keeps_exact_count_and_nodes() {
        let g: Graph<f64> = scale_free(600, 2, 3).unwrap();
        let m = g.edge_count();
        let same = degrade(&g, 1.0, 7).unwrap();
        assert_eq!(same, g);
        // pick a graph with exactly 1000 edges
        let edges: Vec<_> = g.edges().take(1000).collect();
        let g = g.with_edges(edges).unwrap();
        assert!(m > 1000);
        let half = degrade(&g, 0.5, 7).unwrap();
        assert_eq!(half.edge_count(), 500);
        assert_eq!(half.node_count(), g.node_count());
        assert!(half.edges().all(|(u, v, _)| g.has_edge(u, v)));
        assert!(degrade(&g, 0.0, 7).is_err());
    }

    #[test]
    fn label_text_lists_every_node() {
        let lg: LabeledGraph<f64> = planted_partition(6, 2, 1.0, 0.0, 0).unwrap();
        assert_eq!(lg.label_text(), "0 0\n1 0\n2 0\n3 1\n4 1\n5 1\n");
    }
}
