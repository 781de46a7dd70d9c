//! Adjacency storage, edge-list ingestion and degree statistics.
//!
//! External node identifiers are arbitrary strings; every computation works
//! on dense indices `0..node_count` assigned in first-appearance order. The
//! [`IdMap`] carries the bijection and can be persisted so that isolated
//! nodes (which an edge list cannot express) survive a save/load cycle.

mod degree;
mod power_law;

pub use degree::DegreeStats;
pub use power_law::{fit_power_law, log_binned_density, plot_csv, PowerLawFit};

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bidirectional mapping between external node identifiers and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Identifiers `"0"`, `"1"`, ... for graphs built from dense indices.
    pub fn sequential(n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    /// Returns the dense index of `name`, assigning the next one if unseen.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// `external_id<TAB>dense_index` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "{name}\t{i}");
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(name), Some(idx), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(lineno + 1, "expected `external_id<TAB>dense_index`"));
            };
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::parse(lineno + 1, format!("bad index `{idx}`")))?;
            if idx != map.len() || map.get(name).is_some() {
                return Err(Error::parse(
                    lineno + 1,
                    "indices must be dense, ascending and unique",
                ));
            }
            map.intern(name);
        }
        Ok(map)
    }
}

/// Immutable weighted graph in compressed sparse row form.
///
/// Undirected graphs store every edge as two arcs of equal weight. Neighbor
/// lists are sorted by index so adjacency tests are a binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    directed: bool,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<T>,
    in_degree: Vec<usize>,
    ids: IdMap,
}

impl<T: Scalar> Graph<T> {
    /// Builds a graph over dense indices. Duplicate edges sum their weights;
    /// self-loops and non-positive weights are rejected.
    pub fn from_edges<I>(node_count: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        Self::from_edges_with_ids(IdMap::sequential(node_count), edges, directed)
    }

    pub fn from_edges_with_ids<I>(ids: IdMap, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let n = ids.len();
        let mut merged: HashMap<(usize, usize), T> = HashMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::value(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::value(format!("self-loop on node {}", ids.name(u))));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::value(format!("edge weight must be positive, got {w}")));
            }
            let key = if directed || u < v { (u, v) } else { (v, u) };
            *merged.entry(key).or_insert_with(T::zero) += w;
        }
        let mut arcs: Vec<(usize, usize, T)> = Vec::with_capacity(merged.len() * 2);
        for ((u, v), w) in merged {
            arcs.push((u, v, w));
            if !directed {
                arcs.push((v, u, w));
            }
        }
        arcs.sort_unstable_by_key(|a| (a.0, a.1));

        let mut offsets = vec![0usize; n + 1];
        let mut in_degree = if directed { vec![0usize; n] } else { Vec::new() };
        for &(u, v, _) in &arcs {
            offsets[u + 1] += 1;
            if directed {
                in_degree[v] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.iter().map(|a| a.1).collect();
        let weights = arcs.iter().map(|a| a.2).collect();
        Ok(Self {
            directed,
            offsets,
            targets,
            weights,
            in_degree,
            ids,
        })
    }

    pub fn empty() -> Self {
        Self::from_edges(0, std::iter::empty(), false).expect("empty graph is valid")
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    /// Number of edge records: undirected edges are counted once.
    pub fn edge_count(&self) -> usize {
        if self.directed {
            self.targets.len()
        } else {
            self.targets.len() / 2
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    /// Out-neighbors of `u`, ascending.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    /// Weights aligned with [`Graph::neighbors`].
    pub fn neighbor_weights(&self, u: usize) -> &[T] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// Incident edge count: out-degree plus in-degree for directed graphs.
    pub fn degree(&self, u: usize) -> usize {
        if self.directed {
            self.out_degree(u) + self.in_degree[u]
        } else {
            self.out_degree(u)
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Weight of arc `u -> v`, zero when absent.
    pub fn weight(&self, u: usize, v: usize) -> T {
        match self.neighbors(u).binary_search(&v) {
            Ok(pos) => self.neighbor_weights(u)[pos],
            Err(_) => T::zero(),
        }
    }

    /// Edge records: `(u, v, w)` with `u < v` for undirected graphs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.neighbor_weights(u))
                .filter(move |(&v, _)| self.directed || u < v)
                .map(move |(&v, &w)| (u, v, w))
        })
    }

    /// Undirected view; reciprocal arcs merge by summing weights.
    pub fn symmetrized(&self) -> Self {
        if !self.directed {
            return self.clone();
        }
        Self::from_edges_with_ids(self.ids.clone(), self.edges(), false)
            .expect("edges of a valid graph are valid")
    }

    /// Same node set and identifiers, replacing every edge.
    pub fn with_edges<I>(&self, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        Self::from_edges_with_ids(self.ids.clone(), edges, self.directed)
    }

    pub fn degree_stats(&self) -> DegreeStats {
        DegreeStats::of(self)
    }

    /// Serializes to edge-list text (`u v w` with external identifiers).
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, v, w) in self.edges() {
            let _ = writeln!(out, "{} {} {}", self.ids.name(u), self.ids.name(v), w);
        }
        out
    }
}

/// Parses edge-list text. Lines are `u v` or `u v w`; `#` starts a comment.
pub fn load_edge_list<T: Scalar>(source_text: &str, directed: bool, default_weight: T) -> Result<Graph<T>> {
    load_edge_list_with_ids(source_text, IdMap::new(), directed, default_weight)
}

/// Like [`load_edge_list`], but starting from a persisted id map so dense
/// indices (and isolated nodes) are reproduced exactly.
pub fn load_edge_list_with_ids<T: Scalar>(
    source_text: &str,
    mut ids: IdMap,
    directed: bool,
    default_weight: T,
) -> Result<Graph<T>> {
    let mut edges = Vec::new();
    for (lineno, line) in source_text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let weight = match tokens.len() {
            2 => default_weight,
            3 => tokens[2]
                .parse::<T>()
                .map_err(|_| Error::parse(lineno, format!("non-numeric weight `{}`", tokens[2])))?,
            n => return Err(Error::parse(lineno, format!("expected 2 or 3 tokens, found {n}"))),
        };
        if !(weight > T::zero()) {
            return Err(Error::value(format!("line {lineno}: weight must be positive, got {weight}")));
        }
        if tokens[0] == tokens[1] {
            return Err(Error::value(format!("line {lineno}: self-loop on `{}`", tokens[0])));
        }
        let u = ids.intern(tokens[0]);
        let v = ids.intern(tokens[1]);
        edges.push((u, v, weight));
    }
    Graph::from_edges_with_ids(ids, edges, directed)
}
