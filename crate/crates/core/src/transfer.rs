//! Structural knowledge transfer from source walks to target edge weights.
//!
//! Source walks are folded into a *super graph* over super nodes: every pair
//! of walk positions `i < j` holding distinct nodes adds `1 / (j - i)` to the
//! super edge between their super nodes (self-loops included). A target pair
//! `(u, v)` then gains the weighted mean, over all super nodes linked to `u`
//! and to `v`, of the average super-edge weight along the hop-count shortest
//! path between those super nodes. Non-edges that gain weight become new
//! edges.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::balance::{CrossLinks, SuperNodeSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;
use crate::walker::WalkSet;

/// Weighted undirected graph over super nodes, addressed by rank position.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperGraph<T> {
    ids: Vec<usize>,
    pos_of: HashMap<usize, usize>,
    /// Sorted by neighbor position; may contain the node itself (self-loop).
    adjacency: Vec<Vec<(usize, T)>>,
    /// Walk positions whose node belongs to no super node.
    pub unclustered_visits: u64,
}

impl<T: Scalar> SuperGraph<T> {
    fn from_entries(ids: Vec<usize>, entries: impl IntoIterator<Item = ((usize, usize), T)>, unclustered: u64) -> Self {
        let n = ids.len();
        let mut adjacency = vec![Vec::new(); n];
        for ((a, b), w) in entries {
            if w > T::zero() {
                adjacency[a].push((b, w));
                if a != b {
                    adjacency[b].push((a, w));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|e| e.0);
        }
        let pos_of = ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        Self {
            ids,
            pos_of,
            adjacency,
            unclustered_visits: unclustered,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn super_id(&self, pos: usize) -> usize {
        self.ids[pos]
    }

    pub fn position(&self, super_id: usize) -> Option<usize> {
        self.pos_of.get(&super_id).copied()
    }

    /// Super-edge weight, zero when absent.
    pub fn weight(&self, a: usize, b: usize) -> T {
        match self.adjacency[a].binary_search_by_key(&b, |e| e.0) {
            Ok(i) => self.adjacency[a][i].1,
            Err(_) => T::zero(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .enumerate()
            .map(|(a, l)| l.iter().filter(|(b, _)| *b >= a).count())
            .sum()
    }

    /// Neighbors of `a` other than itself, ascending.
    pub fn neighbors(&self, a: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.adjacency[a].iter().copied().filter(move |&(b, _)| b != a)
    }

    /// `super_i<TAB>super_j<TAB>w_prime`, each edge once with `i <= j` in
    /// rank order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (a, list) in self.adjacency.iter().enumerate() {
            for &(b, w) in list.iter().filter(|(b, _)| *b >= a) {
                let _ = writeln!(out, "{}\t{}\t{}", self.ids[a], self.ids[b], w);
            }
        }
        out
    }

    /// Parses [`SuperGraph::to_tsv`] output against the super-node set that
    /// produced it.
    pub fn from_tsv(text: &str, supers: &SuperNodeSet<T>) -> Result<Self> {
        let ids: Vec<usize> = supers.iter().map(|s| s.id).collect();
        let pos_of: HashMap<usize, usize> = ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(lineno, "expected 3 tab-separated fields"));
            }
            let pos = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .ok()
                    .and_then(|id| pos_of.get(&id).copied())
                    .ok_or_else(|| Error::parse(lineno, format!("unknown super id `{s}`")))
            };
            let w: T = f[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad weight `{}`", f[2])))?;
            let (a, b) = (pos(f[0])?, pos(f[1])?);
            entries.push(((a.min(b), a.max(b)), w));
        }
        Ok(Self::from_entries(ids, entries, 0))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SuperGraphOptions {
    /// Ignore walk position pairs further apart than this.
    pub pair_distance_cap: Option<usize>,
}

const SUPER_GRAPH_CHUNKS: usize = 8;
const DENSE_LIMIT: usize = 1024;

/// Per-chunk sparse weights and unclustered-visit count.
type SparsePartial<T> = (HashMap<(usize, usize), T>, u64);

fn accumulate_walk<T: Scalar>(
    walk: &[usize],
    membership: &[Option<usize>],
    cap: usize,
    mut add: impl FnMut(usize, usize, T),
) -> u64 {
    let mut unclustered = 0;
    for (i, &a) in walk.iter().enumerate() {
        let Some(sa) = membership[a] else {
            unclustered += 1;
            continue;
        };
        for (dist, &b) in walk[i + 1..].iter().take(cap).enumerate() {
            if a == b {
                continue;
            }
            if let Some(sb) = membership[b] {
                add(sa.min(sb), sa.max(sb), T::one() / T::of_usize(dist + 1));
            }
        }
    }
    unclustered
}

/// Accumulates inverse within-walk distances between super nodes.
///
/// Walks are split into a fixed number of contiguous chunks summed in
/// parallel and combined in chunk order, so the result is independent of the
/// thread count.
pub fn build_super_graph<T: Scalar>(
    walks: &WalkSet,
    supers: &SuperNodeSet<T>,
    options: &SuperGraphOptions,
) -> SuperGraph<T> {
    let n = supers.len();
    let ids: Vec<usize> = supers.iter().map(|s| s.id).collect();
    let membership = supers.membership(walks.node_count);
    let cap = options.pair_distance_cap.unwrap_or(usize::MAX);
    let chunk = walks.walks.len().div_ceil(SUPER_GRAPH_CHUNKS).max(1);

    if n <= DENSE_LIMIT {
        let partials: Vec<(Vec<T>, u64)> = walks
            .walks
            .par_chunks(chunk)
            .map(|ws| {
                let mut m = vec![T::zero(); n * n];
                let mut unclustered = 0;
                for w in ws {
                    unclustered += accumulate_walk(w, &membership, cap, |a, b, x: T| m[a * n + b] += x);
                }
                (m, unclustered)
            })
            .collect();
        let mut total = vec![T::zero(); n * n];
        let mut unclustered = 0;
        for (m, u) in partials {
            for (t, x) in total.iter_mut().zip(m) {
                *t += x;
            }
            unclustered += u;
        }
        let entries = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).map(|(a, b)| ((a, b), total[a * n + b]));
        SuperGraph::from_entries(ids, entries.collect::<Vec<_>>(), unclustered)
    } else {
        let partials: Vec<SparsePartial<T>> = walks
            .walks
            .par_chunks(chunk)
            .map(|ws| {
                let mut m: HashMap<(usize, usize), T> = HashMap::new();
                let mut unclustered = 0;
                for w in ws {
                    unclustered += accumulate_walk(w, &membership, cap, |a, b, x: T| {
                        *m.entry((a, b)).or_insert_with(T::zero) += x
                    });
                }
                (m, unclustered)
            })
            .collect();
        let mut total: std::collections::BTreeMap<(usize, usize), T> = Default::default();
        let mut unclustered = 0;
        for (m, u) in partials {
            let mut m: Vec<_> = m.into_iter().collect();
            m.sort_by_key(|e| e.0);
            for (k, x) in m {
                *total.entry(k).or_insert_with(T::zero) += x;
            }
            unclustered += u;
        }
        SuperGraph::from_entries(ids, total, unclustered)
    }
}

/// A scored super-graph path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathScore<T> {
    /// Rank positions from start to end.
    pub path: Vec<usize>,
    /// Edge count.
    pub length: usize,
    /// Mean super-edge weight along the path; the self-loop weight for a
    /// zero-length path.
    pub score: T,
}

struct Bfs<T> {
    parent: Vec<Option<usize>>,
    depth: Vec<Option<usize>>,
    weight_sum: Vec<T>,
}

fn bfs<T: Scalar>(sg: &SuperGraph<T>, start: usize) -> Bfs<T> {
    let n = sg.len();
    let mut out = Bfs {
        parent: vec![None; n],
        depth: vec![None; n],
        weight_sum: vec![T::zero(); n],
    };
    out.depth[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        let d = out.depth[a].expect("queued nodes have a depth");
        for (b, w) in sg.neighbors(a) {
            if out.depth[b].is_none() {
                out.depth[b] = Some(d + 1);
                out.parent[b] = Some(a);
                out.weight_sum[b] = out.weight_sum[a] + w;
                queue.push_back(b);
            }
        }
    }
    out
}

fn path_score<T: Scalar>(sg: &SuperGraph<T>, tree: &Bfs<T>, start: usize, end: usize) -> Option<T> {
    if start == end {
        return Some(sg.weight(start, start));
    }
    let len = tree.depth[end]?;
    Some(tree.weight_sum[end] / T::of_usize(len))
}

/// Hop-count shortest path between rank positions `a` and `b`.
///
/// Breadth-first search expanding neighbors in ascending order, so among
/// equally short paths the lexicographically smallest is returned.
pub fn shortest_path<T: Scalar>(sg: &SuperGraph<T>, a: usize, b: usize) -> Option<PathScore<T>> {
    let tree = bfs(sg, a);
    let score = path_score(sg, &tree, a, b)?;
    let mut path = vec![b];
    let mut cur = b;
    while let Some(p) = tree.parent[cur] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    Some(PathScore {
        length: path.len() - 1,
        path,
        score,
    })
}

/// Path scores from a fixed set of start positions to every super node,
/// one breadth-first search per start.
pub struct PathScores<T> {
    rows: HashMap<usize, Vec<Option<T>>>,
}

impl<T: Scalar> PathScores<T> {
    pub fn from_starts(sg: &SuperGraph<T>, starts: impl IntoIterator<Item = usize>) -> Self {
        let starts: Vec<usize> = starts.into_iter().collect::<HashSet<_>>().into_iter().collect();
        let rows = starts
            .into_par_iter()
            .map(|a| {
                let tree = bfs(sg, a);
                (a, (0..sg.len()).map(|b| path_score(sg, &tree, a, b)).collect())
            })
            .collect();
        Self { rows }
    }

    /// `None` when `b` is unreachable from `a` (or `a` was not a start).
    pub fn get(&self, a: usize, b: usize) -> Option<T> {
        self.rows.get(&a).and_then(|r| r[b])
    }
}

/// All target edges plus every non-adjacent pair within `hop_limit` hops, as
/// `(u, v)` with `u < v`, sorted.
pub fn candidate_pairs<T: Scalar>(g_t: &Graph<T>, hop_limit: usize) -> Result<Vec<(usize, usize)>> {
    if hop_limit < 1 {
        return Err(Error::value("hop_limit must be >= 1"));
    }
    let sym;
    let g = if g_t.is_directed() {
        sym = g_t.symmetrized();
        &sym
    } else {
        g_t
    };
    let n = g.node_count();
    let pairs: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut depth: HashMap<usize, usize> = HashMap::from([(u, 0)]);
            let mut frontier = vec![u];
            for d in 1..=hop_limit {
                let mut next = Vec::new();
                for &x in &frontier {
                    for &y in g.neighbors(x) {
                        if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(y) {
                            e.insert(d);
                            next.push(y);
                        }
                    }
                }
                frontier = next;
            }
            let mut out: Vec<(usize, usize)> = depth.into_keys().filter(|&v| v > u).map(|v| (u, v)).collect();
            out.sort_unstable();
            out
        })
        .collect();
    Ok(pairs.into_iter().flatten().collect())
}

/// Transferred weight of one target pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeight<T> {
    pub u: usize,
    pub v: usize,
    /// Weight before transfer (zero for a non-edge).
    pub original: T,
    /// Weight after transfer.
    pub weight: T,
    /// Sum of link-weight products; the normalizer of the increment.
    pub z: T,
}

impl<T: Scalar> PairWeight<T> {
    pub fn increment(&self) -> T {
        self.weight - self.original
    }

    pub fn is_evolved(&self) -> bool {
        self.original == T::zero() && self.weight > T::zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult<T> {
    pub pairs: Vec<PairWeight<T>>,
}

impl<T: Scalar> TransferResult<T> {
    pub fn evolved(&self) -> impl Iterator<Item = &PairWeight<T>> {
        self.pairs.iter().filter(|p| p.is_evolved())
    }

    /// `u<TAB>v<TAB>w0<TAB>w_t<TAB>evolved_flag` with external identifiers.
    pub fn to_tsv(&self, g_t: &Graph<T>) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                g_t.ids().name(p.u),
                g_t.ids().name(p.v),
                p.original,
                p.weight,
                u8::from(p.is_evolved())
            );
        }
        out
    }
}

/// Increment for one pair: the link-weight-weighted mean of path scores
/// between the super nodes linked to `u` and those linked to `v`.
/// Unreachable super-node pairs contribute a zero score.
pub fn pair_increment<T: Scalar>(
    sg: &SuperGraph<T>,
    scores: &PathScores<T>,
    cross: &CrossLinks<T>,
    u: usize,
    v: usize,
) -> Result<(T, T)> {
    let mut num = T::zero();
    let mut z = T::zero();
    for lu in cross.links_of(u) {
        let a = sg
            .position(lu.super_id)
            .ok_or_else(|| Error::State(format!("super node {} missing from super graph", lu.super_id)))?;
        for lv in cross.links_of(v) {
            let b = sg
                .position(lv.super_id)
                .ok_or_else(|| Error::State(format!("super node {} missing from super graph", lv.super_id)))?;
            let product = lu.weight * lv.weight;
            z += product;
            let s = scores.get(a, b).or_else(|| scores.get(b, a)).unwrap_or_else(T::zero);
            num += product * s;
        }
    }
    let increment = if z > T::zero() { num / z } else { T::zero() };
    Ok((increment, z))
}

/// Updates the weight of every candidate pair.
pub fn transfer_weights<T: Scalar>(
    g_t: &Graph<T>,
    sg: &SuperGraph<T>,
    cross: &CrossLinks<T>,
    candidates: &[(usize, usize)],
) -> Result<TransferResult<T>> {
    let starts = cross
        .classes
        .iter()
        .flat_map(|c| c.links.iter())
        .filter_map(|l| sg.position(l.super_id));
    let scores = PathScores::from_starts(sg, starts);
    let pairs = candidates
        .par_iter()
        .map(|&(u, v)| {
            let original = g_t.weight(u, v).max(g_t.weight(v, u));
            let (increment, z) = pair_increment(sg, &scores, cross, u, v)?;
            Ok(PairWeight {
                u,
                v,
                original,
                weight: original + increment,
                z,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferResult { pairs })
}

/// Target graph with transferred weights: every original edge reweighted,
/// every evolved pair inserted as a new undirected edge.
pub fn evolve_edges<T: Scalar>(g_t: &Graph<T>, result: &TransferResult<T>) -> Result<Graph<T>> {
    let base = if g_t.is_directed() { g_t.symmetrized() } else { g_t.clone() };
    let mut covered = HashSet::new();
    let mut edges = Vec::new();
    for p in &result.pairs {
        if p.weight < p.original {
            return Err(Error::State(format!("pair ({}, {}) lost weight", p.u, p.v)));
        }
        covered.insert((p.u.min(p.v), p.u.max(p.v)));
        if p.weight > T::zero() {
            edges.push((p.u, p.v, p.weight));
        }
    }
    edges.extend(base.edges().filter(|(u, v, _)| !covered.contains(&(*u.min(v), *u.max(v)))));
    base.with_edges(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::balance::{align_by_rank, init_weights, SuperNodeSet};
    use crate::graph::DegreeStats;
    use crate::walker::{Layer, WalkConfig};

    fn walkset(walks: Vec<Vec<usize>>, n: usize) -> WalkSet {
        WalkSet {
            walks,
            config: WalkConfig::default(),
            layer: Layer::Source,
            node_count: n,
        }
    }

    /// Nodes 0..n each in their own super node with distinct degrees;
    /// `groups[i]` lists the node indices of super node i (rank order).
    fn supers_of(groups: &[&[usize]]) -> SuperNodeSet<f64> {
        let total = groups.len();
        let g = groups
            .iter()
            .enumerate()
            .map(|(i, nodes)| {
                nodes
                    .iter()
                    .map(|&node| crate::balance::Member { node, degree: total - i })
                    .collect()
            })
            .collect();
        SuperNodeSet::from_groups(g).unwrap()
    }

    fn graph_from(n: usize, edges: &[(usize, usize, f64)]) -> SuperGraph<f64> {
        SuperGraph::from_entries((0..n).collect(), edges.iter().map(|&(a, b, w)| ((a.min(b), a.max(b)), w)), 0)
    }

    #[test]
    fn hand_enumerated_walk() {
        // a=0 in V1, b=1 and c=2 in V2
        let s = supers_of(&[&[0], &[1, 2]]);
        let sg = build_super_graph(&walkset(vec![vec![0, 1, 2, 0]], 3), &s, &Default::default());
        assert_eq!(sg.weight(0, 1), 3.0);
        assert_eq!(sg.weight(1, 0), 3.0);
        assert_eq!(sg.weight(1, 1), 1.0);
        assert_eq!(sg.weight(0, 0), 0.0);
        assert_eq!(sg.edge_count(), 2);
    }

    #[test]
    fn empty_walks_give_empty_super_graph() {
        let s = supers_of(&[&[0], &[1]]);
        let sg = build_super_graph(&walkset(vec![], 2), &s, &Default::default());
        assert_eq!(sg.edge_count(), 0);
    }

    #[test]
    fn duplicated_walks_double_weights() {
        let s = supers_of(&[&[0, 3], &[1], &[2]]);
        let walks = vec![vec![0, 1, 2], vec![3, 2, 1], vec![1, 0]];
        let once = build_super_graph(&walkset(walks.clone(), 4), &s, &Default::default());
        let twice = build_super_graph(&walkset([walks.clone(), walks].concat(), 4), &s, &Default::default());
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(twice.weight(a, b), 2.0 * once.weight(a, b));
            }
        }
    }

    #[test]
    fn distance_cap_and_unclustered_nodes() {
        let s = supers_of(&[&[0], &[1]]);
        let opts = SuperGraphOptions { pair_distance_cap: Some(1) };
        // node 2 is unclustered
        let sg = build_super_graph(&walkset(vec![vec![0, 2, 1, 0]], 3), &s, &opts);
        assert_eq!(sg.weight(0, 1), 1.0);
        assert_eq!(sg.unclustered_visits, 1);
    }

    #[test]
    fn dense_and_sparse_accumulation_agree() {
        let n = DENSE_LIMIT + 5;
        let groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let refs: Vec<&[usize]> = groups.iter().map(|g| g.as_slice()).collect();
        let s = supers_of(&refs);
        let walks: Vec<Vec<usize>> = (0..50).map(|i| vec![i, i + 1, i + 2, i]).collect();
        let sparse = build_super_graph(&walkset(walks.clone(), n), &s, &Default::default());
        let small_groups: Vec<Vec<usize>> = (0..60).map(|i| vec![i]).collect();
        let small_refs: Vec<&[usize]> = small_groups.iter().map(|g| g.as_slice()).collect();
        let dense = build_super_graph(&walkset(walks, 60), &supers_of(&small_refs), &Default::default());
        for a in 0..60 {
            for b in 0..60 {
                let (ia, ib) = (
                    sparse.position(dense.super_id(a)).unwrap(),
                    sparse.position(dense.super_id(b)).unwrap(),
                );
                assert_eq!(dense.weight(a, b), sparse.weight(ia, ib));
            }
        }
    }

    #[test]
    fn single_edge_path() {
        let sg = graph_from(2, &[(0, 1, 3.0)]);
        let p = shortest_path(&sg, 0, 1).unwrap();
        assert_eq!(p.length, 1);
        assert_eq!(p.score, 3.0);
        assert_eq!(p.path, vec![0, 1]);
    }

    #[test]
    fn chain_path_averages_weights() {
        let sg = graph_from(3, &[(0, 1, 2.0), (1, 2, 4.0)]);
        let p = shortest_path(&sg, 0, 2).unwrap();
        assert_eq!(p.length, 2);
        assert_eq!(p.score, 3.0);
    }

    #[test]
    fn same_node_uses_self_loop_and_unreachable_is_none() {
        let sg = graph_from(3, &[(0, 0, 5.0), (0, 1, 1.0)]);
        let p = shortest_path(&sg, 0, 0).unwrap();
        assert_eq!((p.length, p.score), (0, 5.0));
        assert_eq!(shortest_path(&sg, 1, 1).unwrap().score, 0.0);
        assert!(shortest_path(&sg, 0, 2).is_none());
    }

    #[test]
    fn ties_take_smallest_indices() {
        // 0-1-3 and 0-2-3 both have two hops
        let sg = graph_from(4, &[(0, 2, 10.0), (2, 3, 10.0), (0, 1, 1.0), (1, 3, 1.0)]);
        let p = shortest_path(&sg, 0, 3).unwrap();
        assert_eq!(p.path, vec![0, 1, 3]);
        assert_eq!(p.score, 1.0);
    }

    #[test]
    fn candidate_sets() {
        let path: Graph<f64> = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)], false).unwrap();
        assert_eq!(candidate_pairs(&path, 1).unwrap(), vec![(0, 1), (1, 2)]);
        assert_eq!(candidate_pairs(&path, 2).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
        let k4: Graph<f64> = Graph::from_edges(
            4,
            [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)],
            false,
        )
        .unwrap();
        assert_eq!(candidate_pairs(&k4, 2).unwrap().len(), 6);
        assert!(candidate_pairs(&k4, 0).is_err());
    }

    /// Target: path 0-1-2 plus isolated 3. Two target classes (degree 2
    /// and degree 1) linked one-to-one to super nodes 0 and 1.
    fn two_class_setup(w01: f64) -> (Graph<f64>, SuperGraph<f64>, CrossLinks<f64>) {
        let g_t: Graph<f64> = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0)], false).unwrap();
        let s = SuperNodeSet::<f64>::from_member_degrees(&[&[2], &[1]]).unwrap();
        let mut a = align_by_rank(&DegreeStats::of(&g_t), &s).unwrap();
        init_weights(&mut a.cross, &s).unwrap();
        let sg = graph_from(2, &[(0, 1, w01), (1, 1, 0.5)]);
        (g_t, sg, a.cross)
    }

    #[test]
    fn unlinked_node_keeps_original_weight() {
        let (g_t, sg, cross) = two_class_setup(3.0);
        let r = transfer_weights(&g_t, &sg, &cross, &[(2, 3)]).unwrap();
        assert_eq!(r.pairs[0].weight, 0.0);
        assert_eq!(r.pairs[0].z, 0.0);
    }

    #[test]
    fn hand_evaluated_increment() {
        // u linked to V1 with w*=0.5, v to V2 with w*=1.0, path score 3, w0=1
        let g_t: Graph<f64> = Graph::from_edges(2, [(0, 1, 1.0)], false).unwrap();
        let s = SuperNodeSet::<f64>::from_member_degrees(&[&[2], &[1]]).unwrap();
        let mut a = align_by_rank(&DegreeStats::from_sequence(vec![4, 1]), &s).unwrap();
        init_weights(&mut a.cross, &s).unwrap();
        assert_eq!(a.cross.links_of(0)[0].weight, 0.5);
        assert_eq!(a.cross.links_of(1)[0].weight, 1.0);
        let sg = graph_from(2, &[(0, 1, 3.0)]);
        let r = transfer_weights(&g_t, &sg, &a.cross, &[(0, 1)]).unwrap();
        assert_eq!(r.pairs[0].z, 0.5);
        assert_eq!(r.pairs[0].increment(), 3.0);
        assert_eq!(r.pairs[0].weight, 4.0);
    }

    #[test]
    fn constant_scores_give_constant_increment() {
        // every super pair scores s=2 (complete graph, all weights 2, self loops 2)
        let sg = graph_from(
            4,
            &[(0, 1, 2.0), (0, 2, 2.0), (0, 3, 2.0), (1, 2, 2.0), (1, 3, 2.0), (2, 3, 2.0), (0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (3, 3, 2.0)],
        );
        let g_t: Graph<f64> = Graph::from_edges(2, [(0, 1, 1.0)], false).unwrap();
        let s = SuperNodeSet::<f64>::from_member_degrees(&[&[9], &[7], &[5], &[3]]).unwrap();
        // both target nodes share degree 1: one class holding all four links
        let mut a = align_by_rank(&DegreeStats::of(&g_t), &s).unwrap();
        init_weights(&mut a.cross, &s).unwrap();
        assert_eq!(a.cross.links_of(0).len(), 4);
        let r = transfer_weights(&g_t, &sg, &a.cross, &[(0, 1)]).unwrap();
        assert!((r.pairs[0].increment() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_inserts_and_reweights() {
        let (g_t, sg, cross) = two_class_setup(2.5);
        let cands = candidate_pairs(&g_t, 2).unwrap();
        let r = transfer_weights(&g_t, &sg, &cross, &cands).unwrap();
        let evolved: Vec<(usize, usize)> = r.evolved().map(|p| (p.u, p.v)).collect();
        // nodes 0 and 2 both have degree 1 -> self-loop score 0.5
        assert_eq!(evolved, vec![(0, 2)]);
        let g2 = evolve_edges(&g_t, &r).unwrap();
        assert_eq!(g2.weight(0, 2), 0.5);
        assert_eq!(g2.weight(0, 1), 1.0 + 2.5);
        assert_eq!(g2.node_count(), 4);
        assert!(r.pairs.iter().all(|p| p.weight >= p.original));
    }

    #[test]
    fn zero_increment_leaves_graph_alone() {
        let (g_t, _, cross) = two_class_setup(0.0);
        let sg_no_loop = graph_from(2, &[]);
        let cands = candidate_pairs(&g_t, 2).unwrap();
        let r = transfer_weights(&g_t, &sg_no_loop, &cross, &cands).unwrap();
        assert_eq!(r.evolved().count(), 0);
        let g2 = evolve_edges(&g_t, &r).unwrap();
        assert_eq!(g2, g_t);
    }

    #[test]
    fn tsv_dumps() {
        let (g_t, sg, cross) = two_class_setup(2.5);
        let s = SuperNodeSet::<f64>::from_member_degrees(&[&[2], &[1]]).unwrap();
        assert_eq!(sg.to_tsv(), "0\t1\t2.5\n1\t1\t0.5\n");
        assert_eq!(SuperGraph::from_tsv(&sg.to_tsv(), &s).unwrap(), sg);
        let r = transfer_weights(&g_t, &sg, &cross, &candidate_pairs(&g_t, 2).unwrap()).unwrap();
        assert_eq!(r.to_tsv(&g_t), "0\t1\t1\t3.5\t0\n0\t2\t0\t0.5\t1\n1\t2\t1\t3.5\t0\n");
    }

    proptest! {
        #[test]
        fn increments_are_monotone_bounded_and_linear(
            weights in prop::collection::vec(prop_oneof![Just(0u8), 1u8..6], 15),
            raw in prop::collection::vec((0usize..8, 0usize..8), 1..20),
        ) {
            let entries: Vec<(usize, usize, f64)> = (0..5)
                .flat_map(|a| (a..5).map(move |b| (a, b)))
                .zip(&weights)
                .map(|((a, b), &w)| (a, b, f64::from(w)))
                .collect();
            let doubled: Vec<_> = entries.iter().map(|&(a, b, w)| (a, b, 2.0 * w)).collect();
            let (sg, sg2) = (graph_from(5, &entries), graph_from(5, &doubled));
            let edges: Vec<_> = raw.iter().filter(|(u, v)| u != v).map(|&(u, v)| (u, v, 1.0)).collect();
            prop_assume!(!edges.is_empty());
            let g_t: Graph<f64> = Graph::from_edges(8, edges, false).unwrap();
            let s = SuperNodeSet::<f64>::from_member_degrees(&[&[9], &[7], &[5], &[3], &[1]]).unwrap();
            let mut a = align_by_rank(&DegreeStats::of(&g_t), &s).unwrap();
            init_weights(&mut a.cross, &s).unwrap();
            let pairs = candidate_pairs(&g_t, 2).unwrap();
            let r = transfer_weights(&g_t, &sg, &a.cross, &pairs).unwrap();
            let r2 = transfer_weights(&g_t, &sg2, &a.cross, &pairs).unwrap();
            let max_w = entries.iter().map(|e| e.2).fold(0.0, f64::max);
            for (x, y) in r.pairs.iter().zip(&r2.pairs) {
                prop_assert!(x.weight >= x.original);
                prop_assert!(x.increment() <= max_w + 1e-12);
                prop_assert!((y.increment() - 2.0 * x.increment()).abs() <= 1e-12 * (1.0 + x.increment()));
            }
        }
    }
}
