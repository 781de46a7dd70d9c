use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// A source node and its degree in the source graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub node: usize,
    pub degree: usize,
}

/// A cluster of source nodes with close degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperNode<T> {
    /// Stable identifier; survives re-sorting, merges and splits.
    pub id: usize,
    pub members: Vec<Member>,
    /// Mean member degree.
    pub representative_degree: T,
}

impl<T: Scalar> SuperNode<T> {
    fn new(id: usize, members: Vec<Member>) -> Self {
        let mut s = Self {
            id,
            members,
            representative_degree: T::zero(),
        };
        s.refresh();
        s
    }

    pub(crate) fn refresh(&mut self) {
        self.representative_degree = if self.members.is_empty() {
            T::zero()
        } else {
            let total: usize = self.members.iter().map(|m| m.degree).sum();
            T::of_usize(total) / T::of_usize(self.members.len())
        };
    }
}

/// Super nodes kept sorted by representative degree, decreasing (ties by id).
#[derive(Debug, Clone, PartialEq)]
pub struct SuperNodeSet<T> {
    supers: Vec<SuperNode<T>>,
    next_id: usize,
}

impl<T: Scalar> SuperNodeSet<T> {
    /// Builds a set from explicit member groups; ids follow group order.
    pub fn from_groups(groups: Vec<Vec<Member>>) -> Result<Self> {
        if groups.iter().any(Vec::is_empty) {
            return Err(Error::value("super nodes must have at least one member"));
        }
        let supers: Vec<_> = groups
            .into_iter()
            .enumerate()
            .map(|(id, members)| SuperNode::new(id, members))
            .collect();
        let mut set = Self {
            next_id: supers.len(),
            supers,
        };
        set.sort();
        Ok(set)
    }

    /// Groups of identical-degree members, one per given degree. Node
    /// indices are synthetic; handy for hand-built scenarios.
    pub fn from_member_degrees(groups: &[&[usize]]) -> Result<Self> {
        let mut node = 0;
        let groups = groups
            .iter()
            .map(|degrees| {
                degrees
                    .iter()
                    .map(|&degree| {
                        node += 1;
                        Member { node: node - 1, degree }
                    })
                    .collect()
            })
            .collect();
        Self::from_groups(groups)
    }

    pub fn len(&self) -> usize {
        self.supers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supers.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SuperNode<T>> {
        self.supers.iter()
    }

    /// Super node at rank `pos` (0 = largest representative degree).
    pub fn at(&self, pos: usize) -> &SuperNode<T> {
        &self.supers[pos]
    }

    pub fn position_of(&self, id: usize) -> Option<usize> {
        self.supers.iter().position(|s| s.id == id)
    }

    pub fn by_id(&self, id: usize) -> Option<&SuperNode<T>> {
        self.supers.iter().find(|s| s.id == id)
    }

    /// Number of distinct representative degrees.
    pub fn n_deg_prime(&self) -> usize {
        let mut reps: Vec<T> = self.supers.iter().map(|s| s.representative_degree).collect();
        reps.dedup();
        reps.len()
    }

    /// Source node -> rank position of its super node.
    pub fn membership(&self, source_nodes: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; source_nodes];
        for (pos, s) in self.supers.iter().enumerate() {
            for m in &s.members {
                map[m.node] = Some(pos);
            }
        }
        map
    }

    /// Every member node, sorted.
    pub fn member_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .supers
            .iter()
            .flat_map(|s| s.members.iter().map(|m| m.node))
            .collect();
        nodes.sort_unstable();
        nodes
    }

    pub(crate) fn sort(&mut self) {
        self.supers.sort_by(|a, b| {
            b.representative_degree
                .partial_cmp(&a.representative_degree)
                .expect("representative degrees are finite")
                .then(a.id.cmp(&b.id))
        });
    }

    /// Moves every member of `from` into `into` and drops `from`.
    pub(crate) fn merge(&mut self, from: usize, into: usize) -> Result<()> {
        let src = self
            .position_of(from)
            .ok_or_else(|| Error::State(format!("no super node {from}")))?;
        let dst = self
            .position_of(into)
            .ok_or_else(|| Error::State(format!("no super node {into}")))?;
        if src == dst {
            return Err(Error::State("cannot merge a super node into itself".into()));
        }
        let moved = std::mem::take(&mut self.supers[src].members);
        self.supers[dst].members.extend(moved);
        self.supers[dst].refresh();
        self.supers.remove(src);
        self.sort();
        Ok(())
    }

    pub(crate) fn raw_mut(&mut self) -> &mut Vec<SuperNode<T>> {
        &mut self.supers
    }

    pub(crate) fn fresh(&mut self, members: Vec<Member>) -> SuperNode<T> {
        let id = self.next_id;
        self.next_id += 1;
        SuperNode::new(id, members)
    }

    /// `super_id<TAB>rep_degree<TAB>member,member,...` using the source
    /// graph's external identifiers.
    pub fn to_tsv(&self, source: &Graph<T>) -> String {
        let mut out = String::new();
        for s in &self.supers {
            let members: Vec<&str> = s.members.iter().map(|m| source.ids().name(m.node)).collect();
            let _ = writeln!(out, "{}\t{}\t{}", s.id, s.representative_degree, members.join(","));
        }
        out
    }

    pub fn from_tsv(text: &str, source: &Graph<T>) -> Result<Self> {
        let mut supers = Vec::new();
        let mut seen = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(lineno, "expected 3 tab-separated fields"));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad super id `{}`", fields[0])))?;
            if seen.insert(id, ()).is_some() {
                return Err(Error::parse(lineno, format!("duplicate super id {id}")));
            }
            let members = fields[2]
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|name| {
                    source
                        .ids()
                        .get(name)
                        .map(|node| Member {
                            node,
                            degree: source.degree(node),
                        })
                        .ok_or_else(|| Error::parse(lineno, format!("unknown source node `{name}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if members.is_empty() {
                return Err(Error::parse(lineno, "super node without members"));
            }
            supers.push(SuperNode::new(id, members));
        }
        let next_id = supers.iter().map(|s| s.id + 1).max().unwrap_or(0);
        let mut set = Self { supers, next_id };
        set.sort();
        Ok(set)
    }
}

/// One super node per distinct positive source degree, holding every node of
/// that degree. Isolated source nodes are not clustered.
pub fn init_super_nodes<T: Scalar>(g_s: &Graph<T>) -> Result<SuperNodeSet<T>> {
    let mut by_degree: std::collections::BTreeMap<usize, Vec<Member>> = Default::default();
    for node in 0..g_s.node_count() {
        let degree = g_s.degree(node);
        if degree > 0 {
            by_degree.entry(degree).or_default().push(Member { node, degree });
        }
    }
    if by_degree.is_empty() {
        return Err(Error::value("source graph has no edges to cluster"));
    }
    SuperNodeSet::from_groups(by_degree.into_values().rev().collect())
}
