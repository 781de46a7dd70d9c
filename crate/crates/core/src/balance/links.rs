use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::SuperNodeSet;
use crate::error::{Error, Result};
use crate::graph::{DegreeStats, Graph};
use crate::scalar::Scalar;

/// A predicted cross-domain link to a super node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<T> {
    pub super_id: usize,
    pub weight: T,
}

/// Target nodes sharing one degree, and the super nodes they link to.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetClass<T> {
    pub degree: usize,
    pub nodes: Vec<usize>,
    pub links: Vec<Link<T>>,
}

/// How the number of super nodes compares to the number of target degree
/// classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BalanceCase {
    /// One super node per target class.
    Equal,
    /// More super nodes than target classes; some classes hold several links.
    MoreSupers,
    /// Fewer super nodes than target classes; super nodes must be split.
    FewerSupers,
}

impl BalanceCase {
    pub fn classify(supers: usize, classes: usize) -> Self {
        match supers.cmp(&classes) {
            std::cmp::Ordering::Equal => Self::Equal,
            std::cmp::Ordering::Greater => Self::MoreSupers,
            std::cmp::Ordering::Less => Self::FewerSupers,
        }
    }
}

type ClassKey = (std::cmp::Reverse<usize>, Vec<(usize, u64)>);

/// Cross-domain links between target nodes and super nodes.
///
/// Links are held per target degree class: every node of a class links to
/// the same super nodes with the same weights. Isolated target nodes belong
/// to no class.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLinks<T> {
    pub classes: Vec<TargetClass<T>>,
    class_of: Vec<Option<usize>>,
    /// Number of alignment slots: `max(#super nodes, #target classes)`.
    pub n_link: usize,
}

impl<T: Scalar> CrossLinks<T> {
    pub fn target_node_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_of(&self, node: usize) -> Option<usize> {
        self.class_of[node]
    }

    pub fn links_of(&self, node: usize) -> &[Link<T>] {
        match self.class_of[node] {
            Some(c) => &self.classes[c].links,
            None => &[],
        }
    }

    pub fn link_count(&self) -> usize {
        self.classes.iter().map(|c| c.links.len() * c.nodes.len()).sum()
    }

    /// Indicator over super-node rank slots (length `n_link`) of the links
    /// held by `node`.
    pub fn delta(&self, node: usize, supers: &SuperNodeSet<T>) -> Vec<bool> {
        let mut d = vec![false; self.n_link];
        for link in self.links_of(node) {
            if let Some(pos) = supers.position_of(link.super_id) {
                d[pos] = true;
            }
        }
        d
    }

    /// Drops links of zero weight: a link exists iff its weight is positive.
    pub fn prune(&mut self) {
        for class in &mut self.classes {
            class.links.retain(|l| l.weight > T::zero());
        }
    }

    /// `target_node<TAB>super_id<TAB>weight` per link, target nodes by
    /// external identifier.
    pub fn to_tsv(&self, target: &Graph<T>) -> String {
        let mut out = String::new();
        for node in 0..self.class_of.len() {
            for link in self.links_of(node) {
                let _ = writeln!(out, "{}\t{}\t{}", target.ids().name(node), link.super_id, link.weight);
            }
        }
        out
    }

    /// Rebuilds classes by grouping target nodes with the same degree and
    /// link list.
    pub fn from_tsv(text: &str, target: &Graph<T>) -> Result<Self> {
        let n = target.node_count();
        let mut per_node: Vec<Vec<Link<T>>> = vec![Vec::new(); n];
        let mut n_link = 0;
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(lineno, "expected 3 tab-separated fields"));
            }
            let node = target
                .ids()
                .get(fields[0])
                .ok_or_else(|| Error::parse(lineno, format!("unknown target node `{}`", fields[0])))?;
            let super_id: usize = fields[1]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad super id `{}`", fields[1])))?;
            let weight: T = fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad weight `{}`", fields[2])))?;
            if !(weight > T::zero() && weight <= T::one()) {
                return Err(Error::parse(lineno, format!("weight {weight} outside (0, 1]")));
            }
            per_node[node].push(Link { super_id, weight });
            n_link = n_link.max(super_id + 1);
        }
        // (degree descending, link signature) -> class index
        let mut groups: BTreeMap<ClassKey, usize> = BTreeMap::new();
        let mut classes: Vec<TargetClass<T>> = Vec::new();
        let mut class_of = vec![None; n];
        for (node, links) in per_node.into_iter().enumerate() {
            if links.is_empty() {
                continue;
            }
            let key: Vec<(usize, u64)> = links.iter().map(|l| (l.super_id, l.weight.as_f64().to_bits())).collect();
            let degree = target.degree(node);
            let c = *groups.entry((std::cmp::Reverse(degree), key)).or_insert_with(|| {
                classes.push(TargetClass {
                    degree,
                    nodes: Vec::new(),
                    links,
                });
                classes.len() - 1
            });
            classes[c].nodes.push(node);
            class_of[node] = Some(c);
        }
        Ok(Self {
            classes,
            class_of,
            n_link,
        })
    }
}

/// Target degree classes (positive degrees, decreasing) with their nodes.
pub fn target_classes(stats_t: &DegreeStats) -> Vec<(usize, Vec<usize>)> {
    let mut nodes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (node, &d) in stats_t.degree_sequence.iter().enumerate() {
        if d > 0 {
            nodes.entry(d).or_default().push(node);
        }
    }
    nodes.into_iter().rev().collect()
}

/// Rank alignment with uninitialized (zero) weights, and the case it found.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<T> {
    pub case: BalanceCase,
    pub cross: CrossLinks<T>,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

/// Aligns target degree classes and super nodes by rank.
///
/// With at least as many super nodes as classes, super rank `j` (1-based)
/// goes to class rank `ceil(j * n_t / n_s)`, so every class receives at least
/// one link and some receive several. With fewer super nodes (a split has
/// not closed the gap), class rank `i` goes to super rank `ceil(i * n_s /
/// n_t)` so that no class is left unlinked.
pub fn align_by_rank<T: Scalar>(stats_t: &DegreeStats, supers: &SuperNodeSet<T>) -> Result<Alignment<T>> {
    let classes_raw = target_classes(stats_t);
    let n_t = classes_raw.len();
    let n_s = supers.len();
    if n_t == 0 || n_s == 0 {
        return Err(Error::value("alignment needs nonempty target classes and super nodes"));
    }
    let case = BalanceCase::classify(n_s, n_t);
    let mut class_of = vec![None; stats_t.node_count()];
    let mut classes: Vec<TargetClass<T>> = classes_raw
        .into_iter()
        .enumerate()
        .map(|(c, (degree, nodes))| {
            for &v in &nodes {
                class_of[v] = Some(c);
            }
            TargetClass {
                degree,
                nodes,
                links: Vec::new(),
            }
        })
        .collect();
    let link = |pos: usize| Link {
        super_id: supers.at(pos).id,
        weight: T::zero(),
    };
    if n_s >= n_t {
        for j in 1..=n_s {
            classes[ceil_div(j * n_t, n_s) - 1].links.push(link(j - 1));
        }
    } else {
        for (i, class) in classes.iter_mut().enumerate() {
            class.links.push(link(ceil_div((i + 1) * n_s, n_t) - 1));
        }
    }
    Ok(Alignment {
        case,
        cross: CrossLinks {
            classes,
            class_of,
            n_link: n_s.max(n_t),
        },
    })
}

/// `min(a, b) / max(a, b)`, with two zero degrees counting as identical.
pub fn degree_similarity<T: Scalar>(a: T, b: T) -> T {
    let hi = a.max(b);
    if hi == T::zero() {
        T::one()
    } else {
        a.min(b) / hi
    }
}

/// Sets every link weight to the degree similarity of the target class and
/// the super node, then drops zero-weight links.
pub fn init_weights<T: Scalar>(cross: &mut CrossLinks<T>, supers: &SuperNodeSet<T>) -> Result<()> {
    for class in &mut cross.classes {
        let dt = T::of_usize(class.degree);
        for link in &mut class.links {
            let s = supers
                .by_id(link.super_id)
                .ok_or_else(|| Error::State(format!("link to missing super node {}", link.super_id)))?;
            link.weight = degree_similarity(dt, s.representative_degree);
        }
    }
    cross.prune();
    Ok(())
}
