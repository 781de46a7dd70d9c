//! Node balancing: degree-clustered super nodes on the source side, aligned
//! by degree rank to target degree classes, then merged or split until both
//! sides have the same number of degree scales.

mod links;
mod supers;

pub use links::{
    align_by_rank, degree_similarity, init_weights, target_classes, Alignment, BalanceCase, CrossLinks, Link,
    TargetClass,
};
pub use supers::{init_super_nodes, Member, SuperNode, SuperNodeSet};

use crate::error::{Error, Result};
use crate::graph::{fit_power_law, DegreeStats, Graph};
use crate::scalar::Scalar;

/// Floor applied to a zero squared link norm before taking its logarithm.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BalanceParams {
    /// Scale parameter for the target side.
    pub gamma: f64,
    /// Scale parameter for the super-node side (enters as `exp(lambda)`).
    pub lambda: f64,
    /// Smaller of the source and target power-law slopes.
    pub a_plus: f64,
    /// Likelihood constant; only shifts the objective.
    pub c: f64,
    /// Stop when successive log-objectives differ by less than this.
    pub epsilon: f64,
    /// Iteration guard; `None` means `10 * initial super-node count`.
    pub max_iterations: Option<usize>,
}

impl Default for BalanceParams {
    fn default() -> Self {
        Self {
            gamma: 100.0,
            lambda: 100.0,
            a_plus: 2.0,
            c: 1.0,
            epsilon: 1e-9,
            max_iterations: None,
        }
    }
}

impl BalanceParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.lambda, self.a_plus, self.c, self.epsilon];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::value(format!("balance parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Sets `a_plus` to the smaller fitted power-law slope of the two graphs.
    /// A graph whose degree distribution cannot be fitted, or fits with a
    /// non-positive slope, is ignored; if neither fits, `a_plus` is kept.
    pub fn with_slopes_of<T: Scalar>(mut self, g_s: &Graph<T>, g_t: &Graph<T>) -> Self {
        let slopes: Vec<f64> = [g_s, g_t]
            .iter()
            .filter_map(|g| fit_power_law(&g.degree_stats(), 1).ok())
            .map(|f| f.slope_a)
            .filter(|&a| a > 0.0)
            .collect();
        if let Some(min) = slopes.into_iter().reduce(f64::min) {
            self.a_plus = min;
        }
        self
    }
}

/// Balance objective held in log space: the value is `exp(log_eta) * sum`.
///
/// `exp(lambda)` overflows `f32` at the default `lambda = 100` and the
/// `exp((1 - n^2) / n)` factor underflows for a few dozen super nodes, so the
/// scale factor is never materialized unless asked for.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Objective {
    pub log_eta: f64,
    pub sum: f64,
}

impl Objective {
    pub fn value(&self) -> f64 {
        self.sum * self.log_eta.exp()
    }

    /// `ln |value|`, or `None` when the value is zero.
    pub fn log_magnitude(&self) -> Option<f64> {
        (self.sum != 0.0).then(|| self.log_eta + self.sum.abs().ln())
    }

    /// Log-space distance between two objectives; infinite across a sign
    /// change or between zero and nonzero.
    pub fn log_delta(&self, other: &Objective) -> f64 {
        match (self.log_magnitude(), other.log_magnitude()) {
            (None, None) => 0.0,
            (Some(a), Some(b)) if self.sum.signum() == other.sum.signum() => (a - b).abs(),
            _ => f64::INFINITY,
        }
    }
}

/// Likelihood of the current links:
/// `eta * sum_i [ln C - a_plus * ln(|delta_i w|^2)]`, one term per linked
/// target node, with
/// `eta = (1/n_t) * exp((1 - n'^2) / n') * gamma * exp(lambda)`.
pub fn objective<T: Scalar>(cross: &CrossLinks<T>, params: &BalanceParams, supers: &SuperNodeSet<T>) -> Objective {
    let n_t = cross.classes.len().max(1) as f64;
    let n_prime = supers.n_deg_prime().max(1) as f64;
    let log_eta = -n_t.ln() + (1.0 - n_prime * n_prime) / n_prime + params.gamma.ln() + params.lambda;
    let log_c = params.c.ln();
    let sum = cross
        .classes
        .iter()
        .map(|class| {
            let norm: f64 = class.links.iter().map(|l| l.weight.as_f64().powi(2)).sum();
            class.nodes.len() as f64 * (log_c - params.a_plus * norm.max(NORM_FLOOR).ln())
        })
        .sum();
    Objective { log_eta, sum }
}

/// What a merge did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeRecord {
    pub removed_super: usize,
    pub absorbing_super: usize,
}

fn link_order<T: Scalar>(supers: &SuperNodeSet<T>) -> impl Fn(&Link<T>, &Link<T>) -> std::cmp::Ordering + '_ {
    move |a, b| {
        let rep = |l: &Link<T>| supers.by_id(l.super_id).map(|s| s.representative_degree);
        a.weight
            .partial_cmp(&b.weight)
            .expect("link weights are finite")
            .then(rep(a).partial_cmp(&rep(b)).expect("degrees are finite"))
            .then(a.super_id.cmp(&b.super_id))
    }
}

/// Zeroes the weakest link of target class `class` and merges its super node
/// into the weakest remaining super node linked to the class. Ties go to the
/// super node with the smaller representative degree. Weights of links to
/// the merged super node are recomputed everywhere.
pub fn merge_step<T: Scalar>(
    cross: &mut CrossLinks<T>,
    supers: &mut SuperNodeSet<T>,
    class: usize,
) -> Result<MergeRecord> {
    let links = &cross
        .classes
        .get(class)
        .ok_or_else(|| Error::State(format!("no target class {class}")))?
        .links;
    if links.len() < 2 {
        return Err(Error::State(format!(
            "merge needs at least 2 links on class {class}, found {}",
            links.len()
        )));
    }
    let (removed, absorbing) = {
        let mut sorted = links.clone();
        sorted.sort_by(link_order(supers));
        (sorted[0].super_id, sorted[1].super_id)
    };
    supers.merge(removed, absorbing)?;

    let rep = supers
        .by_id(absorbing)
        .expect("absorbing super node survives the merge")
        .representative_degree;
    for c in &mut cross.classes {
        let mut has_absorbing = false;
        c.links.retain_mut(|l| {
            if l.super_id == removed {
                l.super_id = absorbing;
            }
            if l.super_id == absorbing {
                if has_absorbing {
                    return false;
                }
                has_absorbing = true;
                l.weight = degree_similarity(T::of_usize(c.degree), rep);
            }
            true
        });
    }
    cross.prune();
    Ok(MergeRecord {
        removed_super: removed,
        absorbing_super: absorbing,
    })
}

/// What a split did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SplitReport {
    /// Empty super nodes inserted and filled.
    pub inserted: usize,
    /// Insert positions abandoned because the donor had a single member.
    pub skipped: usize,
}

/// Inserts `n_t - n_s` empty super nodes at evenly spaced rank positions and
/// fills each with the upper half (by member degree) of the nearest larger
/// non-empty neighbour (or the following one at the top of the ranking).
pub fn split_step<T: Scalar>(supers: &mut SuperNodeSet<T>, n_t: usize) -> Result<SplitReport> {
    let n_s = supers.len();
    if n_s >= n_t {
        return Err(Error::State(format!("split needs fewer super nodes ({n_s}) than classes ({n_t})")));
    }
    let k = n_t - n_s;
    // gap g: the empty node goes right before original rank g
    let gaps: Vec<usize> = (1..=k).map(|i| i * n_s / (k + 1)).collect();
    enum Slot {
        Filled(usize),
        Empty,
    }
    let mut slots = Vec::with_capacity(n_t);
    for j in 0..=n_s {
        slots.extend(gaps.iter().filter(|&&g| g == j).map(|_| Slot::Empty));
        if j < n_s {
            slots.push(Slot::Filled(j));
        }
    }

    let mut report = SplitReport { inserted: 0, skipped: 0 };
    let mut created: Vec<SuperNode<T>> = Vec::new();
    // slot -> index into `nodes` (originals first, then created)
    let mut filled: Vec<Option<usize>> = slots
        .iter()
        .map(|s| match s {
            Slot::Filled(j) => Some(*j),
            Slot::Empty => None,
        })
        .collect();
    for i in 0..slots.len() {
        if filled[i].is_some() {
            continue;
        }
        let donor = (0..i)
            .rev()
            .find_map(|j| filled[j])
            .or_else(|| (i + 1..slots.len()).find_map(|j| filled[j]))
            .expect("at least one original super node exists");
        let donor_node: &mut SuperNode<T> = if donor < n_s {
            &mut supers.raw_mut()[donor]
        } else {
            &mut created[donor - n_s]
        };
        if donor_node.members.len() < 2 {
            report.skipped += 1;
            continue;
        }
        donor_node
            .members
            .sort_by(|a, b| b.degree.cmp(&a.degree).then(a.node.cmp(&b.node)));
        let upper: Vec<Member> = donor_node.members.drain(..donor_node.members.len() / 2).collect();
        donor_node.refresh();
        created.push(supers.fresh(upper));
        filled[i] = Some(n_s + created.len() - 1);
        report.inserted += 1;
    }
    supers.raw_mut().extend(created);
    supers.sort();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BalanceStatus {
    /// Super-node count matches the number of target degree classes.
    Converged,
    /// Successive objectives agreed within epsilon.
    EpsilonStop,
    /// The iteration guard fired; the partial result is still valid.
    MaxIterations,
    /// A split could not create enough super nodes.
    SplitShortfall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceOutcome<T> {
    pub supers: SuperNodeSet<T>,
    pub cross: CrossLinks<T>,
    pub status: BalanceStatus,
    pub initial_case: BalanceCase,
    pub iterations: usize,
    pub max_iterations: usize,
    pub split: Option<SplitReport>,
    /// Target classes minus distinct representative degrees, when positive.
    pub residual_imbalance: usize,
    pub objective_trace: Vec<Objective>,
}

/// Node balancing between a source and a target graph.
pub fn balance<T: Scalar>(g_s: &Graph<T>, g_t: &Graph<T>, params: &BalanceParams) -> Result<BalanceOutcome<T>> {
    let supers = init_super_nodes(g_s)?;
    balance_with(supers, &DegreeStats::of(g_t), params)
}

/// Node balancing from an explicit initial super-node set.
pub fn balance_with<T: Scalar>(
    mut supers: SuperNodeSet<T>,
    stats_t: &DegreeStats,
    params: &BalanceParams,
) -> Result<BalanceOutcome<T>> {
    params.validate()?;
    let n_t = target_classes(stats_t).len();
    if n_t == 0 {
        return Err(Error::value("target graph has no edges to balance against"));
    }
    if supers.is_empty() {
        return Err(Error::value("no super nodes to balance"));
    }
    let max_iterations = params.max_iterations.unwrap_or(10 * supers.len());
    let initial_case = BalanceCase::classify(supers.len(), n_t);

    let mut iterations = 0;
    let mut split = None;
    if initial_case == BalanceCase::FewerSupers {
        split = Some(split_step(&mut supers, n_t)?);
        iterations += 1;
    }

    let mut trace: Vec<Objective> = Vec::new();
    let (cross, status) = loop {
        let mut cross = align_by_rank(stats_t, &supers)?.cross;
        init_weights(&mut cross, &supers)?;
        let obj = objective(&cross, params, &supers);
        let previous = trace.last().copied();
        trace.push(obj);
        match supers.len().cmp(&n_t) {
            std::cmp::Ordering::Equal => break (cross, BalanceStatus::Converged),
            std::cmp::Ordering::Less => break (cross, BalanceStatus::SplitShortfall),
            std::cmp::Ordering::Greater => {}
        }
        if previous.is_some_and(|p| obj.log_delta(&p) < params.epsilon) {
            break (cross, BalanceStatus::EpsilonStop);
        }
        if iterations >= max_iterations {
            break (cross, BalanceStatus::MaxIterations);
        }
        let class = {
            let order = link_order(&supers);
            cross
            .classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.links.len() >= 2)
            .map(|(i, c)| (i, *c.links.iter().min_by(|a, b| order(a, b)).expect("nonempty")))
            .min_by(|a, b| order(&a.1, &b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::State("more super nodes than classes but no class holds 2 links".into()))?
        };
        merge_step(&mut cross, &mut supers, class)?;
        iterations += 1;
    };

    let residual_imbalance = n_t.saturating_sub(supers.n_deg_prime());
    Ok(BalanceOutcome {
        supers,
        cross,
        status,
        initial_case,
        iterations,
        max_iterations,
        split,
        residual_imbalance,
        objective_trace: trace,
    })
}
