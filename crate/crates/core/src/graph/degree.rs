use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::Graph;
use crate::scalar::Scalar;

/// Degree bookkeeping for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degree_sequence: Vec<usize>,
    /// Distinct degrees, strictly decreasing.
    pub distinct_degrees: Vec<usize>,
    pub n_deg: usize,
    pub average_degree: f64,
    /// Degree -> number of nodes with that degree.
    pub histogram: BTreeMap<usize, usize>,
}

impl DegreeStats {
    pub fn of<T: Scalar>(g: &Graph<T>) -> Self {
        Self::from_sequence((0..g.node_count()).map(|u| g.degree(u)).collect())
    }

    pub fn from_sequence(degree_sequence: Vec<usize>) -> Self {
        let mut histogram = BTreeMap::new();
        for &d in &degree_sequence {
            *histogram.entry(d).or_insert(0) += 1;
        }
        let distinct_degrees: Vec<usize> = histogram.keys().rev().copied().collect();
        let total: usize = degree_sequence.iter().sum();
        let average_degree = if degree_sequence.is_empty() {
            0.0
        } else {
            total as f64 / degree_sequence.len() as f64
        };
        Self {
            n_deg: distinct_degrees.len(),
            distinct_degrees,
            average_degree,
            histogram,
            degree_sequence,
        }
    }

    pub fn node_count(&self) -> usize {
        self.degree_sequence.len()
    }

    /// Distinct degrees of nodes with at least one edge, strictly decreasing.
    pub fn positive_degrees(&self) -> Vec<usize> {
        self.distinct_degrees.iter().copied().filter(|&d| d > 0).collect()
    }

    /// `degree,count` CSV, ascending by degree.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,count\n");
        for (d, c) in &self.histogram {
            let _ = writeln!(out, "{d},{c}");
        }
        out
    }
}
