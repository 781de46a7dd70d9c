use std::fmt::Write as _;

use super::DegreeStats;
use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln P(x))`; `slope_a` is the negated
/// slope so that `P(x) ~ x^(-slope_a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope_a: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

impl PowerLawFit {
    /// Fits `(x, p)` points with `x > 0`, `p > 0`.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let logs: Vec<(f64, f64)> = points
            .iter()
            .filter(|(x, p)| *x > 0.0 && *p > 0.0)
            .map(|&(x, p)| (x.ln(), p.ln()))
            .collect();
        let n = logs.len();
        if n < 2 {
            return Err(Error::Fit(format!("need at least 2 positive points, got {n}")));
        }
        let nf = n as f64;
        let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / nf;
        let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        let syy: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::Fit("all points share one abscissa".into()));
        }
        let slope = sxy / sxx;
        let intercept = mean_y - slope * mean_x;
        let ss_res: f64 = logs
            .iter()
            .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
            .sum();
        // a constant series is fitted exactly by a flat line
        let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
        Ok(Self {
            slope_a: -slope,
            intercept,
            r_squared,
            points_used: n,
        })
    }
}

/// Fits the degree distribution `P(deg) = count(deg) / node_count` over every
/// degree `>= min_degree` (and `>= 1`) with a nonzero count.
pub fn fit_power_law(stats: &DegreeStats, min_degree: usize) -> Result<PowerLawFit> {
    let n = stats.node_count() as f64;
    let points: Vec<(f64, f64)> = stats
        .histogram
        .iter()
        .filter(|(&d, &c)| d >= min_degree.max(1) && c > 0)
        .map(|(&d, &c)| (d as f64, c as f64 / n))
        .collect();
    if points.len() < 2 {
        return Err(Error::Fit(format!(
            "{} distinct nonzero degree(s); a power law needs at least 2",
            points.len()
        )));
    }
    PowerLawFit::from_points(&points)
}

/// Empirical density of positive `values` over logarithmic bins
/// `[lo * ratio^k, lo * ratio^(k+1))`, returned as `(geometric bin center,
/// count / (total * bin width))` for nonempty bins.
pub fn log_binned_density(values: &[u64], ratio: f64) -> Vec<(f64, f64)> {
    assert!(ratio > 1.0, "bin ratio must exceed 1");
    let positive: Vec<f64> = values.iter().filter(|&&v| v > 0).map(|&v| v as f64).collect();
    let Some(lo) = positive.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let total = values.len() as f64;
    let mut counts: Vec<usize> = Vec::new();
    for v in &positive {
        let k = ((v / lo).ln() / ratio.ln() + 1e-12).floor() as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| {
            let start = lo * ratio.powi(k as i32);
            let width = start * (ratio - 1.0);
            ((start * start * ratio).sqrt(), c as f64 / (total * width))
        })
        .collect()
}

/// `x,log_x,p,log_p` rows for external log-log plotting.
pub fn plot_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,log_x,p,log_p\n");
    for &(x, p) in points {
        let _ = writeln!(out, "{x},{},{p},{}", x.ln(), p.ln());
    }
    out
}

impl DegreeStats {
    /// `(degree, P(degree))` for degrees >= 1.
    pub fn distribution(&self) -> Vec<(f64, f64)> {
        let n = self.node_count() as f64;
        self.histogram
            .iter()
            .filter(|(&d, _)| d > 0)
            .map(|(&d, &c)| (d as f64, c as f64 / n))
            .collect()
    }
}
