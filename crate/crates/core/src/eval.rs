//! Node classification on embeddings: random splits, one-vs-rest linear SVM,
//! Micro/Macro-F1 and paired t-tests.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ground-truth labels of the evaluated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    /// Embedding row of each labeled node.
    pub rows: Vec<usize>,
    /// Sorted, nonempty label ids per labeled node.
    pub labels: Vec<Vec<usize>>,
    /// External name of each label id.
    pub label_names: Vec<String>,
}

impl LabelSet {
    /// Labels for rows `0..labels.len()`; label ids are used as names.
    pub fn from_rows(labels: Vec<Vec<usize>>) -> Result<Self> {
        let m = labels.iter().flatten().max().map_or(0, |&l| l + 1);
        let set = Self {
            rows: (0..labels.len()).collect(),
            labels: labels
                .into_iter()
                .map(|ls| ls.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
                .collect(),
            label_names: (0..m).map(|l| l.to_string()).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    /// Parses `<node_id> <label> [<label> ...]` lines against the embedding
    /// identifiers. Label ids follow the sorted order of the label tokens
    /// (numerically when all are integers).
    pub fn parse(text: &str, ids: &[String]) -> Result<Self> {
        let row_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut raw = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let node = tokens.next().expect("line is not blank");
            let row = *row_of
                .get(node)
                .ok_or_else(|| Error::parse(lineno + 1, format!("node `{node}` is not embedded")))?;
            let ls: Vec<&str> = tokens.collect();
            if ls.is_empty() {
                return Err(Error::parse(lineno + 1, format!("node `{node}` has no label")));
            }
            raw.push((row, ls));
        }
        let mut names: Vec<&str> = raw.iter().flat_map(|(_, ls)| ls.iter().copied()).collect();
        names.sort_unstable();
        names.dedup();
        if names.iter().all(|n| n.parse::<u64>().is_ok()) {
            names.sort_by_key(|n| n.parse::<u64>().expect("checked"));
        }
        let id_of: HashMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();

        let mut seen = HashMap::new();
        let mut rows = Vec::new();
        let mut labels: Vec<BTreeSet<usize>> = Vec::new();
        for (row, ls) in raw {
            let slot = *seen.entry(row).or_insert_with(|| {
                rows.push(row);
                labels.push(BTreeSet::new());
                rows.len() - 1
            });
            labels[slot].extend(ls.iter().map(|l| id_of[l]));
        }
        let set = Self {
            rows,
            labels: labels.into_iter().map(|s| s.into_iter().collect()).collect(),
            label_names: names.into_iter().map(str::to_owned).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        if self.label_count() < 2 {
            return Err(Error::value("at least two labels are required"));
        }
        if self.labels.iter().any(Vec::is_empty) {
            return Err(Error::value("every labeled node needs a label"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn is_multi_label(&self) -> bool {
        self.labels.iter().any(|l| l.len() > 1)
    }
}

/// Uniform random partition of labeled-node positions into
/// `round(fraction * n)` training and the rest testing.
pub fn split(labels: &LabelSet, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::value(format!("training fraction {fraction} outside (0, 1)")));
    }
    let n = labels.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::value(format!("fraction {fraction} of {n} nodes leaves an empty side")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvmParams {
    pub regularization: f64,
    pub epochs: usize,
    /// Step size at epoch `e` (1-based) is `learning_rate / sqrt(e)`.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            regularization: 1e-4,
            epochs: 100,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

/// `m` binary linear separators over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOvr {
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Labels with no positive training example; they never score.
    pub untrained_labels: Vec<usize>,
    /// All training vectors were identical, so every score ties.
    pub degenerate: bool,
}

impl LinearOvr {
    fn features<T: Scalar>(&self, row: &[T]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x.as_f64() - m) * s)
            .collect()
    }

    /// Score of every label for one embedding row.
    pub fn scores<T: Scalar>(&self, row: &[T]) -> Vec<f64> {
        let x = self.features(row);
        self.weights
            .iter()
            .zip(&self.biases)
            .enumerate()
            .map(|(l, (w, b))| {
                if self.untrained_labels.contains(&l) {
                    f64::NEG_INFINITY
                } else {
                    w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + b
                }
            })
            .collect()
    }
}

fn train_binary(xs: &[Vec<f64>], ys: &[f64], params: &SvmParams, seed: u64) -> (Vec<f64>, f64) {
    let d = xs.first().map_or(0, Vec::len);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 1..=params.epochs {
        let lr = params.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = (&xs[i], ys[i]);
            let margin = y * (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b);
            let shrink = 1.0 - lr * params.regularization;
            if margin < 1.0 {
                for (wk, xk) in w.iter_mut().zip(x) {
                    *wk = shrink * *wk + lr * y * xk;
                }
                b += lr * y;
            } else {
                w.iter_mut().for_each(|wk| *wk *= shrink);
            }
        }
    }
    (w, b)
}

/// One-vs-rest L2-regularized hinge-loss separators by per-sample
/// subgradient descent. Features are standardized with training statistics.
pub fn train_linear_ovr<T: Scalar>(
    emb: &EmbeddingTable<T>,
    train: &[usize],
    labels: &LabelSet,
    params: &SvmParams,
) -> Result<LinearOvr> {
    if train.is_empty() {
        return Err(Error::value("empty training set"));
    }
    let d = emb.dim;
    let raw: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| emb.row(labels.rows[i]).iter().map(|x| x.as_f64()).collect())
        .collect();
    let n = raw.len() as f64;
    let mean: Vec<f64> = (0..d).map(|k| raw.iter().map(|x| x[k]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|k| (raw.iter().map(|x| (x[k] - mean[k]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let degenerate = sd.iter().all(|&s| s == 0.0);
    let scale: Vec<f64> = sd.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 }).collect();
    let xs: Vec<Vec<f64>> = raw
        .iter()
        .map(|x| x.iter().zip(mean.iter().zip(&scale)).map(|(v, (m, s))| (v - m) * s).collect())
        .collect();

    let m = labels.label_count();
    let separators: Vec<(Vec<f64>, f64, bool)> = (0..m)
        .into_par_iter()
        .map(|l| {
            let ys: Vec<f64> = train
                .iter()
                .map(|&i| if labels.labels[i].binary_search(&l).is_ok() { 1.0 } else { -1.0 })
                .collect();
            if ys.iter().all(|&y| y < 0.0) {
                return (vec![0.0; d], 0.0, false);
            }
            let seed = params.seed ^ (l as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let (w, b) = train_binary(&xs, &ys, params, seed);
            (w, b, true)
        })
        .collect();
    let untrained_labels = separators.iter().enumerate().filter(|(_, s)| !s.2).map(|(l, _)| l).collect();
    let (weights, biases) = separators.into_iter().map(|(w, b, _)| (w, b)).unzip();
    Ok(LinearOvr {
        dim: d,
        weights,
        biases,
        mean,
        scale,
        untrained_labels,
        degenerate,
    })
}

/// The `k` highest-scoring labels, ties to the smaller label id.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Predicts `k_i` labels per test node, `k_i` being its true label count
/// (the argmax for single-label nodes).
pub fn predict<T: Scalar>(
    model: &LinearOvr,
    emb: &EmbeddingTable<T>,
    test: &[usize],
    labels: &LabelSet,
) -> Vec<Vec<usize>> {
    test.iter()
        .map(|&i| top_k(&model.scores(emb.row(labels.rows[i])), labels.labels[i].len()))
        .collect()
}

/// Per-label binary decision counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionCounts {
    pub fn tally(predictions: &[Vec<usize>], truth: &[Vec<usize>], m: usize) -> Self {
        let mut c = Self {
            tp: vec![0; m],
            fp: vec![0; m],
            fn_: vec![0; m],
        };
        for (pred, gold) in predictions.iter().zip(truth) {
            for &l in pred {
                if gold.contains(&l) {
                    c.tp[l] += 1;
                } else {
                    c.fp[l] += 1;
                }
            }
            for &l in gold {
                if !pred.contains(&l) {
                    c.fn_[l] += 1;
                }
            }
        }
        c
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn f1(r: f64, p: f64) -> f64 {
    ratio(2.0 * r * p, r + p)
}

/// Micro-F1 pools all decisions; Macro-F1 is the F1 of the label-averaged
/// recall and precision. `0/0` counts as 0.
pub fn micro_macro_f1(predictions: &[Vec<usize>], truth: &[Vec<usize>], m: usize) -> (f64, f64) {
    let c = ConfusionCounts::tally(predictions, truth, m);
    let sum = |v: &[u64]| v.iter().sum::<u64>() as f64;
    let (tp, fp, fn_) = (sum(&c.tp), sum(&c.fp), sum(&c.fn_));
    let micro = f1(ratio(tp, tp + fn_), ratio(tp, tp + fp));
    let mut r = 0.0;
    let mut p = 0.0;
    for l in 0..m {
        let t = c.tp[l] as f64;
        r += ratio(t, t + c.fn_[l] as f64);
        p += ratio(t, t + c.fp[l] as f64);
    }
    let macro_ = f1(r / m as f64, p / m as f64);
    (micro, macro_)
}

/// Two-sided paired t-test on `a - b`. Zero-variance differences give 1 for
/// a zero mean and 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::value("paired t-test needs two equal-length samples of size >= 2"));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n).sqrt();
    Ok(t_two_sided(t, n - 1.0))
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub svm: SvmParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fractions: (1..=9).map(|i| i as f64 / 10.0).collect(),
            repetitions: 10,
            seed: 0,
            svm: SvmParams::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::value("training fractions must lie in (0, 1)"));
        }
        if self.repetitions == 0 {
            return Err(Error::value("repetitions must be >= 1"));
        }
        Ok(())
    }

    /// Split seed of one run; shared by every method evaluated on the same
    /// labels so that runs pair up.
    pub fn run_seed(&self, fraction_index: usize, run: usize) -> u64 {
        self.seed
            ^ (fraction_index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
            ^ (run as u64 + 1).wrapping_mul(0xbf58_476d_1ce4_e5b9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RunScore {
    pub fraction: f64,
    pub run: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub micro_mean: f64,
    pub micro_variance: f64,
    pub macro_mean: f64,
    pub macro_variance: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalReport {
    pub runs: Vec<RunScore>,
    /// Labels that lacked positive training examples in some run.
    pub untrained_labels: Vec<usize>,
    /// Some run trained on identical vectors.
    pub degenerate: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

impl EvalReport {
    pub fn fractions(&self) -> Vec<f64> {
        let mut fs: Vec<f64> = self.runs.iter().map(|r| r.fraction).collect();
        fs.dedup();
        fs
    }

    pub fn micro_scores(&self, fraction: f64) -> Vec<f64> {
        self.runs.iter().filter(|r| r.fraction == fraction).map(|r| r.micro_f1).collect()
    }

    pub fn macro_scores(&self, fraction: f64) -> Vec<f64> {
        self.runs.iter().filter(|r| r.fraction == fraction).map(|r| r.macro_f1).collect()
    }

    /// Mean and unbiased sample variance per fraction.
    pub fn summary(&self) -> Vec<FractionSummary> {
        self.fractions()
            .into_iter()
            .map(|f| {
                let (micro_mean, micro_variance) = mean_var(&self.micro_scores(f));
                let (macro_mean, macro_variance) = mean_var(&self.macro_scores(f));
                FractionSummary {
                    fraction: f,
                    micro_mean,
                    micro_variance,
                    macro_mean,
                    macro_variance,
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,run,micro_f1,macro_f1\n");
        for r in &self.runs {
            let _ = writeln!(out, "{},{},{},{}", r.fraction, r.run, r.micro_f1, r.macro_f1);
        }
        out.push_str("\n# summary\nfraction,micro_mean,micro_var,macro_mean,macro_var\n");
        for s in self.summary() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.fraction, s.micro_mean, s.micro_variance, s.macro_mean, s.macro_variance
            );
        }
        if !self.untrained_labels.is_empty() {
            let _ = writeln!(out, "# labels without training positives: {:?}", self.untrained_labels);
        }
        if self.degenerate {
            out.push_str("# degenerate: identical training vectors, scores tied\n");
        }
        out
    }
}

/// Scores one train/test split.
pub fn evaluate_split<T: Scalar>(
    emb: &EmbeddingTable<T>,
    labels: &LabelSet,
    fraction: f64,
    split_seed: u64,
    svm: &SvmParams,
) -> Result<(f64, f64, LinearOvr)> {
    let (train, test) = split(labels, fraction, split_seed)?;
    let model = train_linear_ovr(emb, &train, labels, svm)?;
    let pred = predict(&model, emb, &test, labels);
    let truth: Vec<Vec<usize>> = test.iter().map(|&i| labels.labels[i].clone()).collect();
    let (micro, macro_) = micro_macro_f1(&pred, &truth, labels.label_count());
    Ok((micro, macro_, model))
}

/// Repeated random-split evaluation at every configured fraction.
pub fn evaluate<T: Scalar>(emb: &EmbeddingTable<T>, labels: &LabelSet, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if let Some(&bad) = labels.rows.iter().find(|&&r| r >= emb.len()) {
        return Err(Error::value(format!("labeled row {bad} outside the embedding")));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.fractions.len())
        .flat_map(|f| (0..cfg.repetitions).map(move |r| (f, r)))
        .collect();
    let results: Vec<(RunScore, LinearOvr)> = jobs
        .par_iter()
        .map(|&(fi, run)| {
            let fraction = cfg.fractions[fi];
            let (micro_f1, macro_f1, model) = evaluate_split(emb, labels, fraction, cfg.run_seed(fi, run), &cfg.svm)?;
            Ok((
                RunScore {
                    fraction,
                    run,
                    micro_f1,
                    macro_f1,
                },
                model,
            ))
        })
        .collect::<Result<_>>()?;
    let mut untrained: BTreeSet<usize> = BTreeSet::new();
    let mut degenerate = false;
    let runs = results
        .into_iter()
        .map(|(score, model)| {
            untrained.extend(&model.untrained_labels);
            degenerate |= model.degenerate;
            score
        })
        .collect();
    Ok(EvalReport {
        runs,
        untrained_labels: untrained.into_iter().collect(),
        degenerate,
    })
}

/// Per-fraction paired t-test p-values on Micro-F1 of two reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TTestTable {
    pub pair: String,
    pub rows: Vec<(f64, f64)>,
}

impl TTestTable {
    pub fn compare(pair: impl Into<String>, a: &EvalReport, b: &EvalReport) -> Result<Self> {
        let rows = a
            .fractions()
            .into_iter()
            .map(|f| Ok((f, paired_t_test(&a.micro_scores(f), &b.micro_scores(f))?)))
            .collect::<Result<_>>()?;
        Ok(Self { pair: pair.into(), rows })
    }

    /// Arithmetic mean of the per-fraction p-values (a reporting convention,
    /// not a combined test).
    pub fn mean_p_value(&self) -> f64 {
        self.rows.iter().map(|r| r.1).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,fraction,p_value\n");
        for (f, p) in &self.rows {
            let _ = writeln!(out, "{},{f},{p:e}", self.pair);
        }
        let _ = writeln!(out, "{},mean,{:e}", self.pair, self.mean_p_value());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable<f64> {
        EmbeddingTable {
            ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            dim: rows[0].len(),
            data: rows.concat(),
        }
    }

    #[test]
    fn split_counts_and_partition() {
        let labels = LabelSet::from_rows((0..100).map(|i| vec![i % 2]).collect()).unwrap();
        let (train, test) = split(&labels, 0.3, 5).unwrap();
        assert_eq!((train.len(), test.len()), (30, 70));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split(&labels, 0.3, 5).unwrap(), (train, test));
        assert!(split(&labels, 0.001, 5).is_err());
        assert!(split(&labels, 1.0, 5).is_err());
    }

    #[test]
    fn separable_toy_is_learned() {
        let emb = table(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let labels = LabelSet::from_rows(vec![vec![0], vec![1], vec![0], vec![1]]).unwrap();
        let all = [0, 1, 2, 3];
        let model = train_linear_ovr(&emb, &all, &labels, &SvmParams::default()).unwrap();
        assert!(!model.degenerate);
        let pred = predict(&model, &emb, &all, &labels);
        assert_eq!(pred, labels.labels);
    }

    #[test]
    fn identical_vectors_are_flagged_and_tie_break_low() {
        let emb = table(vec![vec![0.5, 0.5]; 4]);
        let labels = LabelSet::from_rows(vec![vec![0], vec![1], vec![1], vec![0]]).unwrap();
        let model = train_linear_ovr(&emb, &[0, 1, 2, 3], &labels, &SvmParams::default()).unwrap();
        assert!(model.degenerate);
        let pred = predict(&model, &emb, &[0, 1], &labels);
        let s = model.scores(emb.row(0));
        if s[0] == s[1] {
            assert_eq!(pred, vec![vec![0], vec![0]]);
        }
    }

    #[test]
    fn missing_positives_predict_nothing() {
        let emb = table(vec![vec![1.0], vec![-1.0], vec![0.0]]);
        let labels = LabelSet::from_rows(vec![vec![0], vec![1], vec![2]]).unwrap();
        let model = train_linear_ovr(&emb, &[0, 1], &labels, &SvmParams::default()).unwrap();
        assert_eq!(model.untrained_labels, vec![2]);
        assert_eq!(model.scores(emb.row(2))[2], f64::NEG_INFINITY);
    }

    #[test]
    fn top_k_rules() {
        assert_eq!(top_k(&[0.9, 0.1], 1), vec![0]);
        assert_eq!(top_k(&[0.2, 0.5, 0.5], 1), vec![1]);
        assert_eq!(top_k(&[0.1, 0.4, 0.3, 0.9], 3), vec![1, 2, 3]);
    }

    #[test]
    fn f1_hand_examples() {
        // one label: tp=2 fp=1 fn=1
        let pred = vec![vec![0], vec![0], vec![0], vec![]];
        let gold = vec![vec![0], vec![0], vec![], vec![0]];
        let (micro, _) = micro_macro_f1(&pred, &gold, 1);
        assert!((micro - 2.0 / 3.0).abs() < 1e-15);
        let perfect = vec![vec![0], vec![1, 2]];
        assert_eq!(micro_macro_f1(&perfect, &perfect, 3), (1.0, 1.0));
        assert_eq!(micro_macro_f1(&[vec![]], &[vec![]], 2), (0.0, 0.0));
    }

    #[test]
    fn macro_is_f1_of_averaged_ratios() {
        // label 0: tp 1 fn 1 -> r .5 p 1; label 1: tp 1 fp 1 -> r 1 p .5
        let pred = vec![vec![0], vec![1], vec![1]];
        let gold = vec![vec![0], vec![0], vec![1]];
        let (_, macro_) = micro_macro_f1(&pred, &gold, 2);
        assert!((macro_ - 0.75).abs() < 1e-15);
    }

    #[test]
    fn t_test_conventions() {
        let a = [0.5; 10];
        assert_eq!(paired_t_test(&a, &a).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|x| x - 0.1).collect();
        assert_eq!(paired_t_test(&a, &b).unwrap(), 0.0);
        assert!(paired_t_test(&a[..1], &a[..1]).is_err());
        assert!((t_two_sided(2.262, 9.0) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn label_file_parsing() {
        let ids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let l = LabelSet::parse("# comment\na 10\nb 2 10\nc 2\n", &ids).unwrap();
        assert_eq!(l.label_names, vec!["2", "10"]);
        assert_eq!(l.labels, vec![vec![1], vec![0, 1], vec![0]]);
        assert!(l.is_multi_label());
        assert!(LabelSet::parse("z 1\na 2\n", &ids).is_err());
        assert!(LabelSet::parse("a 1\nb 1\n", &ids).is_err());
        assert!(LabelSet::parse("a\n", &ids).is_err());
    }

    #[test]
    fn report_csv_and_variance() {
        let report = EvalReport {
            runs: vec![
                RunScore { fraction: 0.5, run: 0, micro_f1: 0.6, macro_f1: 0.5 },
                RunScore { fraction: 0.5, run: 1, micro_f1: 0.8, macro_f1: 0.7 },
            ],
            untrained_labels: vec![],
            degenerate: false,
        };
        let s = report.summary();
        assert!((s[0].micro_mean - 0.7).abs() < 1e-15);
        assert!((s[0].micro_variance - 0.02).abs() < 1e-15);
        assert!(report.to_csv().starts_with("fraction,run,micro_f1,macro_f1\n0.5,0,0.6,0.5\n"));
        let t = TTestTable::compare("x-y", &report, &report).unwrap();
        assert!(t.to_csv().starts_with("pair,fraction,p_value\nx-y,0.5,1e0\n"));
    }

    proptest! {
        #[test]
        fn micro_equals_accuracy_single_label(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40)) {
            let pred: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.0]).collect();
            let gold: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.1]).collect();
            let acc = pairs.iter().filter(|p| p.0 == p.1).count() as f64 / pairs.len() as f64;
            let (micro, _) = micro_macro_f1(&pred, &gold, 4);
            prop_assert!((micro - acc).abs() < 1e-12);
        }

        #[test]
        fn f1_invariant_to_label_permutation(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..30)) {
            let perm = [2, 0, 1];
            let pred: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.0]).collect();
            let gold: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.1]).collect();
            let pp: Vec<Vec<usize>> = pairs.iter().map(|p| vec![perm[p.0]]).collect();
            let gp: Vec<Vec<usize>> = pairs.iter().map(|p| vec![perm[p.1]]).collect();
            let a = micro_macro_f1(&pred, &gold, 3);
            let b = micro_macro_f1(&pp, &gp, 3);
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }
}
