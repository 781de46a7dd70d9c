//! Skip-gram with negative sampling over walk corpora.
//!
//! Every walk position `i` and every other position within `window` of it
//! form a positive pair `(center, context)`. Each pair is trained with
//! `negatives` noise nodes drawn proportionally to `visit_count^0.75`,
//! minimizing `-ln s(f_u . c_x) - sum_n ln s(-f_u . c_n)` by SGD with a
//! learning rate decaying linearly from `initial_learning_rate` to
//! `min_learning_rate` over all pairs of all epochs.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::walker::WalkSet;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub initial_learning_rate: f64,
    pub min_learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Single-threaded, bit-reproducible training.
    pub deterministic: bool,
    /// Worker cap for parallel mode; `None` uses the global pool size.
    pub workers: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dimension: 128,
            window: 10,
            negatives: 5,
            initial_learning_rate: 0.025,
            min_learning_rate: 1e-4,
            epochs: 5,
            seed: 0,
            deterministic: true,
            workers: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 1 || self.window < 1 || self.negatives < 1 {
            return Err(Error::value("dimension, window and negatives must be >= 1"));
        }
        if !(self.initial_learning_rate > 0.0 && self.min_learning_rate > 0.0) {
            return Err(Error::value("learning rates must be positive"));
        }
        Ok(())
    }

    fn learning_rate(&self, processed: u64, total: u64) -> f64 {
        let progress = processed as f64 / total.max(1) as f64;
        (self.initial_learning_rate * (1.0 - progress)).max(self.min_learning_rate)
    }
}

/// Trained node vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub dim: usize,
    /// Row-major `node_count x dim` representation.
    pub input: Vec<T>,
    /// Row-major `node_count x dim` context vectors.
    pub context: Vec<T>,
    pub visit_counts: Vec<u64>,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl<T: Scalar> Embedding<T> {
    /// Input vectors uniform in `(-0.5/d, 0.5/d)`, context vectors zero.
    pub fn initialize(node_count: usize, cfg: &TrainConfig) -> Self {
        let d = cfg.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let half = 0.5 / d as f64;
        let input = (0..node_count * d)
            .map(|_| T::of(rng.random_range(-half..half)))
            .collect();
        Self {
            dim: d,
            input,
            context: vec![T::zero(); node_count * d],
            visit_counts: vec![0; node_count],
            epoch_losses: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.visit_counts.len()
    }

    pub fn vector(&self, node: usize) -> &[T] {
        &self.input[node * self.dim..(node + 1) * self.dim]
    }

    pub fn context_vector(&self, node: usize) -> &[T] {
        &self.context[node * self.dim..(node + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|x| x.is_finite())
    }

    pub fn to_table(&self, ids: &[String]) -> Result<EmbeddingTable<T>> {
        if ids.len() != self.node_count() {
            return Err(Error::value(format!(
                "{} identifiers for {} embedded nodes",
                ids.len(),
                self.node_count()
            )));
        }
        Ok(EmbeddingTable {
            ids: ids.to_vec(),
            dim: self.dim,
            data: self.input.clone(),
        })
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `ln s(x)` without overflow.
fn log_sigmoid<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        x - x.exp().ln_1p()
    } else {
        -(-x).exp().ln_1p()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// One positive pair and its noise nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

/// Exact gradients of the pair loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    /// With respect to the center's input vector.
    pub center: Vec<T>,
    /// With respect to the context vector of the positive node.
    pub context: Vec<T>,
    /// With respect to each negative's context vector, in sample order.
    pub negatives: Vec<Vec<T>>,
}

/// Negative-sampling loss of one pair and its gradients.
pub fn loss_and_gradient<T: Scalar>(emb: &Embedding<T>, sample: &PairSample) -> (T, Gradients<T>) {
    let f = emb.vector(sample.center);
    let c = emb.context_vector(sample.context);
    let pos = dot(f, c);
    let mut loss = -log_sigmoid(pos);
    let coef = sigmoid(pos) - T::one();
    let mut center: Vec<T> = c.iter().map(|&x| coef * x).collect();
    let context = f.iter().map(|&x| coef * x).collect();
    let mut negatives = Vec::with_capacity(sample.negatives.len());
    for &n in &sample.negatives {
        let cn = emb.context_vector(n);
        let s = dot(f, cn);
        loss -= log_sigmoid(-s);
        let coef = sigmoid(s);
        for (g, &x) in center.iter_mut().zip(cn) {
            *g += coef * x;
        }
        negatives.push(f.iter().map(|&x| coef * x).collect());
    }
    (
        loss,
        Gradients {
            center,
            context,
            negatives,
        },
    )
}

/// `(s(x), ln s(x))` from a single exponential.
fn sigmoid_and_log<T: Scalar>(x: T, with_log: bool) -> (T, T) {
    let e = (-x.abs()).exp();
    let ln = if with_log { e.ln_1p() } else { T::zero() };
    if x >= T::zero() {
        (T::one() / (T::one() + e), -ln)
    } else {
        (e / (T::one() + e), x - ln)
    }
}

/// Every this many pairs contributes to the reported epoch loss; the
/// logarithm is skipped for the others.
const LOSS_STRIDE: u64 = 8;

/// Applies one SGD step on a positive pair; returns its loss before the step
/// when `with_loss`, zero otherwise.
trait Kernel<T> {
    fn step(&mut self, center: usize, positive: usize, negatives: &[usize], lr: T, with_loss: bool) -> f64;
}

/// Gradient scale and (optionally) loss of one target given `s = f_u . c_t`.
fn target_terms<T: Scalar>(s: T, label: bool, lr: T, with_loss: bool) -> (T, T) {
    let (sig, log_sig) = sigmoid_and_log(s, with_loss);
    if !with_loss {
        let g = if label { (T::one() - sig) * lr } else { -sig * lr };
        return (g, T::zero());
    }
    if label {
        ((T::one() - sig) * lr, -log_sig)
    } else {
        // ln s(-x) = ln s(x) - x
        (-sig * lr, s - log_sig)
    }
}

/// Eight independent accumulators so the reduction vectorizes.
fn dot_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let (x, y): (&[T; 8], &[T; 8]) = (x.try_into().expect("chunk of 8"), y.try_into().expect("chunk of 8"));
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `grad += g * c; c += g * f`, reading `c` before its update.
fn accumulate_and_update<T: Scalar>(grad: &mut [T], c: &mut [T], f: &[T], g: T) {
    let n = c.len();
    let (grad, f) = (&mut grad[..n], &f[..n]);
    for k in 0..n {
        let ck = c[k];
        grad[k] += g * ck;
        c[k] = ck + g * f[k];
    }
}

fn add_assign<T: Scalar>(a: &mut [T], b: &[T]) {
    for (x, &y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Exclusive in-place matrices.
struct DenseKernel<'a, T> {
    input: &'a mut [T],
    context: &'a mut [T],
    dim: usize,
    grad: Vec<T>,
}

impl<T: Scalar> Kernel<T> for DenseKernel<'_, T> {
    fn step(&mut self, center: usize, positive: usize, negatives: &[usize], lr: T, with_loss: bool) -> f64 {
        let d = self.dim;
        let f = &mut self.input[center * d..(center + 1) * d];
        self.grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        let targets = std::iter::once((positive, true)).chain(negatives.iter().map(|&n| (n, false)));
        for (t, label) in targets {
            let c = &mut self.context[t * d..(t + 1) * d];
            let (g, l) = target_terms(dot_unrolled(f, c), label, lr, with_loss);
            loss += l;
            accumulate_and_update(&mut self.grad, c, f, g);
        }
        add_assign(f, &self.grad);
        loss.as_f64()
    }
}

/// Lock-free shared matrices for parallel training. Concurrent updates to
/// the same cell may be lost; each individual load and store is atomic.
struct SharedKernel<'a, T> {
    input: &'a [AtomicU64],
    context: &'a [AtomicU64],
    dim: usize,
    center: Vec<T>,
    row: Vec<T>,
    grad: Vec<T>,
}

fn load<T: Scalar>(cells: &[AtomicU64], out: &mut [T]) {
    for (o, c) in out.iter_mut().zip(cells) {
        *o = T::of(f64::from_bits(c.load(Ordering::Relaxed)));
    }
}

fn store<T: Scalar>(cells: &[AtomicU64], values: &[T]) {
    for (c, v) in cells.iter().zip(values) {
        c.store(v.as_f64().to_bits(), Ordering::Relaxed);
    }
}

impl<T: Scalar> Kernel<T> for SharedKernel<'_, T> {
    fn step(&mut self, center: usize, positive: usize, negatives: &[usize], lr: T, with_loss: bool) -> f64 {
        let d = self.dim;
        load(&self.input[center * d..(center + 1) * d], &mut self.center);
        self.grad.iter_mut().for_each(|g| *g = T::zero());
        let mut loss = T::zero();
        let targets = std::iter::once((positive, true)).chain(negatives.iter().map(|&n| (n, false)));
        for (t, label) in targets {
            let cells = &self.context[t * d..(t + 1) * d];
            load(cells, &mut self.row);
            let (g, l) = target_terms(dot_unrolled(&self.center, &self.row), label, lr, with_loss);
            loss += l;
            accumulate_and_update(&mut self.grad, &mut self.row, &self.center, g);
            store(cells, &self.row);
        }
        add_assign(&mut self.center, &self.grad);
        store(&self.input[center * d..(center + 1) * d], &self.center);
        loss.as_f64()
    }
}

fn pair_count(walks: &[Vec<usize>], window: usize) -> u64 {
    walks
        .iter()
        .map(|w| {
            let n = w.len();
            (0..n)
                .map(|i| (i.saturating_sub(window)..(i + window + 1).min(n)).len() as u64 - 1)
                .sum::<u64>()
        })
        .sum()
}

fn noise_distribution(visits: &[u64]) -> Option<WeightedAliasIndex<f64>> {
    WeightedAliasIndex::new(visits.iter().map(|&c| (c as f64).powf(0.75)).collect()).ok()
}

fn draw_negatives(noise: &WeightedAliasIndex<f64>, rng: &mut ChaCha8Rng, positive: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    for _ in 0..k {
        let n = noise.sample(rng);
        if n != positive {
            out.push(n);
        }
    }
}

fn train_shard<T: Scalar>(
    walks: &[Vec<usize>],
    kernel: &mut impl Kernel<T>,
    cfg: &TrainConfig,
    noise: &WeightedAliasIndex<f64>,
    rng: &mut ChaCha8Rng,
    mut next_lr: impl FnMut() -> f64,
) -> (f64, u64) {
    let mut negs = Vec::with_capacity(cfg.negatives);
    let mut loss = 0.0;
    let mut pairs = 0u64;
    let mut sampled = 0u64;
    for walk in walks {
        for (i, &u) in walk.iter().enumerate() {
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window + 1).min(walk.len());
            for (j, &x) in walk.iter().enumerate().take(hi).skip(lo) {
                if j == i {
                    continue;
                }
                let lr = T::of(next_lr());
                draw_negatives(noise, rng, x, cfg.negatives, &mut negs);
                let with_loss = pairs.is_multiple_of(LOSS_STRIDE);
                loss += kernel.step(u, x, &negs, lr, with_loss);
                sampled += u64::from(with_loss);
                pairs += 1;
            }
        }
    }
    (loss, sampled)
}

fn derive(seed: u64, epoch: usize, shard: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (shard as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)
}

/// Trains an embedding for every node of the walked graph.
pub fn train<T: Scalar>(walks: &WalkSet, cfg: &TrainConfig) -> Result<Embedding<T>> {
    cfg.validate()?;
    if walks.is_empty() {
        return Err(Error::value("cannot train on an empty walk set"));
    }
    let mut emb = Embedding::<T>::initialize(walks.node_count, cfg);
    emb.visit_counts = walks.visit_counts();
    let Some(noise) = noise_distribution(&emb.visit_counts) else {
        return Err(Error::value("walks visit no node"));
    };
    let total = pair_count(&walks.walks, cfg.window) * cfg.epochs as u64;

    if cfg.deterministic {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, 0, 0));
        let mut processed = 0u64;
        for _ in 0..cfg.epochs {
            let mut kernel = DenseKernel {
                input: &mut emb.input,
                context: &mut emb.context,
                dim: cfg.dimension,
                grad: vec![T::zero(); cfg.dimension],
            };
            let (loss, sampled) = train_shard(
                &walks.walks,
                &mut kernel,
                cfg,
                &noise,
                &mut rng,
                || {
                    processed += 1;
                    cfg.learning_rate(processed - 1, total)
                },
            );
            emb.epoch_losses.push(loss / sampled.max(1) as f64);
        }
    } else {
        let to_atomic = |v: &[T]| -> Vec<AtomicU64> { v.iter().map(|x| AtomicU64::new(x.as_f64().to_bits())).collect() };
        let input = to_atomic(&emb.input);
        let context = to_atomic(&emb.context);
        let processed = AtomicU64::new(0);
        let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads).max(1);
        let shard_len = walks.walks.len().div_ceil(workers);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
        for epoch in 0..cfg.epochs {
            let (loss, sampled) = pool.install(|| {
                walks
                    .walks
                    .par_chunks(shard_len)
                    .enumerate()
                    .map(|(shard, ws)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, epoch, shard));
                        let d = cfg.dimension;
                        let mut kernel = SharedKernel {
                            input: &input,
                            context: &context,
                            dim: d,
                            center: vec![T::zero(); d],
                            row: vec![T::zero(); d],
                            grad: vec![T::zero(); d],
                        };
                        train_shard(ws, &mut kernel, cfg, &noise, &mut rng, || {
                            cfg.learning_rate(processed.fetch_add(1, Ordering::Relaxed), total)
                        })
                    })
                    .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
            });
            emb.epoch_losses.push(loss / sampled.max(1) as f64);
        }
        let from_atomic = |v: &[AtomicU64]| -> Vec<T> { v.iter().map(|x| T::of(f64::from_bits(x.load(Ordering::Relaxed)))).collect() };
        emb.input = from_atomic(&input);
        emb.context = from_atomic(&context);
    }
    if !emb.is_finite() {
        return Err(Error::State("training produced non-finite vectors".into()));
    }
    Ok(emb)
}

/// Node vectors keyed by external identifier: the exchange format between
/// training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    pub ids: Vec<String>,
    pub dim: usize,
    pub data: Vec<T>,
}

/// Magic bytes opening the binary embedding cache.
pub const BINARY_MAGIC: &[u8; 8] = b"CDNREMB1";

impl<T: Scalar> EmbeddingTable<T> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Header `<rows> <d>`, then `<external_id> <v1> ... <vd>` per row, with
    /// shortest round-trip decimal formatting.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing `<rows> <d>` header"))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, format!("bad header token `{t}`"))))
            .collect::<Result<_>>()?;
        let [rows, dim] = head[..] else {
            return Err(Error::parse(1, "header must be `<rows> <d>`"));
        };
        let mut ids = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for (lineno, line) in lines {
            let mut tokens = line.split_whitespace();
            let id = tokens.next().expect("line is not blank");
            let before = data.len();
            for t in tokens {
                data.push(
                    t.parse::<T>()
                        .map_err(|_| Error::parse(lineno + 1, format!("bad coordinate `{t}`")))?,
                );
            }
            if data.len() - before != dim {
                return Err(Error::parse(lineno + 1, format!("expected {dim} coordinates")));
            }
            ids.push(id.to_owned());
        }
        if ids.len() != rows {
            return Err(Error::value(format!("header promises {rows} rows, found {}", ids.len())));
        }
        Ok(Self { ids, dim, data })
    }

    /// Magic, scalar width (u32), rows (u64), d (u64), row-major values and
    /// newline-terminated identifiers; all little-endian.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + self.data.len() * T::BYTES);
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for v in &self.data {
            if T::BYTES == 4 {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        for id in &self.ids {
            out.extend_from_slice(id.as_bytes());
            out.push(b'\n');
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::value(format!("binary embedding: {m}"));
        if bytes.len() < 28 || &bytes[..8] != BINARY_MAGIC {
            return Err(bad("missing magic"));
        }
        let width = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let rows = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let dim = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes")) as usize;
        if width != T::BYTES {
            return Err(bad(&format!("stored width {width} does not match scalar width {}", T::BYTES)));
        }
        let body = rows * dim * width;
        let values = bytes.get(28..28 + body).ok_or_else(|| bad("truncated values"))?;
        let data = values
            .chunks_exact(width)
            .map(|c| {
                if width == 4 {
                    T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                } else {
                    T::of(f64::from_le_bytes(c.try_into().expect("8 bytes")))
                }
            })
            .collect();
        let names = std::str::from_utf8(&bytes[28 + body..]).map_err(|_| bad("identifiers are not UTF-8"))?;
        let ids: Vec<String> = names.lines().map(str::to_owned).collect();
        if ids.len() != rows {
            return Err(bad("identifier count mismatch"));
        }
        Ok(Self { ids, dim, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::{Layer, WalkConfig};

    fn walks(ws: Vec<Vec<usize>>, n: usize) -> WalkSet {
        WalkSet {
            walks: ws,
            config: WalkConfig::default(),
            layer: Layer::Target,
            node_count: n,
        }
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            dimension: 8,
            window: 2,
            epochs: 2,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let ws = walks(vec![vec![0, 1, 2], vec![2, 1, 0]], 4);
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let emb: Embedding<f64> = train(&ws, &cfg).unwrap();
        let init = Embedding::<f64>::initialize(4, &cfg);
        assert_eq!(emb.input, init.input);
        assert!(emb.context.iter().all(|&x| x == 0.0));
        let bound = 0.5 / 8.0;
        assert!(emb.input.iter().all(|x| x.abs() < bound));
    }

    #[test]
    fn zero_vectors_give_log_two_per_term() {
        let mut emb = Embedding::<f64>::initialize(3, &small_cfg());
        emb.input.iter_mut().for_each(|x| *x = 0.0);
        let s = PairSample {
            center: 0,
            context: 1,
            negatives: vec![2, 2],
        };
        let (loss, g) = loss_and_gradient(&emb, &s);
        assert!((loss - 3.0 * 2f64.ln()).abs() < 1e-15);
        assert!(g.center.iter().chain(&g.context).all(|&x| x == 0.0));
        assert!(g.negatives.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = TrainConfig { dimension: 5, ..small_cfg() };
        let mut emb = Embedding::<f64>::initialize(4, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        emb.input.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        emb.context.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let s = PairSample {
            center: 0,
            context: 1,
            negatives: vec![2, 3],
        };
        let (_, g) = loss_and_gradient(&emb, &s);
        let h = 1e-6;
        let numeric = |emb: &Embedding<f64>, which: bool, idx: usize| {
            let mut plus = emb.clone();
            let mut minus = emb.clone();
            let (p, m) = if which {
                (&mut plus.input[idx], &mut minus.input[idx])
            } else {
                (&mut plus.context[idx], &mut minus.context[idx])
            };
            *p += h;
            *m -= h;
            (loss_and_gradient(&plus, &s).0 - loss_and_gradient(&minus, &s).0) / (2.0 * h)
        };
        for k in 0..5 {
            assert!((numeric(&emb, true, k) - g.center[k]).abs() < 1e-7);
            assert!((numeric(&emb, false, 5 + k) - g.context[k]).abs() < 1e-7);
            assert!((numeric(&emb, false, 10 + k) - g.negatives[0][k]).abs() < 1e-7);
            assert!((numeric(&emb, false, 15 + k) - g.negatives[1][k]).abs() < 1e-7);
        }
    }

    #[test]
    fn sgd_step_matches_gradient_descent() {
        let cfg = TrainConfig { dimension: 3, ..small_cfg() };
        let mut emb = Embedding::<f64>::initialize(3, &cfg);
        emb.context = vec![0.2, -0.1, 0.4, -0.3, 0.5, 0.1, 0.0, 0.2, -0.2];
        let s = PairSample {
            center: 0,
            context: 1,
            negatives: vec![2],
        };
        let (_, g) = loss_and_gradient(&emb, &s);
        let lr = 0.1;
        let mut input = emb.input.clone();
        let mut context = emb.context.clone();
        let mut dense = DenseKernel {
            input: &mut input,
            context: &mut context,
            dim: 3,
            grad: vec![0.0; 3],
        };
        let loss = dense.step(0, 1, &[2], lr, true);
        assert!((loss - loss_and_gradient(&emb, &s).0).abs() < 1e-15);
        let atomic = |v: &[f64]| -> Vec<AtomicU64> { v.iter().map(|x| AtomicU64::new(x.to_bits())).collect() };
        let (shared_in, shared_ctx) = (atomic(&emb.input), atomic(&emb.context));
        let mut shared = SharedKernel {
            input: &shared_in,
            context: &shared_ctx,
            dim: 3,
            center: vec![0.0; 3],
            row: vec![0.0; 3],
            grad: vec![0.0; 3],
        };
        shared.step(0, 1, &[2], lr, false);
        let back = |v: &[AtomicU64]| -> Vec<f64> { v.iter().map(|x| f64::from_bits(x.load(Ordering::Relaxed))).collect() };
        assert_eq!(back(&shared_in), input);
        assert_eq!(back(&shared_ctx), context);
        for k in 0..3 {
            assert!((input[k] - (emb.input[k] - lr * g.center[k])).abs() < 1e-15);
            assert!((context[3 + k] - (emb.context[3 + k] - lr * g.context[k])).abs() < 1e-15);
            assert!((context[6 + k] - (emb.context[6 + k] - lr * g.negatives[0][k])).abs() < 1e-15);
        }
    }

    #[test]
    fn two_cliques_separate() {
        use crate::walker::generate_walks;
        let mut edges = Vec::new();
        for base in [0, 5] {
            for a in 0..5 {
                for b in a + 1..5 {
                    edges.push((base + a, base + b, 1.0));
                }
            }
        }
        edges.push((4, 5, 1.0));
        let g = crate::graph::Graph::<f64>::from_edges(10, edges, false).unwrap();
        let wc = WalkConfig {
            walks_per_node: 20,
            walk_length: 20,
            seed: 1,
            ..Default::default()
        };
        let ws = generate_walks(&g, &wc, Layer::Target, Some(1)).unwrap();
        let cfg = TrainConfig {
            dimension: 16,
            window: 3,
            epochs: 3,
            ..small_cfg()
        };
        let emb: Embedding<f64> = train(&ws, &cfg).unwrap();
        let cos = |a: usize, b: usize| {
            let (x, y) = (emb.vector(a), emb.vector(b));
            dot(x, y) / (dot(x, x).sqrt() * dot(y, y).sqrt())
        };
        let mut within = 0.0;
        let mut across = 0.0;
        for a in 0..10 {
            for b in 0..10 {
                if a != b {
                    if (a < 5) == (b < 5) {
                        within += cos(a, b) / 40.0;
                    } else {
                        across += cos(a, b) / 50.0;
                    }
                }
            }
        }
        assert!(within > across + 0.2, "within {within} across {across}");
        assert!(emb.epoch_losses[2] < emb.epoch_losses[0]);
    }

    #[test]
    fn sign_flip_symmetry() {
        let mut emb = Embedding::<f64>::initialize(2, &TrainConfig { dimension: 4, ..small_cfg() });
        emb.context = vec![0.3, -0.2, 0.1, 0.5, -0.4, 0.2, 0.7, -0.1];
        let s = PairSample {
            center: 0,
            context: 1,
            negatives: vec![],
        };
        let (a, _) = loss_and_gradient(&emb, &s);
        emb.input.iter_mut().for_each(|x| *x = -*x);
        emb.context.iter_mut().for_each(|x| *x = -*x);
        let (b, _) = loss_and_gradient(&emb, &s);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn fused_sigmoid_matches_separate_forms() {
        for x in [-40.0, -3.0, -0.5, 0.0, 0.7, 5.0, 40.0f64] {
            let (s, l) = sigmoid_and_log(x, true);
            assert!((s - sigmoid(x)).abs() < 1e-15);
            assert!((l - log_sigmoid(x)).abs() < 1e-13);
        }
        let v: Vec<f64> = (0..11).map(|i| i as f64 * 0.3 - 1.0).collect();
        assert!((dot_unrolled(&v, &v) - dot(&v, &v)).abs() < 1e-12);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!(log_sigmoid(-800.0f64).is_finite());
        assert!((log_sigmoid(-800.0f64) + 800.0).abs() < 1e-9);
        assert_eq!(log_sigmoid(800.0f64), 0.0);
    }

    #[test]
    fn pair_count_matches_enumeration() {
        let ws = vec![vec![0; 7], vec![1; 2], vec![2]];
        let mut brute = 0;
        for w in &ws {
            for i in 0..w.len() {
                for j in 0..w.len() {
                    if i != j && i.abs_diff(j) <= 3 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(pair_count(&ws, 3), brute);
    }

    #[test]
    fn deterministic_mode_is_reproducible() {
        let ws = walks(vec![vec![0, 1, 2, 3, 1, 0], vec![3, 2, 1, 0, 1]], 5);
        let a: Embedding<f64> = train(&ws, &small_cfg()).unwrap();
        let b: Embedding<f64> = train(&ws, &small_cfg()).unwrap();
        assert_eq!(a, b);
        // isolated node 4 keeps its initial vector
        let init = Embedding::<f64>::initialize(5, &small_cfg());
        assert_eq!(a.vector(4), init.vector(4));
        assert_eq!(a.epoch_losses.len(), 2);
    }

    #[test]
    fn parallel_mode_trains_finite_vectors() {
        let ws = walks((0..64).map(|i| vec![i % 8, (i + 1) % 8, (i + 3) % 8, i % 8]).collect(), 8);
        let cfg = TrainConfig {
            deterministic: false,
            workers: Some(4),
            ..small_cfg()
        };
        let emb: Embedding<f32> = train(&ws, &cfg).unwrap();
        assert!(emb.is_finite());
        assert_ne!(emb.input, Embedding::<f32>::initialize(8, &cfg).input);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ws = walks(vec![vec![0, 1]], 2);
        assert!(train::<f64>(&ws, &TrainConfig { dimension: 0, ..small_cfg() }).is_err());
        assert!(train::<f64>(&walks(vec![], 2), &small_cfg()).is_err());
    }

    #[test]
    fn text_export_shape_and_round_trip() {
        let emb = Embedding::<f64>::initialize(2, &TrainConfig { dimension: 2, ..small_cfg() });
        let table = emb.to_table(&["a".into(), "b".into()]).unwrap();
        let text = table.to_text();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("2 2\na "));
        let back = EmbeddingTable::<f64>::from_text(&text).unwrap();
        assert_eq!(back, table);
        assert!(emb.to_table(&["a".into()]).is_err());
        assert!(EmbeddingTable::<f64>::from_text("2 2\na 1 2\n").is_err());
        assert!(EmbeddingTable::<f64>::from_text("1 2\na 1\n").is_err());
    }

    #[test]
    fn binary_round_trip() {
        let emb = Embedding::<f32>::initialize(3, &TrainConfig { dimension: 5, ..small_cfg() });
        let table = emb.to_table(&["x".into(), "y".into(), "z".into()]).unwrap();
        let bytes = table.to_binary();
        assert_eq!(&bytes[..8], BINARY_MAGIC);
        assert_eq!(EmbeddingTable::<f32>::from_binary(&bytes).unwrap(), table);
        assert!(EmbeddingTable::<f64>::from_binary(&bytes).is_err());
        assert!(EmbeddingTable::<f32>::from_binary(&bytes[..20]).is_err());
    }
}
