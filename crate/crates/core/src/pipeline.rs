//! End-to-end orchestration: source walks, node balancing, weight transfer,
//! target walks, embedding and optional evaluation, with every intermediate
//! artifact persisted and a JSON run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::balance::{balance, BalanceParams};
use crate::embed::{train, EmbeddingTable, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalReport, LabelSet};
use crate::graph::{load_edge_list_with_ids, Graph, IdMap};
use crate::io::{read_to_string, write_atomic};
use crate::scalar::Scalar;
use crate::transfer::{build_super_graph, candidate_pairs, evolve_edges, transfer_weights, SuperGraphOptions};
use crate::walker::{generate_walks, Layer, WalkConfig};

/// Environment variable overriding `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "CDNR_OUTPUT_DIR";

pub const WALKS_SOURCE_FILE: &str = "walks_source.txt";
pub const SUPERNODES_FILE: &str = "supernodes.tsv";
pub const CROSSLINKS_FILE: &str = "crosslinks.tsv";
pub const SUPERGRAPH_FILE: &str = "supergraph.tsv";
pub const TRANSFER_FILE: &str = "transfer.tsv";
pub const WALKS_TARGET_FILE: &str = "walks_target.txt";
pub const EMBEDDING_FILE: &str = "embedding.txt";
pub const EVAL_FILE: &str = "eval_report.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Transfer source knowledge into the target before embedding.
    Cdnr,
    /// Embed the target alone.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub precision: Precision,
    pub source_graph: Option<PathBuf>,
    pub target_graph: Option<PathBuf>,
    /// Optional `external_id<TAB>index` maps that pin node order and keep
    /// isolated nodes.
    pub source_ids: Option<PathBuf>,
    pub target_ids: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub directed: bool,
    pub output_dir: Option<PathBuf>,
    /// Root of every stage seed.
    pub seed: u64,
    pub workers: Option<usize>,
    pub walk: WalkConfig,
    pub balance: BalanceParams,
    /// `None` fits `a_plus` from the two degree distributions.
    pub a_plus: Option<f64>,
    pub hop_limit: usize,
    pub super_graph: SuperGraphOptions,
    pub embed: TrainConfig,
    pub evaluate: bool,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Cdnr,
            precision: Precision::F64,
            source_graph: None,
            target_graph: None,
            source_ids: None,
            target_ids: None,
            labels: None,
            directed: false,
            output_dir: None,
            seed: 0,
            workers: None,
            walk: WalkConfig::default(),
            balance: BalanceParams::default(),
            a_plus: None,
            hop_limit: 2,
            super_graph: SuperGraphOptions::default(),
            embed: TrainConfig::default(),
            evaluate: false,
            eval: EvalConfig::default(),
        }
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn parse_optional<V: std::str::FromStr>(key: &str, value: &str) -> Result<Option<V>> {
    if value == "none" || value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

/// `a..b` (step 0.1), `a..b:step`, or a comma-separated list.
pub fn parse_fractions(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad fraction list `{text}`"));
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, step) = rest.split_once(':').unwrap_or((rest, "0.1"));
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let step: f64 = step.trim().parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count)
            .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
            .collect());
    }
    text.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn fmt_option<V: std::fmt::Display>(v: &Option<V>) -> String {
    v.as_ref().map_or_else(|| "none".to_owned(), ToString::to_string)
}

impl PipelineConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths are
    /// resolved against `base_dir`.
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        for p in [
            &mut cfg.source_graph,
            &mut cfg.target_graph,
            &mut cfg.source_ids,
            &mut cfg.target_ids,
            &mut cfg.labels,
            &mut cfg.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Sets one dotted key, as in the config file or a command-line override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| (v != "none").then(|| PathBuf::from(v));
        match key {
            "mode" => {
                self.mode = match value {
                    "cdnr" => Mode::Cdnr,
                    "baseline" => Mode::Baseline,
                    _ => return Err(Error::Config(format!("`mode`: expected cdnr or baseline, got `{value}`"))),
                }
            }
            "precision" => {
                self.precision = match value {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Config(format!("`precision`: expected f32 or f64, got `{value}`"))),
                }
            }
            "source_graph" => self.source_graph = path(value),
            "target_graph" => self.target_graph = path(value),
            "source_ids" => self.source_ids = path(value),
            "target_ids" => self.target_ids = path(value),
            "labels" => self.labels = path(value),
            "output_dir" => self.output_dir = path(value),
            "directed" => self.directed = parse_bool(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = parse_optional(key, value)?,
            "walk.k" => self.walk.walks_per_node = parse_value(key, value)?,
            "walk.l" => self.walk.walk_length = parse_value(key, value)?,
            "walk.p" => self.walk.p = parse_value(key, value)?,
            "walk.q" => self.walk.q = parse_value(key, value)?,
            "balance.gamma" => self.balance.gamma = parse_value(key, value)?,
            "balance.lambda" => self.balance.lambda = parse_value(key, value)?,
            "balance.a_plus" => self.a_plus = parse_optional(key, value)?,
            "balance.epsilon" => self.balance.epsilon = parse_value(key, value)?,
            "balance.max_iterations" => self.balance.max_iterations = parse_optional(key, value)?,
            "transfer.hop_limit" => self.hop_limit = parse_value(key, value)?,
            "transfer.pair_distance_cap" => self.super_graph.pair_distance_cap = parse_optional(key, value)?,
            "embed.d" => self.embed.dimension = parse_value(key, value)?,
            "embed.window" => self.embed.window = parse_value(key, value)?,
            "embed.negatives" => self.embed.negatives = parse_value(key, value)?,
            "embed.lr" => self.embed.initial_learning_rate = parse_value(key, value)?,
            "embed.epochs" => self.embed.epochs = parse_value(key, value)?,
            "embed.deterministic" => self.embed.deterministic = parse_bool(key, value)?,
            "eval.enabled" => self.evaluate = parse_bool(key, value)?,
            "eval.fractions" => self.eval.fractions = parse_fractions(value)?,
            "eval.repetitions" => self.eval.repetitions = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies the output-directory environment override, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = Some(PathBuf::from(dir));
        }
    }

    /// Every key with its effective value; feeding these back through
    /// [`PipelineConfig::set`] reproduces the configuration.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let p = |v: &Option<PathBuf>| v.as_ref().map_or_else(|| "none".to_owned(), |p| p.display().to_string());
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_owned(), v);
        };
        put("mode", if self.mode == Mode::Cdnr { "cdnr" } else { "baseline" }.into());
        put("precision", if self.precision == Precision::F32 { "f32" } else { "f64" }.into());
        put("source_graph", p(&self.source_graph));
        put("target_graph", p(&self.target_graph));
        put("source_ids", p(&self.source_ids));
        put("target_ids", p(&self.target_ids));
        put("labels", p(&self.labels));
        put("output_dir", p(&self.output_dir));
        put("directed", self.directed.to_string());
        put("seed", self.seed.to_string());
        put("workers", fmt_option(&self.workers));
        put("walk.k", self.walk.walks_per_node.to_string());
        put("walk.l", self.walk.walk_length.to_string());
        put("walk.p", self.walk.p.to_string());
        put("walk.q", self.walk.q.to_string());
        put("balance.gamma", self.balance.gamma.to_string());
        put("balance.lambda", self.balance.lambda.to_string());
        put("balance.a_plus", fmt_option(&self.a_plus));
        put("balance.epsilon", self.balance.epsilon.to_string());
        put("balance.max_iterations", fmt_option(&self.balance.max_iterations));
        put("transfer.hop_limit", self.hop_limit.to_string());
        put("transfer.pair_distance_cap", fmt_option(&self.super_graph.pair_distance_cap));
        put("embed.d", self.embed.dimension.to_string());
        put("embed.window", self.embed.window.to_string());
        put("embed.negatives", self.embed.negatives.to_string());
        put("embed.lr", self.embed.initial_learning_rate.to_string());
        put("embed.epochs", self.embed.epochs.to_string());
        put("embed.deterministic", self.embed.deterministic.to_string());
        put("eval.enabled", self.evaluate.to_string());
        put(
            "eval.fractions",
            self.eval.fractions.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        put("eval.repetitions", self.eval.repetitions.to_string());
        m
    }

    /// Checks parameters only; file existence is checked by [`run_pipeline`].
    pub fn validate_parameters(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.walk.validate())?;
        wrap(self.embed.validate())?;
        if self.mode == Mode::Cdnr {
            let mut b = self.balance;
            if let Some(a) = self.a_plus {
                b.a_plus = a;
            }
            wrap(b.validate())?;
            if self.hop_limit < 1 {
                return Err(Error::Config("transfer.hop_limit must be >= 1".into()));
            }
        }
        if self.evaluate {
            wrap(self.eval.validate())?;
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Full validation, including that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.validate_parameters()?;
        let require = |name: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                None => Err(Error::Config(format!("`{name}` is required"))),
                Some(p) if !p.is_file() => Err(Error::Config(format!("`{name}`: {} does not exist", p.display()))),
                Some(_) => Ok(()),
            }
        };
        require("target_graph", &self.target_graph)?;
        if self.mode == Mode::Cdnr {
            require("source_graph", &self.source_graph)?;
        }
        if self.evaluate {
            require("labels", &self.labels)?;
        }
        for (name, p) in [("source_ids", &self.source_ids), ("target_ids", &self.target_ids)] {
            if p.is_some() {
                require(name, p)?;
            }
        }
        if self.output_dir.is_none() {
            return Err(Error::Config("`output_dir` is required".into()));
        }
        Ok(())
    }
}

/// Caps the global worker pool. Must run before any parallel work.
pub fn limit_global_workers(workers: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build_global()
        .map_err(|e| Error::State(format!("worker pool: {e}")))
}

/// Seed of one named stage, derived from the root seed.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub seconds: f64,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    pub status: RunStatus,
    /// Balance termination status, in CDNR mode.
    pub balance_status: Option<String>,
    pub evolved_edges: Option<usize>,
}

impl RunManifest {
    pub fn artifacts(&self) -> Vec<&Path> {
        self.stages.iter().flat_map(|s| s.artifacts.iter().map(PathBuf::as_path)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// In-memory inputs of one run.
#[derive(Debug, Clone)]
pub struct Inputs<T> {
    pub source: Option<Graph<T>>,
    pub target: Graph<T>,
    /// Labels indexed by target node.
    pub labels: Option<LabelSet>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T> {
    pub manifest: RunManifest,
    pub embedding: EmbeddingTable<T>,
    pub report: Option<EvalReport>,
}

struct Recorder<'a> {
    out: Option<&'a Path>,
    manifest: RunManifest,
}

impl Recorder<'_> {
    fn stage<R>(
        &mut self,
        name: &'static str,
        body: impl FnOnce() -> Result<(R, Vec<(&'static str, String)>)>,
    ) -> Result<R> {
        let start = Instant::now();
        let result = body().and_then(|(value, files)| {
            let mut artifacts = Vec::new();
            if let Some(dir) = self.out {
                for (file, text) in files {
                    let path = dir.join(file);
                    write_atomic(&path, text.as_bytes())?;
                    artifacts.push(path);
                }
            }
            Ok((value, artifacts))
        });
        match result {
            Ok((value, artifacts)) => {
                self.manifest.stages.push(StageRecord {
                    name,
                    seconds: start.elapsed().as_secs_f64(),
                    artifacts,
                });
                Ok(value)
            }
            Err(e) => {
                self.manifest.status = RunStatus::Failed {
                    stage: name.to_owned(),
                    message: e.to_string(),
                };
                self.persist();
                Err(Error::Stage {
                    stage: name,
                    source: Box::new(e),
                })
            }
        }
    }

    fn persist(&self) {
        if let Some(dir) = self.out {
            // Best effort: the stage error takes precedence over a manifest
            // write failure.
            let _ = write_atomic(&dir.join(MANIFEST_FILE), self.manifest.to_json().as_bytes());
        }
    }
}

/// Runs every stage on in-memory graphs. Artifacts and the manifest are
/// written only when `cfg.output_dir` is set.
pub fn execute<T: Scalar>(cfg: &PipelineConfig, inputs: Inputs<T>) -> Result<PipelineOutput<T>> {
    cfg.validate_parameters()?;
    if cfg.mode == Mode::Cdnr && inputs.source.is_none() {
        return Err(Error::Config("CDNR mode needs a source graph".into()));
    }
    if cfg.evaluate && inputs.labels.is_none() {
        return Err(Error::Config("evaluation needs labels".into()));
    }
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let seeds: BTreeMap<String, u64> = ["walk.source", "walk.target", "embed", "eval"]
        .iter()
        .map(|s| ((*s).to_owned(), stage_seed(cfg.seed, s)))
        .collect();
    let mut rec = Recorder {
        out: cfg.output_dir.as_deref(),
        manifest: RunManifest {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: cfg.entries(),
            seeds: seeds.clone(),
            stages: Vec::new(),
            status: RunStatus::Running,
            balance_status: None,
            evolved_edges: None,
        },
    };
    let g_t = inputs.target;

    let walk_graph = if cfg.mode == Mode::Cdnr {
        let g_s = inputs.source.expect("checked above");
        let source_cfg = WalkConfig {
            seed: seeds["walk.source"],
            use_edge_weights: false,
            ..cfg.walk
        };
        let walks_s = rec.stage("walk_source", || {
            let w = generate_walks(&g_s, &source_cfg, Layer::Source, cfg.workers)?;
            let text = w.to_text();
            Ok((w, vec![(WALKS_SOURCE_FILE, text)]))
        })?;
        let outcome = rec.stage("balance", || {
            let mut params = cfg.balance;
            match cfg.a_plus {
                Some(a) => params.a_plus = a,
                None => params = params.with_slopes_of(&g_s, &g_t),
            }
            let o = balance(&g_s, &g_t, &params)?;
            let files = vec![
                (SUPERNODES_FILE, o.supers.to_tsv(&g_s)),
                (CROSSLINKS_FILE, o.cross.to_tsv(&g_t)),
            ];
            Ok((o, files))
        })?;
        rec.manifest.balance_status = Some(format!("{:?}", outcome.status));
        let sg = rec.stage("super_graph", || {
            let sg = build_super_graph::<T>(&walks_s, &outcome.supers, &cfg.super_graph);
            let text = sg.to_tsv();
            Ok((sg, vec![(SUPERGRAPH_FILE, text)]))
        })?;
        drop(walks_s);
        let evolved = rec.stage("transfer", || {
            let candidates = candidate_pairs(&g_t, cfg.hop_limit)?;
            let result = transfer_weights(&g_t, &sg, &outcome.cross, &candidates)?;
            let evolved = evolve_edges(&g_t, &result)?;
            let text = result.to_tsv(&g_t);
            Ok(((evolved, result.evolved().count()), vec![(TRANSFER_FILE, text)]))
        })?;
        rec.manifest.evolved_edges = Some(evolved.1);
        evolved.0
    } else {
        g_t
    };

    let target_cfg = WalkConfig {
        seed: seeds["walk.target"],
        use_edge_weights: true,
        ..cfg.walk
    };
    let walks_t = rec.stage("walk_target", || {
        let w = generate_walks(&walk_graph, &target_cfg, Layer::Target, cfg.workers)?;
        let text = w.to_text();
        Ok((w, vec![(WALKS_TARGET_FILE, text)]))
    })?;
    let embed_cfg = TrainConfig {
        seed: seeds["embed"],
        workers: cfg.workers,
        ..cfg.embed
    };
    let embedding = rec.stage("embed", || {
        let emb = train::<T>(&walks_t, &embed_cfg)?;
        let table = emb.to_table(walk_graph.ids().names())?;
        let text = table.to_text();
        Ok((table, vec![(EMBEDDING_FILE, text)]))
    })?;
    drop(walks_t);

    let report = if cfg.evaluate {
        let labels = inputs.labels.as_ref().expect("checked above");
        let eval_cfg = EvalConfig {
            seed: seeds["eval"],
            ..cfg.eval.clone()
        };
        Some(rec.stage("evaluate", || {
            let r = evaluate(&embedding, labels, &eval_cfg)?;
            let text = r.to_csv();
            Ok((r, vec![(EVAL_FILE, text)]))
        })?)
    } else {
        None
    };

    rec.manifest.status = RunStatus::Complete;
    rec.persist();
    Ok(PipelineOutput {
        manifest: rec.manifest,
        embedding,
        report,
    })
}

fn load_graph<T: Scalar>(path: &Path, ids: Option<&Path>, directed: bool) -> Result<Graph<T>> {
    let ids = match ids {
        Some(p) => IdMap::from_tsv(&read_to_string(p)?)?,
        None => IdMap::new(),
    };
    load_edge_list_with_ids(&read_to_string(path)?, ids, directed, T::one())
}

/// Validates `cfg`, loads every input from disk and runs all stages.
pub fn run_pipeline_as<T: Scalar>(cfg: &PipelineConfig) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    let stage = |stage: &'static str| move |e: Error| Error::Stage { stage, source: Box::new(e) };
    let target = load_graph::<T>(
        cfg.target_graph.as_deref().expect("validated"),
        cfg.target_ids.as_deref(),
        cfg.directed,
    )
    .map_err(stage("load"))?;
    let source = match cfg.mode {
        Mode::Cdnr => Some(
            load_graph::<T>(
                cfg.source_graph.as_deref().expect("validated"),
                cfg.source_ids.as_deref(),
                cfg.directed,
            )
            .map_err(stage("load"))?,
        ),
        Mode::Baseline => None,
    };
    let labels = match (&cfg.labels, cfg.evaluate) {
        (Some(p), true) => Some(
            read_to_string(p)
                .and_then(|text| LabelSet::parse(&text, target.ids().names()))
                .map_err(stage("load"))?,
        ),
        _ => None,
    };
    execute(cfg, Inputs { source, target, labels })
}

/// [`run_pipeline_as`] at the configured precision; returns the manifest
/// and, when evaluation ran, its report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(RunManifest, Option<EvalReport>)> {
    match cfg.precision {
        Precision::F64 => run_pipeline_as::<f64>(cfg).map(|o| (o.manifest, o.report)),
        Precision::F32 => run_pipeline_as::<f32>(cfg).map(|o| (o.manifest, o.report)),
    }
}
