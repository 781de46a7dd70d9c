use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cdnr::balance::{balance, BalanceParams, CrossLinks, SuperNodeSet};
use cdnr::embed::{train, EmbeddingTable, TrainConfig};
use cdnr::eval::{evaluate, EvalConfig, LabelSet, TTestTable};
use cdnr::graph::{fit_power_law, load_edge_list_with_ids, log_binned_density, plot_csv, Graph, IdMap};
use cdnr::io::{read_to_string, write_atomic};
use cdnr::pipeline::{limit_global_workers, parse_fractions, run_pipeline, PipelineConfig};
use cdnr::synth::{degrade, planted_partition, scale_free};
use cdnr::transfer::{build_super_graph, candidate_pairs, evolve_edges, transfer_weights, SuperGraphOptions};
use cdnr::walker::{generate_walks, Layer, WalkConfig, WalkSet};

#[derive(Parser)]
#[command(name = "cdnr", version, about = "Cross-domain network representation learning")]
struct Cli {
    /// Cap on worker threads for every parallel stage.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list: `u v [w]` per line.
    #[arg(long)]
    graph: PathBuf,
    /// `external_id<TAB>index` map pinning node order.
    #[arg(long)]
    ids: Option<PathBuf>,
    #[arg(long)]
    directed: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Degree statistics and power-law fit.
    Stats {
        #[command(flatten)]
        input: GraphArgs,
        /// Degree histogram CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Degree distribution as `x,log_x,p,log_p` for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Second-order biased random walks.
    Walk {
        #[command(flatten)]
        input: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 80)]
        l: usize,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Bias transitions by edge weight (top-layer walks).
        #[arg(long)]
        weighted: bool,
        /// Log-binned visit-frequency distribution for plotting.
        #[arg(long)]
        visits: Option<PathBuf>,
    },
    /// Super nodes and cross-domain links.
    Balance {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        source_ids: Option<PathBuf>,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        target_ids: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        gamma: f64,
        #[arg(long, default_value_t = 100.0)]
        lambda: f64,
        /// Defaults to the smaller fitted degree slope of the two graphs.
        #[arg(long)]
        a_plus: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Super graph and target weight transfer.
    Transfer {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        source_ids: Option<PathBuf>,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        target_ids: Option<PathBuf>,
        /// Source-layer walks.
        #[arg(long)]
        walks: PathBuf,
        #[arg(long)]
        supernodes: PathBuf,
        #[arg(long)]
        crosslinks: PathBuf,
        #[arg(long, default_value_t = 2)]
        hop_limit: usize,
        #[arg(long)]
        pair_distance_cap: Option<usize>,
        /// Per-pair weights.
        #[arg(long)]
        out: PathBuf,
        /// Reweighted target edge list.
        #[arg(long)]
        evolved: Option<PathBuf>,
        #[arg(long)]
        supergraph: Option<PathBuf>,
    },
    /// Skip-gram embedding of a walk file.
    Embed {
        #[command(flatten)]
        input: GraphArgs,
        #[arg(long)]
        walks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the binary cache.
        #[arg(long)]
        binary: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lock-free multi-threaded training (not bit-reproducible).
        #[arg(long)]
        parallel: bool,
    },
    /// Repeated-split classification of an embedding.
    Evaluate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// `a..b`, `a..b:step` or a comma list.
        #[arg(long, default_value = "0.1..0.9")]
        fractions: String,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Second embedding to compare against with paired t-tests.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, requires = "compare")]
        ttest: Option<PathBuf>,
    },
    /// Synthetic fixtures.
    Synth {
        #[command(subcommand)]
        kind: SynthKind,
    },
    /// Full pipeline from a `key = value` config; any key can be overridden
    /// with `--<key> <value>`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
}

#[derive(Subcommand)]
enum SynthKind {
    /// Preferential attachment graph.
    ScaleFree {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: writes `<out>.edges` and `<out>.ids`.
        #[arg(long, default_value = "scale_free")]
        out: PathBuf,
    },
    /// Planted partition with labels.
    Planted {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: writes `<out>.edges`, `<out>.ids` and `<out>.labels`.
        #[arg(long, default_value = "planted")]
        out: PathBuf,
    },
    /// Keep a random fraction of a graph's edges.
    Degrade {
        #[command(flatten)]
        input: GraphArgs,
        #[arg(long)]
        keep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: writes `<out>.edges` and `<out>.ids`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, ids: Option<&Path>, directed: bool) -> Result<Graph<f64>> {
    let map = match ids {
        Some(p) => IdMap::from_tsv(&read_to_string(p)?)?,
        None => IdMap::new(),
    };
    let text = read_to_string(path)?;
    load_edge_list_with_ids(&text, map, directed, 1.0).with_context(|| format!("loading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_graph(prefix: &Path, g: &Graph<f64>) -> Result<()> {
    let edges = with_suffix(prefix, "edges");
    write(&edges, &g.to_edge_list())?;
    write(&with_suffix(prefix, "ids"), &g.ids().to_tsv())?;
    println!("wrote {} ({} nodes, {} edges)", edges.display(), g.node_count(), g.edge_count());
    Ok(())
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            bail!("unexpected argument `{arg}`; overrides look like `--walk.k 5`");
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
            None => {
                let v = it.next().with_context(|| format!("`--{key}` needs a value"))?;
                out.push((key.to_owned(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        limit_global_workers(w)?;
    }
    match cli.command {
        Command::Stats { input, out, plot } => {
            let g = load(&input.graph, input.ids.as_deref(), input.directed)?;
            let stats = g.degree_stats();
            println!("nodes\t{}", g.node_count());
            println!("edges\t{}", g.edge_count());
            println!("average_degree\t{:.6}", stats.average_degree);
            println!("distinct_degrees\t{}", stats.n_deg);
            match fit_power_law(&stats, 1) {
                Ok(fit) => println!("power_law_slope\t{:.6}\nr_squared\t{:.6}", fit.slope_a, fit.r_squared),
                Err(e) => println!("power_law_slope\tunavailable ({e})"),
            }
            if let Some(p) = out {
                write(&p, &stats.to_csv())?;
            }
            if let Some(p) = plot {
                write(&p, &plot_csv(&stats.distribution()))?;
            }
        }
        Command::Walk {
            input,
            out,
            k,
            l,
            p,
            q,
            seed,
            weighted,
            visits,
        } => {
            let g = load(&input.graph, input.ids.as_deref(), input.directed)?;
            let cfg = WalkConfig {
                walks_per_node: k,
                walk_length: l,
                p,
                q,
                use_edge_weights: weighted,
                seed,
            };
            let layer = if weighted { Layer::Target } else { Layer::Source };
            let walks = generate_walks(&g, &cfg, layer, cli.workers)?;
            write(&out, &walks.to_text())?;
            if let Some(path) = visits {
                write(&path, &plot_csv(&log_binned_density(&walks.visit_counts(), 2.0)))?;
            }
            println!("wrote {} walks to {}", walks.len(), out.display());
        }
        Command::Balance {
            source,
            source_ids,
            target,
            target_ids,
            out_dir,
            gamma,
            lambda,
            a_plus,
            epsilon,
            max_iterations,
        } => {
            let g_s = load(&source, source_ids.as_deref(), false)?;
            let g_t = load(&target, target_ids.as_deref(), false)?;
            let mut params = BalanceParams {
                gamma,
                lambda,
                epsilon,
                max_iterations,
                ..Default::default()
            };
            params = match a_plus {
                Some(a) => BalanceParams { a_plus: a, ..params },
                None => params.with_slopes_of(&g_s, &g_t),
            };
            let o = balance(&g_s, &g_t, &params)?;
            std::fs::create_dir_all(&out_dir)?;
            write(&out_dir.join("supernodes.tsv"), &o.supers.to_tsv(&g_s))?;
            write(&out_dir.join("crosslinks.tsv"), &o.cross.to_tsv(&g_t))?;
            println!(
                "status\t{:?}\nsuper_nodes\t{}\ncross_links\t{}\niterations\t{}",
                o.status,
                o.supers.len(),
                o.cross.link_count(),
                o.iterations
            );
        }
        Command::Transfer {
            source,
            source_ids,
            target,
            target_ids,
            walks,
            supernodes,
            crosslinks,
            hop_limit,
            pair_distance_cap,
            out,
            evolved,
            supergraph,
        } => {
            let g_s = load(&source, source_ids.as_deref(), false)?;
            let g_t = load(&target, target_ids.as_deref(), false)?;
            let walks = WalkSet::from_text(&read_to_string(&walks)?, Layer::Source, Some(g_s.node_count()))?;
            let supers = SuperNodeSet::<f64>::from_tsv(&read_to_string(&supernodes)?, &g_s)?;
            let cross = CrossLinks::<f64>::from_tsv(&read_to_string(&crosslinks)?, &g_t)?;
            let sg = build_super_graph(&walks, &supers, &SuperGraphOptions { pair_distance_cap });
            if let Some(p) = supergraph {
                write(&p, &sg.to_tsv())?;
            }
            let result = transfer_weights(&g_t, &sg, &cross, &candidate_pairs(&g_t, hop_limit)?)?;
            write(&out, &result.to_tsv(&g_t))?;
            if let Some(p) = evolved {
                write(&p, &evolve_edges(&g_t, &result)?.to_edge_list())?;
            }
            println!("pairs\t{}\nevolved\t{}", result.pairs.len(), result.evolved().count());
        }
        Command::Embed {
            input,
            walks,
            out,
            binary,
            d,
            window,
            negatives,
            lr,
            epochs,
            seed,
            parallel,
        } => {
            let g = load(&input.graph, input.ids.as_deref(), input.directed)?;
            let walks = WalkSet::from_text(&read_to_string(&walks)?, Layer::Target, Some(g.node_count()))?;
            let cfg = TrainConfig {
                dimension: d,
                window,
                negatives,
                initial_learning_rate: lr,
                epochs,
                seed,
                deterministic: !parallel,
                workers: cli.workers,
                ..Default::default()
            };
            let emb = train::<f64>(&walks, &cfg)?;
            let table = emb.to_table(g.ids().names())?;
            write(&out, &table.to_text())?;
            if let Some(p) = binary {
                write_atomic(&p, &table.to_binary())?;
            }
            for (e, loss) in emb.epoch_losses.iter().enumerate() {
                println!("epoch {}\tloss {loss:.6}", e + 1);
            }
        }
        Command::Evaluate {
            embeddings,
            labels,
            fractions,
            repetitions,
            seed,
            out,
            compare,
            ttest,
        } => {
            let cfg = EvalConfig {
                fractions: parse_fractions(&fractions)?,
                repetitions,
                seed,
                ..Default::default()
            };
            let label_text = read_to_string(&labels)?;
            let run = |path: &Path| -> Result<_> {
                let table = EmbeddingTable::<f64>::from_text(&read_to_string(path)?)
                    .with_context(|| format!("loading {}", path.display()))?;
                let labels = LabelSet::parse(&label_text, &table.ids)?;
                Ok(evaluate(&table, &labels, &cfg)?)
            };
            let report = run(&embeddings)?;
            match &out {
                Some(p) => write(p, &report.to_csv())?,
                None => print!("{}", report.to_csv()),
            }
            if let Some(other) = compare {
                let baseline = run(&other)?;
                let table = TTestTable::compare("embeddings-compare", &report, &baseline)?;
                match ttest {
                    Some(p) => write(&p, &table.to_csv())?,
                    None => print!("{}", table.to_csv()),
                }
            }
        }
        Command::Synth { kind } => match kind {
            SynthKind::ScaleFree { n, m, seed, out } => write_graph(&out, &scale_free(n, m, seed)?)?,
            SynthKind::Planted {
                n,
                k,
                p_in,
                p_out,
                seed,
                out,
            } => {
                let lg = planted_partition::<f64>(n, k, p_in, p_out, seed)?;
                write_graph(&out, &lg.graph)?;
                write(&with_suffix(&out, "labels"), &lg.label_text())?;
            }
            SynthKind::Degrade { input, keep, seed, out } => {
                let g = load(&input.graph, input.ids.as_deref(), input.directed)?;
                write_graph(&out, &degrade(&g, keep, seed)?)?;
            }
        },
        Command::Run { config, overrides } => {
            let mut cfg = match &config {
                Some(p) => {
                    let base = p.parent().unwrap_or(Path::new("."));
                    PipelineConfig::from_text(&read_to_string(p)?, base)?
                }
                None => PipelineConfig::default(),
            };
            cfg.apply_env();
            for (k, v) in parse_overrides(&overrides)? {
                cfg.set(&k, &v)?;
            }
            if cli.workers.is_some() {
                cfg.workers = cli.workers;
            }
            let (manifest, report) = run_pipeline(&cfg)?;
            for stage in &manifest.stages {
                println!("{:<12}{:>10.3}s", stage.name, stage.seconds);
            }
            if let Some(r) = report {
                for s in r.summary() {
                    println!(
                        "fraction {:.2}\tmicro {:.4} ± {:.2e}\tmacro {:.4} ± {:.2e}",
                        s.fraction, s.micro_mean, s.micro_variance, s.macro_mean, s.macro_variance
                    );
                }
            }
        }
    }
    Ok(())
}
