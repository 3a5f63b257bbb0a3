//! voxgraph: voxel time-series volumes -> correlation graphs -> graph-level
//! classifiers, as one scriptable binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
//! failure. Structured logs go to stderr; results go to files or stdout.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use voxgraph_core::dataset::{CachedSource, GraphDataset, GraphSource};
use voxgraph_core::gnn::{model_forward, Arch, ModelParams, ModelSpec};
use voxgraph_core::graph::BrainGraph;
use voxgraph_core::metrics::{accuracy, auroc, f1};
use voxgraph_core::pcc::{
    bench_correlate, correlate_all, degree_report, CorrelateStats, PccConfig,
};
use voxgraph_core::synth::{dims_for_voxels, gen_volume, ClassEffect, SynthConfig};
use voxgraph_core::train::{grid_search_with_model, split, GridSpec, SplitSpec};
use voxgraph_core::volume::{Volume4D, VolumeMask};
use voxgraph_core::voxels::{extract_voxels, IngestConfig};
use voxgraph_core::Error;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nformats: VOX1 v1, MSK1 v1, BGR1 v1, MDL1 v1"
);

#[derive(Parser)]
#[command(
    name = "voxgraph",
    version,
    long_version = LONG_VERSION,
    about = "Voxel correlation graphs and graph-level classifiers",
    after_help = "Every subcommand is reproducible from its flags and --seed."
)]
struct Cli {
    /// RNG seed shared by all randomized steps.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Worker threads ("auto" or a count); caps every parallel pool.
    #[arg(long, global = true, default_value = "auto")]
    workers: String,

    /// Log verbosity: off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic graph dataset (and optionally volumes).
    Synth(SynthArgs),
    /// Build a thresholded correlation graph from a VOX1 volume.
    BuildGraph(BuildGraphArgs),
    /// Degree statistics of a BGR1 graph.
    Stats(StatsArgs),
    /// Grid-search and train one architecture on a dataset manifest.
    Train(TrainArgs),
    /// Evaluate a saved model checkpoint on a dataset manifest.
    Evaluate(EvaluateArgs),
    /// Measure all-pairs correlation throughput on synthetic data.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Planted class structure: topology, feature, or null.
    #[arg(long, default_value = "null")]
    preset: String,

    /// Number of graphs (labels alternate, classes stay balanced).
    #[arg(long, default_value_t = 200)]
    n: usize,

    /// Voxels per volume (factored into a near-cubic grid).
    #[arg(long, default_value_t = 1000)]
    voxels: usize,

    /// Time steps per voxel.
    #[arg(long, default_value_t = 120)]
    t: usize,

    /// Output directory for BGR1 files and manifest.tsv.
    #[arg(long)]
    out: PathBuf,

    /// Also write the raw VOX1 volumes next to the graphs.
    #[arg(long, default_value_t = false)]
    save_volumes: bool,
}

#[derive(Args)]
struct BuildGraphArgs {
    /// Input VOX1 volume.
    #[arg(long)]
    input: PathBuf,

    /// Output BGR1 graph.
    #[arg(long)]
    out: PathBuf,

    /// Correlation threshold; edges keep r > tau (signed).
    #[arg(long, default_value_t = 0.9)]
    tau: f64,

    /// Tile edge length of the blocked kernel.
    #[arg(long, default_value_t = 512)]
    tile: usize,

    /// Dead-voxel population-variance threshold.
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,

    /// Optional MSK1 voxel mask.
    #[arg(long)]
    mask: Option<PathBuf>,

    /// Emit a JSON-lines stats record to stdout.
    #[arg(long, default_value_t = false)]
    stats: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Input BGR1 graph.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest (path<TAB>label lines).
    #[arg(long)]
    manifest: PathBuf,

    /// Architecture: ffn, gcn, gat, or gcrn.
    #[arg(long)]
    arch: String,

    /// Learning-rate grid.
    #[arg(long, value_delimiter = ',', required = true)]
    lr: Vec<f64>,

    /// Batch-size grid.
    #[arg(long, value_delimiter = ',', required = true)]
    batch: Vec<usize>,

    /// Hidden-unit grid.
    #[arg(long, value_delimiter = ',', required = true)]
    hidden: Vec<usize>,

    /// Training epochs per grid cell.
    #[arg(long, default_value_t = 100)]
    epochs: usize,

    /// Message-passing layers (GCN/GAT).
    #[arg(long, default_value_t = 2)]
    mp_layers: usize,

    /// Attention heads (GAT).
    #[arg(long, default_value_t = 4)]
    heads: usize,

    /// Results JSON path.
    #[arg(long)]
    out: PathBuf,

    /// Optional MDL1 checkpoint of the winning model.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// MDL1 checkpoint.
    #[arg(long)]
    model: PathBuf,

    /// Dataset manifest to evaluate on.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Synthetic voxel count.
    #[arg(long, default_value_t = 20_000)]
    voxels: usize,

    /// Time steps per voxel.
    #[arg(long, default_value_t = 150)]
    t: usize,

    /// Correlation threshold.
    #[arg(long, default_value_t = 0.9)]
    tau: f64,

    /// Tile edge length.
    #[arg(long, default_value_t = 512)]
    tile: usize,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap renders usage text itself
            let _ = e.print();
            return code;
        }
    };

    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();

    let workers = match parse_workers(&cli.workers) {
        Ok(w) => w,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };

    match dispatch(&cli, workers) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn parse_workers(s: &str) -> Result<Option<usize>, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("--workers must be \"auto\" or a positive count, got {s:?}")),
        Ok(n) => Ok(Some(n)),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericFailure { .. } | Error::GridExhausted => 3,
        _ => 2,
    }
}

fn dispatch(cli: &Cli, workers: Option<usize>) -> Result<(), Error> {
    match &cli.cmd {
        Cmd::Synth(args) => cmd_synth(args, cli.seed, workers),
        Cmd::BuildGraph(args) => cmd_build_graph(args, workers),
        Cmd::Stats(args) => cmd_stats(args),
        Cmd::Train(args) => cmd_train(args, cli.seed, workers),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Bench(args) => cmd_bench(args, cli.seed, workers),
    }
}

fn cmd_synth(args: &SynthArgs, seed: u64, workers: Option<usize>) -> Result<(), Error> {
    let effect: ClassEffect = args.preset.parse()?;
    let cfg = SynthConfig {
        n_graphs: args.n,
        dims: dims_for_voxels(args.voxels)?,
        t_len: args.t,
        class_effect: effect,
        seed,
        ..Default::default()
    };
    let pcc = PccConfig::default();
    log::info!(
        "generating {} graphs of {} voxels (dims {:?}, t={}) into {}",
        cfg.n_graphs,
        cfg.voxel_count(),
        cfg.dims,
        cfg.t_len,
        args.out.display()
    );
    let ds = voxgraph_core::synth::gen_dataset(&cfg, &pcc, &args.out, workers)?;
    if args.save_volumes {
        for (idx, _) in ds.entries().iter().enumerate() {
            let class = (idx % 2) as u8;
            let vol = gen_volume(&cfg, class, idx)?;
            vol.write_file(args.out.join(format!("v{idx:04}.vox1")))?;
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "graphs": ds.entries().len(),
            "manifest": args.out.join("manifest.tsv"),
            "preset": args.preset,
            "seed": seed,
        })
    );
    Ok(())
}

fn cmd_build_graph(args: &BuildGraphArgs, workers: Option<usize>) -> Result<(), Error> {
    let vol = Volume4D::read_file(&args.input)?;
    let mask = args.mask.as_ref().map(VolumeMask::read_file).transpose()?;
    let ingest = IngestConfig {
        dead_voxel_epsilon: args.epsilon,
        mask,
    };
    let vs = extract_voxels(&vol, &ingest)?;
    log::info!(
        "{} of {} voxels retained; correlating {} pairs",
        vs.n(),
        vol.voxel_count(),
        voxgraph_core::pcc::pair_count(vs.n() as u64)
    );
    let cfg = PccConfig {
        threshold: args.tau,
        tile_size: args.tile,
        workers,
    };
    let started = std::time::Instant::now();
    let graph = correlate_all(&vs, &cfg)?;
    let wall = started.elapsed().as_secs_f64();
    graph.write_file(&args.out)?;
    if args.stats {
        let pairs = voxgraph_core::pcc::pair_count(graph.n() as u64);
        let record = CorrelateStats {
            n: graph.n(),
            edge_count: graph.edges().len(),
            mean_degree: graph.mean_degree(),
            wall_time_seconds: wall,
            pairs_per_second: pairs as f64 / wall.max(1e-9),
        };
        println!("{}", serde_json::to_string(&record).expect("serializable"));
    }
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<(), Error> {
    let graph = BrainGraph::read_file(&args.input)?;
    let report = degree_report(&graph);
    println!(
        "{}",
        serde_json::json!({
            "n": graph.n(),
            "t_len": graph.t_len(),
            "edge_count": graph.edges().len(),
            "label": graph.label(),
            "mean_degree": report.mean_degree,
            "degree_histogram": report.histogram,
        })
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, seed: u64, workers: Option<usize>) -> Result<(), Error> {
    let arch: Arch = args.arch.parse()?;
    let ds = GraphDataset::read_manifest(&args.manifest)?;
    let source = CachedSource::new(ds);
    let split_spec = SplitSpec::new(seed);
    let parts = split(&source, &split_spec)?;
    log::info!(
        "split: {} train / {} val / {} test",
        parts.train.len(),
        parts.val.len(),
        parts.test.len()
    );
    let base_spec = ModelSpec {
        arch,
        hidden_units: args.hidden[0],
        num_mp_layers: args.mp_layers,
        gat_heads: args.heads,
    };
    let grid = GridSpec {
        learning_rates: args.lr.clone(),
        batch_sizes: args.batch.clone(),
        hidden_units: args.hidden.clone(),
        epochs: args.epochs,
    };
    let (result, params) =
        grid_search_with_model(&source, &parts, arch, &base_spec, &grid, seed, workers)?;

    let json = serde_json::to_string_pretty(&result).expect("serializable");
    std::fs::write(&args.out, json).map_err(|e| Error::Io {
        source: e,
        path: Some(args.out.clone()),
    })?;
    if let Some(model_path) = &args.model_out {
        params.write_file(model_path)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "arch": arch.name(),
            "chosen": {
                "lr": result.chosen.lr,
                "batch_size": result.chosen.batch_size,
                "hidden_units": result.chosen.hidden_units,
            },
            "test_accuracy": result.test_accuracy,
            "test_f1": result.test_f1,
            "test_auroc": result.test_auroc,
            "results": args.out,
        })
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let params = ModelParams::read_file(&args.model)?;
    let ds = GraphDataset::read_manifest(&args.manifest)?;
    let mut scores = Vec::with_capacity(ds.entries().len());
    let mut labels = Vec::with_capacity(ds.entries().len());
    for i in 0..GraphSource::len(&ds) {
        let g = ds.load(i)?;
        scores.push(model_forward(&g, &params.spec, &params)?);
        labels.push(ds.label(i));
    }
    let preds: Vec<u8> = scores.iter().map(|&p| (p >= 0.5) as u8).collect();
    println!(
        "{}",
        serde_json::json!({
            "n": labels.len(),
            "arch": params.spec.arch.name(),
            "accuracy": accuracy(&preds, &labels)?,
            "f1": f1(&preds, &labels)?,
            "auroc": auroc(&scores, &labels)?,
        })
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs, seed: u64, workers: Option<usize>) -> Result<(), Error> {
    let cfg = PccConfig {
        threshold: args.tau,
        tile_size: args.tile,
        workers,
    };
    let report = bench_correlate(args.voxels, args.t, &cfg, seed)?;
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    Ok(())
}
