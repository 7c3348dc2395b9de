use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use graphmaps::dataset::{self, DatasetError, ExportOptions};
use graphmaps::ingest::RankMethod;
use graphmaps::layers::BuildParams;
use graphmaps::pipeline::{compile, CompileOptions};
use graphmaps::verify;

mod serve;

const EXIT_ARGS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 5;
const EXIT_VERIFY: u8 = 6;

/// Compile node-positioned graphs into zoomable, quota-bounded map datasets.
#[derive(Parser, Debug)]
#[command(name = "graphmaps", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a dataset from a DOT file.
    Build(BuildArgs),
    /// Check the quota bounds and structural invariants of a dataset.
    Verify(VerifyArgs),
    /// Validate a dataset and print per-layer statistics.
    Stats {
        dataset: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Serve a dataset (and optionally a viewer bundle) over HTTP.
    Serve {
        dataset: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory with the viewer bundle; its index.html answers `/`.
        #[arg(long)]
        viewer: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct BuildArgs {
    input: PathBuf,
    out: PathBuf,
    /// Node quota per viewport (divisible by 4).
    #[arg(long, default_value_t = 80)]
    qn: u32,
    /// Maximal-rail quota per viewport (divisible by 4).
    #[arg(long, default_value_t = 180)]
    qr: u32,
    #[arg(long, default_value = "pagerank", value_parser = ["input", "degree", "pagerank"])]
    rank: String,
    /// Initial node diameter in graph units.
    #[arg(long)]
    node_size: Option<f64>,
    /// Cost factor for routing along existing rails.
    #[arg(long, default_value_t = 0.8)]
    rail_discount: f64,
    #[arg(long, default_value_t = 24)]
    max_layers: u32,
    /// Put all remaining nodes on the last layer instead of failing at the cap.
    #[arg(long)]
    force_final_layer: bool,
    /// Seed for the fallback layout.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Lay out graphs that lack node positions.
    #[arg(long)]
    layout: bool,
    /// Hidden-node count above which a tile gets a hint raster.
    #[arg(long, default_value_t = 60)]
    threshold: usize,
    #[arg(long, default_value_t = 256)]
    tile_px: u32,
    /// Refine the triangulation for a minimum angle.
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value_t = 20.0)]
    min_angle: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Write viewport fixtures for viewer tests to this file.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    fixture_count: usize,
}

fn dataset_exit(e: &DatasetError) -> u8 {
    match e {
        DatasetError::Io { .. } | DatasetError::Png { .. } | DatasetError::NotADataset(_) => EXIT_IO,
        DatasetError::Json { .. } | DatasetError::Invalid(_) => EXIT_INPUT,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn build(a: BuildArgs) -> ExitCode {
    if a.tile_px == 0 {
        return fail(EXIT_ARGS, "tile size must be positive");
    }
    let text = match std::fs::read_to_string(&a.input) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_IO, format_args!("{}: {e}", a.input.display())),
    };
    let opts = CompileOptions {
        rank: a.rank.parse::<RankMethod>().expect("checked by clap"),
        node_size: a.node_size,
        params: BuildParams {
            qn: a.qn,
            qr: a.qr,
            rail_discount: a.rail_discount,
            max_layers: a.max_layers,
            force_final_layer: a.force_final_layer,
            min_angle: a.min_angle,
            refine: a.refine,
        },
        layout: a.layout,
        seed: a.seed,
    };
    let c = match compile(&text, &opts) {
        Ok(c) => c,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    let export = ExportOptions { threshold: a.threshold, tile_px: a.tile_px };
    let summary = match dataset::export(&c.graph, &c.set, &c.labels, &a.out, &export) {
        Ok(s) => s,
        Err(e) => return fail(dataset_exit(&e), e),
    };
    for l in &c.set.layers {
        let maximal = l.rails.iter().filter(|r| r.is_maximal()).count();
        println!(
            "layer {}: {} nodes, {} rails ({maximal} maximal){}",
            l.index,
            l.nodes.len(),
            l.rails.len(),
            if l.forced { ", forced: quotas not guaranteed" } else { "" }
        );
    }
    println!(
        "wrote {}: {} layers, {} rasters, {} bytes",
        a.out.display(),
        summary.layers,
        summary.rasters,
        summary.bytes
    );
    ExitCode::SUCCESS
}

fn run_verify(a: VerifyArgs) -> ExitCode {
    let ds = match dataset::load(&a.dataset) {
        Ok(d) => d,
        Err(e) => return fail(dataset_exit(&e), e),
    };
    let rasters = match dataset::scan_rasters(&a.dataset) {
        Ok(r) => r,
        Err(e) => return fail(dataset_exit(&e), e),
    };
    let report = verify::check_dataset(&ds, &rasters, a.samples, a.seed);
    if let Some(path) = &a.fixtures {
        let fixtures = verify::fixture_viewports(&ds.set, a.fixture_count, a.seed);
        let json = serde_json::to_vec_pretty(&fixtures).expect("serializable");
        if let Err(e) = std::fs::write(path, json) {
            return fail(EXIT_IO, format_args!("{}: {e}", path.display()));
        }
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    } else {
        println!("{report}");
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn run_stats(dir: PathBuf, json: bool) -> ExitCode {
    match dataset::stats(&dir) {
        Ok(s) if json => {
            println!("{}", serde_json::to_string_pretty(&s).expect("serializable"));
            ExitCode::SUCCESS
        }
        Ok(s) => {
            println!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(dataset_exit(&e), e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ARGS } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Build(a) => build(a),
        Command::Verify(a) => run_verify(a),
        Command::Stats { dataset, json } => run_stats(dataset, json),
        Command::Serve { dataset, port, host, viewer } => {
            if let Err(e) = dataset::load(&dataset) {
                return fail(dataset_exit(&e), e);
            }
            match serve::serve(&dataset, viewer.as_deref(), &host, port) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(EXIT_IO, e),
            }
        }
    }
}
