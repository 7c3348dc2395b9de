//! On-disk dataset: JSON vector files per layer plus PNG hint tiles.
//!
//! ```text
//! meta.json                 bounding box, quotas, radii, tile grid, rasters
//! edges.json                graph edges with their route terminals
//! labels.json               label plan
//! layers/<n>/nodes.json     nodes of layer n with their stubs
//! layers/<n>/rails.json     rails of layer n
//! tiles/<n>/<i>_<j>.png     hint raster of tile (n, i, j)
//! ```

mod raster;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use raster::{encode_png, hint_tiles, parse_color, render_tile, tile_of, HintTile, DEFAULT_COLOR, HINT_ALPHA};

use crate::geometry::{Point, Rect};
use crate::ingest::RankedGraph;
use crate::labeling::LabelPlan;
use crate::layers::{BuildParams, Layer, LayerSet, Rail};
use crate::verify::tile_crowding;

pub const FORMAT: &str = "graphmaps-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Png { path: PathBuf, source: png::EncodingError },
    #[error("{0} exists and is not a dataset directory")]
    NotADataset(PathBuf),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportOptions {
    /// A tile gets a raster when it holds more than this many hidden nodes.
    pub threshold: usize,
    pub tile_px: u32,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { threshold: 60, tile_px: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileGridSpec {
    /// Tile `(n, i, j)` spans `origin + (i, j) * (width, height) / 2^n`.
    pub origin: Point,
    pub width: f64,
    pub height: f64,
    pub tile_px: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub format: String,
    pub version: u32,
    pub bbox: Rect,
    pub layer_count: u32,
    pub node_count: usize,
    pub edge_count: usize,
    pub qn: u32,
    pub qr: u32,
    pub rail_discount: f64,
    pub max_layers: u32,
    pub force_final_layer: bool,
    pub min_angle: f64,
    pub refine: bool,
    pub forced_layer: Option<u32>,
    /// Node radius of each layer.
    pub node_radius: Vec<f64>,
    pub tile_grid: TileGridSpec,
    pub hint_threshold: usize,
    /// Node indices, most important first.
    pub order: Vec<usize>,
    /// `[n, i, j]` of every raster under `tiles/`, sorted.
    pub rasters: Vec<[i64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub index: usize,
    pub id: String,
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// `z(v)`, a power of two.
    pub z: f64,
    pub layer: u32,
    pub color: Option<String>,
    /// Ends of the segments from the center drawn as part of the node.
    pub stubs: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RailRecord {
    pub id: usize,
    pub a: Point,
    pub b: Point,
    pub z: f64,
    pub edges: Vec<usize>,
    pub source: Option<usize>,
    /// Id of the maximal rail containing this one (itself when maximal).
    pub maximal: usize,
    /// The most important edge routed through the rail.
    pub top_edge: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: usize,
    pub source: usize,
    pub target: usize,
    /// Where the route leaves the source and enters the target.
    pub terminals: [Point; 2],
}

/// A dataset read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: Meta,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub set: LayerSet,
    pub labels: LabelPlan,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<u64, DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let bytes = serde_json::to_vec(value).map_err(|source| DatasetError::Json { path: path.into(), source })?;
    fs::write(path, &bytes).map_err(io_err(path))?;
    Ok(bytes.len() as u64)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| DatasetError::Json { path: path.into(), source })
}

pub fn tile_path(dir: &Path, n: u32, i: i64, j: i64) -> PathBuf {
    dir.join("tiles").join(n.to_string()).join(format!("{i}_{j}.png"))
}

fn node_color(graph: &RankedGraph, v: usize) -> Option<String> {
    let attrs = &graph.nodes[v].attrs;
    ["fillcolor", "color"].iter().filter_map(|k| attrs.get(*k)).find(|c| parse_color(c).is_some()).cloned()
}

/// Output of [`export`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub layers: usize,
    pub rasters: usize,
    pub bytes: u64,
}

/// Write the dataset for `set` into `dir`. An existing dataset in `dir` is
/// replaced; any other non-empty directory is refused.
pub fn export(
    graph: &RankedGraph,
    set: &LayerSet,
    labels: &LabelPlan,
    dir: &Path,
    opts: &ExportOptions,
) -> Result<ExportSummary, DatasetError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(io_err(dir))?;
        let empty = entries.next().is_none();
        if !empty && !dir.join("meta.json").is_file() {
            return Err(DatasetError::NotADataset(dir.into()));
        }
        for sub in ["layers", "tiles"] {
            let p = dir.join(sub);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(io_err(&p))?;
            }
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let rank = set.rank_of();
    let colors: Vec<Option<String>> = (0..graph.len()).map(|v| node_color(graph, v)).collect();
    let mut bytes = 0;

    for layer in &set.layers {
        let ldir = dir.join("layers").join(layer.index.to_string());
        let nodes: Vec<NodeRecord> = layer
            .nodes
            .iter()
            .zip(&layer.stubs)
            .map(|(&v, stubs)| NodeRecord {
                index: v,
                id: graph.nodes[v].id.clone(),
                label: graph.nodes[v].label.clone(),
                x: set.positions[v].x,
                y: set.positions[v].y,
                z: set.z(v),
                layer: set.layer_of[v],
                color: colors[v].clone(),
                stubs: stubs.clone(),
            })
            .collect();
        bytes += write_json(&ldir.join("nodes.json"), &nodes)?;
        let rails: Vec<RailRecord> = layer
            .rails
            .iter()
            .map(|r| RailRecord {
                id: r.id,
                a: r.a,
                b: r.b,
                z: r.z(),
                edges: r.edges.clone(),
                source: r.source,
                maximal: r.maximal_id(),
                top_edge: set.top_edge(&rank, &r.edges),
            })
            .collect();
        bytes += write_json(&ldir.join("rails.json"), &rails)?;
    }

    let edges: Vec<EdgeRecord> = set
        .edges
        .iter()
        .enumerate()
        .map(|(id, &(source, target))| EdgeRecord {
            id,
            source,
            target,
            terminals: [set.terminals[id].0, set.terminals[id].1],
        })
        .collect();
    bytes += write_json(&dir.join("edges.json"), &edges)?;
    bytes += write_json(&dir.join("labels.json"), labels)?;

    let levels = set.layers.len() as u32;
    let tiles = hint_tiles(&set.bbox, &set.positions, &set.layer_of, levels, opts.threshold);
    for t in &tiles {
        let grid = crate::layers::TileGrid::new(&set.bbox, t.level);
        let rect = grid.tile(t.i, t.j);
        let radius = set.layers[t.level as usize].node_radius;
        let centers: Vec<(Point, [u8; 3])> = t
            .nodes
            .iter()
            .map(|&v| (set.positions[v], colors[v].as_deref().and_then(parse_color).unwrap_or(DEFAULT_COLOR)))
            .collect();
        let rgba = render_tile(&rect, opts.tile_px, &centers, radius);
        let path = tile_path(dir, t.level, t.i, t.j);
        let png = encode_png(&rgba, opts.tile_px).map_err(|source| DatasetError::Png { path: path.clone(), source })?;
        let parent = path.parent().expect("tile dir");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        fs::write(&path, &png).map_err(io_err(&path))?;
        bytes += png.len() as u64;
    }

    let p = &set.params;
    let meta = Meta {
        format: FORMAT.into(),
        version: FORMAT_VERSION,
        bbox: set.bbox,
        layer_count: levels,
        node_count: set.positions.len(),
        edge_count: set.edges.len(),
        qn: p.qn,
        qr: p.qr,
        rail_discount: p.rail_discount,
        max_layers: p.max_layers,
        force_final_layer: p.force_final_layer,
        min_angle: p.min_angle,
        refine: p.refine,
        forced_layer: set.forced_layer(),
        node_radius: set.layers.iter().map(|l| l.node_radius).collect(),
        tile_grid: TileGridSpec {
            origin: set.bbox.min(),
            width: set.bbox.width(),
            height: set.bbox.height(),
            tile_px: opts.tile_px,
        },
        hint_threshold: opts.threshold,
        order: set.order.clone(),
        rasters: tiles.iter().map(|t| [t.level as i64, t.i, t.j]).collect(),
    };
    bytes += write_json(&dir.join("meta.json"), &meta)?;
    Ok(ExportSummary { layers: set.layers.len(), rasters: tiles.len(), bytes })
}

fn invalid<T>(msg: String) -> Result<T, DatasetError> {
    Err(DatasetError::Invalid(msg))
}

fn is_power_of_two(z: f64) -> bool {
    z > 0.0 && z.is_finite() && z.log2().fract() == 0.0 && z.log2().exp2() == z
}

/// Read and validate a dataset. Validation stops at the first failure.
pub fn load(dir: &Path) -> Result<Dataset, DatasetError> {
    let meta: Meta = read_json(&dir.join("meta.json"))?;
    if meta.format != FORMAT || meta.version != FORMAT_VERSION {
        return invalid(format!("unsupported format {} version {}", meta.format, meta.version));
    }
    if meta.node_radius.len() != meta.layer_count as usize {
        return invalid("node radius count differs from layer count".into());
    }
    let edges: Vec<EdgeRecord> = read_json(&dir.join("edges.json"))?;
    let labels: LabelPlan = read_json(&dir.join("labels.json"))?;
    let n = meta.node_count;

    let mut records: Vec<Option<NodeRecord>> = vec![None; n];
    let mut layers = Vec::new();
    let mut seen_rails = HashSet::new();
    // maximal rails of this and earlier layers
    let mut maximal_ids = HashSet::new();
    for k in 0..meta.layer_count {
        let ldir = dir.join("layers").join(k.to_string());
        let nodes: Vec<NodeRecord> = read_json(&ldir.join("nodes.json"))?;
        let rails: Vec<RailRecord> = read_json(&ldir.join("rails.json"))?;
        let zk = 2f64.powi(k as i32);
        for r in &nodes {
            if r.index >= n {
                return invalid(format!("layer {k}: node index {} out of range", r.index));
            }
            if !is_power_of_two(r.z) {
                return invalid(format!("layer {k}: node {} z not power of two", r.index));
            }
            if r.z != 2f64.powi(r.layer as i32) || r.z > zk {
                return invalid(format!("layer {k}: node {} has z {} on layer with zoom {zk}", r.index, r.z));
            }
            match &records[r.index] {
                None => records[r.index] = Some(r.clone()),
                Some(prev) => {
                    if prev.x.to_bits() != r.x.to_bits() || prev.y.to_bits() != r.y.to_bits() || prev.z != r.z {
                        return invalid(format!("node {} differs between layers", r.index));
                    }
                }
            }
        }
        let mut out_rails = Vec::with_capacity(rails.len());
        maximal_ids.extend(rails.iter().filter(|r| r.maximal == r.id).map(|r| r.id));
        for r in &rails {
            if !is_power_of_two(r.z) {
                return invalid(format!("layer {k}: rail {} z not power of two", r.id));
            }
            if r.z != zk {
                return invalid(format!("layer {k}: rail {} has z {} instead of {zk}", r.id, r.z));
            }
            if !seen_rails.insert(r.id) {
                return invalid(format!("rail id {} repeated", r.id));
            }
            if let Some(&e) = r.edges.iter().find(|&&e| e >= edges.len()) {
                return invalid(format!("layer {k}: rail {} names unknown edge {e}", r.id));
            }
            if !maximal_ids.contains(&r.maximal) {
                return invalid(format!("layer {k}: rail {} has unknown maximal rail {}", r.id, r.maximal));
            }
            out_rails.push(Rail {
                id: r.id,
                a: r.a,
                b: r.b,
                layer: k,
                edges: r.edges.clone(),
                source: r.source,
                cover: (r.maximal != r.id).then_some(r.maximal),
            });
        }
        layers.push(Layer {
            index: k,
            node_radius: meta.node_radius[k as usize],
            nodes: nodes.iter().map(|r| r.index).collect(),
            stubs: nodes.iter().map(|r| r.stubs.clone()).collect(),
            rails: out_rails,
            forced: meta.forced_layer == Some(k),
        });
    }
    let nodes: Vec<NodeRecord> = records
        .into_iter()
        .enumerate()
        .map(|(v, r)| r.ok_or_else(|| DatasetError::Invalid(format!("node {v} is on no layer"))))
        .collect::<Result<_, _>>()?;
    if edges.len() != meta.edge_count || edges.iter().enumerate().any(|(i, e)| e.id != i) {
        return invalid("edge list does not match meta".into());
    }
    if edges.iter().any(|e| e.source >= n || e.target >= n) {
        return invalid("edge endpoint out of range".into());
    }
    if labels.labels.len() != n {
        return invalid(format!("{} labels for {n} nodes", labels.labels.len()));
    }
    let mut order_check = meta.order.clone();
    order_check.sort_unstable();
    if order_check != (0..n).collect::<Vec<_>>() {
        return invalid("order is not a permutation of the nodes".into());
    }
    for r in &meta.rasters {
        let path = tile_path(dir, r[0] as u32, r[1], r[2]);
        if !path.is_file() {
            return invalid(format!("missing raster {}", path.display()));
        }
    }

    let set = LayerSet {
        bbox: meta.bbox,
        params: BuildParams {
            qn: meta.qn,
            qr: meta.qr,
            rail_discount: meta.rail_discount,
            max_layers: meta.max_layers,
            force_final_layer: meta.force_final_layer,
            min_angle: meta.min_angle,
            refine: meta.refine,
        },
        positions: nodes.iter().map(|r| Point::new(r.x, r.y)).collect(),
        layer_of: nodes.iter().map(|r| r.layer).collect(),
        layers,
        terminals: edges.iter().map(|e| (e.terminals[0], e.terminals[1])).collect(),
        order: meta.order.clone(),
        edges: edges.iter().map(|e| (e.source, e.target)).collect(),
    };
    Ok(Dataset { meta, nodes, edges, set, labels })
}

/// Raster files present under `tiles/`, as sorted `[n, i, j]`.
pub fn scan_rasters(dir: &Path) -> Result<Vec<[i64; 3]>, DatasetError> {
    let root = dir.join("tiles");
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    for level in fs::read_dir(&root).map_err(io_err(&root))? {
        let level = level.map_err(io_err(&root))?;
        let Ok(n) = level.file_name().to_string_lossy().parse::<i64>() else { continue };
        let ldir = level.path();
        for f in fs::read_dir(&ldir).map_err(io_err(&ldir))? {
            let name = f.map_err(io_err(&ldir))?.file_name().to_string_lossy().into_owned();
            let Some((i, j)) = name.strip_suffix(".png").and_then(|s| s.split_once('_')) else { continue };
            if let (Ok(i), Ok(j)) = (i.parse(), j.parse()) {
                out.push([n, i, j]);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub index: u32,
    pub nodes: usize,
    pub rails: usize,
    pub maximal_rails: usize,
    pub max_tile_nodes: usize,
    pub max_tile_rails: usize,
    pub rasters: usize,
    pub forced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub nodes: usize,
    pub edges: usize,
    pub qn: u32,
    pub qr: u32,
    pub layers: Vec<LayerStats>,
    pub rasters: usize,
    /// Bytes per top-level entry of the dataset directory.
    pub bytes: BTreeMap<String, u64>,
    pub total_bytes: u64,
}

impl Stats {
    pub fn within_quotas(&self) -> bool {
        self.layers.iter().all(|l| {
            l.forced || (l.max_tile_nodes <= (self.qn / 4) as usize && l.max_tile_rails <= (self.qr / 4) as usize)
        })
    }
}

impl std::fmt::Display for Stats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{} nodes, {} edges, {} layers, {} rasters",
            self.nodes,
            self.edges,
            self.layers.len(),
            self.rasters
        )?;
        writeln!(f, "tile quotas: {} nodes, {} maximal rails", self.qn / 4, self.qr / 4)?;
        for l in &self.layers {
            writeln!(
                f,
                "layer {}: {} nodes, {} rails ({} maximal), max per tile {} nodes / {} rails, {} rasters{}",
                l.index,
                l.nodes,
                l.rails,
                l.maximal_rails,
                l.max_tile_nodes,
                l.max_tile_rails,
                l.rasters,
                if l.forced { " (forced)" } else { "" }
            )?;
        }
        write!(f, "{} bytes", self.total_bytes)
    }
}

fn dir_bytes(p: &Path) -> Result<u64, DatasetError> {
    let md = fs::metadata(p).map_err(io_err(p))?;
    if md.is_file() {
        return Ok(md.len());
    }
    let mut total = 0;
    for e in fs::read_dir(p).map_err(io_err(p))? {
        total += dir_bytes(&e.map_err(io_err(p))?.path())?;
    }
    Ok(total)
}

/// Validate the dataset in `dir` and summarize it.
pub fn stats(dir: &Path) -> Result<Stats, DatasetError> {
    let ds = load(dir)?;
    let on_disk = scan_rasters(dir)?;
    if on_disk != ds.meta.rasters {
        return invalid("raster files differ from meta.json".into());
    }
    let mut per_level: HashMap<i64, usize> = HashMap::new();
    for r in &on_disk {
        *per_level.entry(r[0]).or_default() += 1;
    }
    let layers = ds
        .set
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let c = tile_crowding(&ds.set, k, (ds.meta.qn / 4) as usize, (ds.meta.qr / 4) as usize);
            LayerStats {
                index: l.index,
                nodes: l.nodes.len(),
                rails: l.rails.len(),
                maximal_rails: l.rails.iter().filter(|r| r.is_maximal()).count(),
                max_tile_nodes: c.nodes.max,
                max_tile_rails: c.rails.max,
                rasters: per_level.get(&(k as i64)).copied().unwrap_or(0),
                forced: l.forced,
            }
        })
        .collect();
    let mut bytes = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(io_err(dir))? {
        let e = e.map_err(io_err(dir))?;
        bytes.insert(e.file_name().to_string_lossy().into_owned(), dir_bytes(&e.path())?);
    }
    Ok(Stats {
        nodes: ds.meta.node_count,
        edges: ds.meta.edge_count,
        qn: ds.meta.qn,
        qr: ds.meta.qr,
        layers,
        rasters: on_disk.len(),
        total_bytes: bytes.values().sum(),
        bytes,
    })
}
