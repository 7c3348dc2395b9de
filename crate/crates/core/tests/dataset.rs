use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use graphmaps::dataset::{
    export, load, scan_rasters, stats, tile_path, DatasetError, ExportOptions, NodeRecord, RailRecord, HINT_ALPHA,
};
use graphmaps::pipeline::{compile, CompileOptions, Compiled};
use graphmaps::verify::check_dataset;

const ABSTRACT: &str = include_str!("data/abstract.dot");

fn abstract_compiled() -> Compiled {
    compile(ABSTRACT, &CompileOptions { layout: true, seed: 1, ..Default::default() }).unwrap()
}

fn write(c: &Compiled, dir: &Path, opts: &ExportOptions) {
    export(&c.graph, &c.set, &c.labels, dir, opts).unwrap();
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// A grid of positioned nodes with a path through them.
fn grid_dot(side: usize, color: Option<&str>) -> String {
    let mut s = String::from("graph g {\n");
    for k in 0..side * side {
        let (x, y) = ((k % side) as f64 * 10.0, (k / side) as f64 * 10.0);
        let extra = color.map(|c| format!(", fillcolor=\"{c}\"")).unwrap_or_default();
        s += &format!("  n{k} [pos=\"{x},{y}\"{extra}];\n");
    }
    for k in 1..side * side {
        s += &format!("  n{} -- n{k};\n", k - 1);
    }
    s + "}\n"
}

#[test]
fn round_trip_is_exact() {
    let c = abstract_compiled();
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions::default());
    let ds = load(dir.path()).unwrap();
    assert_eq!(ds.set, c.set);
    assert_eq!(ds.labels, c.labels);
    assert_eq!(ds.meta.layer_count, 3);
    assert_eq!(ds.meta.node_count, 47);
    assert!(ds.meta.rasters.is_empty());
    for (k, layer) in c.set.layers.iter().enumerate() {
        let text = fs::read_to_string(dir.path().join(format!("layers/{k}/nodes.json"))).unwrap();
        let nodes: Vec<NodeRecord> = serde_json::from_str(&text).unwrap();
        assert_eq!(nodes.len(), layer.nodes.len());
        for r in &nodes {
            assert_eq!(r.x.to_bits(), c.set.positions[r.index].x.to_bits());
            assert_eq!(r.y.to_bits(), c.set.positions[r.index].y.to_bits());
            assert!(r.z <= (1u64 << k) as f64);
        }
    }
    let report = check_dataset(&ds, &scan_rasters(dir.path()).unwrap(), 2000, 3);
    assert!(report.passed(), "{report}");
}

#[test]
fn tampered_rail_zoom_is_rejected() {
    let c = abstract_compiled();
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions::default());
    let path = dir.path().join("layers/1/rails.json");
    let mut rails: Vec<RailRecord> = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    rails[0].z = 3.0;
    fs::write(&path, serde_json::to_vec(&rails).unwrap()).unwrap();
    let err = load(dir.path()).unwrap_err();
    assert!(err.to_string().contains("z not power of two"), "{err}");
}

#[test]
fn missing_raster_is_rejected() {
    let c = compile(&grid_dot(12, None), &CompileOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions { threshold: 0, tile_px: 16 });
    let meta = load(dir.path()).unwrap().meta;
    let [n, i, j] = meta.rasters[0];
    fs::remove_file(tile_path(dir.path(), n as u32, i, j)).unwrap();
    assert!(matches!(load(dir.path()), Err(DatasetError::Invalid(_))));
}

#[test]
fn threshold_zero_rasterizes_every_tile_with_hidden_nodes() {
    let c = compile(&grid_dot(12, Some("#ff0000")), &CompileOptions::default()).unwrap();
    let set = &c.set;
    assert!(set.layers.len() > 1);
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions { threshold: 0, tile_px: 32 });

    // independent count: floor of the offset over the tile size, clamped
    // into the box
    let mut expect = Vec::new();
    for n in 0..set.layers.len() as u32 {
        let tiles = 1i64 << n;
        let (w, h) = (set.bbox.width() / tiles as f64, set.bbox.height() / tiles as f64);
        let mut seen = std::collections::BTreeSet::new();
        for (v, p) in set.positions.iter().enumerate() {
            if set.layer_of[v] > n {
                let i = (((p.x - set.bbox.min_x) / w).floor() as i64).clamp(0, tiles - 1);
                let j = (((p.y - set.bbox.min_y) / h).floor() as i64).clamp(0, tiles - 1);
                seen.insert([n as i64, i, j]);
            }
        }
        expect.extend(seen);
    }
    let ds = load(dir.path()).unwrap();
    assert_eq!(ds.meta.rasters, expect);
    assert_eq!(scan_rasters(dir.path()).unwrap(), expect);
    assert_eq!(ds.nodes.iter().filter(|r| r.color.as_deref() == Some("#ff0000")).count(), ds.nodes.len());

    let [n, i, j] = expect[0];
    let bytes = fs::read(tile_path(dir.path(), n as u32, i, j)).unwrap();
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    assert_eq!((info.width, info.height), (32, 32));
    assert_eq!(info.color_type, png::ColorType::Rgba);
    let opaque: Vec<&[u8]> = buf.chunks(4).filter(|p| p[3] > 0).collect();
    assert!(!opaque.is_empty());
    assert!(opaque.iter().all(|p| p[0] == 255 && p[1] == 0 && p[2] == 0 && p[3] >= HINT_ALPHA));

    let st = stats(dir.path()).unwrap();
    assert_eq!(st.rasters, expect.len());
    assert!(st.within_quotas());
}

#[test]
fn two_node_graph_stats() {
    let dot = r#"graph { a [pos="0,0"]; b [pos="30,40"]; a -- b; }"#;
    let c = compile(dot, &CompileOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions::default());
    let st = stats(dir.path()).unwrap();
    assert_eq!(st.layers.len(), 1);
    assert_eq!(st.nodes, 2);
    assert_eq!(st.edges, 1);
    assert_eq!(st.rasters, 0);
    assert_eq!(st.layers[0].max_tile_nodes, 2);
}

#[test]
fn abstract_stats() {
    let c = abstract_compiled();
    let dir = tempfile::tempdir().unwrap();
    write(&c, dir.path(), &ExportOptions::default());
    let st = stats(dir.path()).unwrap();
    assert_eq!(st.layers.len(), 3);
    assert_eq!(st.rasters, 0);
    assert!(st.layers[0].max_tile_nodes <= 20);
    assert!(st.within_quotas());
    assert!(st.to_string().contains("layer 2: 47 nodes"));
}

#[test]
fn exports_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let dot = grid_dot(10, None);
    let opts = ExportOptions { threshold: 4, tile_px: 64 };
    write(&compile(&dot, &CompileOptions::default()).unwrap(), a.path(), &opts);
    write(&compile(&dot, &CompileOptions::default()).unwrap(), b.path(), &opts);
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.keys().any(|p| p.extension().is_some_and(|e| e == "png")));
    assert_eq!(fa, fb);
}

#[test]
fn export_refuses_foreign_directories_and_replaces_datasets() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("notes.txt"), "keep me").unwrap();
    let c = abstract_compiled();
    assert!(matches!(
        export(&c.graph, &c.set, &c.labels, dir.path(), &ExportOptions::default()),
        Err(DatasetError::NotADataset(_))
    ));
    assert!(dir.path().join("notes.txt").exists());

    let out = tempfile::tempdir().unwrap();
    let grid = compile(&grid_dot(12, None), &CompileOptions::default()).unwrap();
    write(&grid, out.path(), &ExportOptions { threshold: 0, tile_px: 16 });
    assert!(out.path().join("tiles").exists());
    write(&c, out.path(), &ExportOptions::default());
    assert!(!out.path().join("tiles").exists());
    assert_eq!(load(out.path()).unwrap().set, c.set);
}
