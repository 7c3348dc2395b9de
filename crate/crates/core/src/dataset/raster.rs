//! Hint rasters: translucent disks for nodes that are not yet shown.

use crate::geometry::{Point, Rect};
use crate::layers::TileGrid;

pub const HINT_ALPHA: u8 = 102;
pub const DEFAULT_COLOR: [u8; 3] = [70, 110, 160];

/// One tile to render: `(level, i, j)` and the nodes whose centers it holds.
#[derive(Clone, Debug, PartialEq)]
pub struct HintTile {
    pub level: u32,
    pub i: i64,
    pub j: i64,
    pub nodes: Vec<usize>,
}

/// The tile of `level` holding `p`. Tiles are half-open inside `B`; points
/// on or beyond an edge of `B` go to the nearest border tile, so every point
/// has exactly one tile per level.
pub fn tile_of(bbox: &Rect, level: u32, p: Point) -> (i64, i64) {
    let (mut i, mut j) = (0i64, 0i64);
    for m in 1..=level {
        let mid = TileGrid::new(bbox, m).tile(2 * i + 1, 2 * j + 1).min();
        i = 2 * i + i64::from(p.x >= mid.x);
        j = 2 * j + i64::from(p.y >= mid.y);
    }
    (i, j)
}

/// Tiles `T_ij^n`, `n < levels`, holding more than `threshold` centers of
/// nodes outside `L_n`, with membership as in [`tile_of`]. Walks the
/// quadtree from the root and hands each child the part of its parent's
/// set that lies in it, so each node is visited once per level. Sets shrink
/// going down, so a tile at or below the threshold prunes its subtree.
pub fn hint_tiles(bbox: &Rect, positions: &[Point], layer_of: &[u32], levels: u32, threshold: usize) -> Vec<HintTile> {
    let mut out = Vec::new();
    let root: Vec<usize> = (0..positions.len()).collect();
    let mut stack = vec![(0u32, 0i64, 0i64, root)];
    while let Some((n, i, j, nodes)) = stack.pop() {
        if n >= levels {
            continue;
        }
        let hidden: Vec<usize> = nodes.into_iter().filter(|&v| layer_of[v] > n).collect();
        if hidden.len() <= threshold {
            continue;
        }
        let mid = TileGrid::new(bbox, n + 1).tile(2 * i + 1, 2 * j + 1).min();
        let mut children: [Vec<usize>; 4] = Default::default();
        for &v in &hidden {
            let p = positions[v];
            children[usize::from(p.x >= mid.x) | usize::from(p.y >= mid.y) << 1].push(v);
        }
        out.push(HintTile { level: n, i, j, nodes: hidden });
        for (k, c) in children.into_iter().enumerate().rev() {
            stack.push((n + 1, 2 * i + (k as i64 & 1), 2 * j + (k as i64 >> 1), c));
        }
    }
    out.sort_by_key(|t| (t.level, t.i, t.j));
    out
}

/// Parse `#rrggbb`.
pub fn parse_color(s: &str) -> Option<[u8; 3]> {
    let h = s.strip_prefix('#')?;
    if h.len() != 6 || !h.is_ascii() {
        return None;
    }
    let c = |k: usize| u8::from_str_radix(&h[k..k + 2], 16).ok();
    Some([c(0)?, c(2)?, c(4)?])
}

/// Straight RGBA pixels of `tile`, top row first, with each node drawn as a
/// disk of `radius` graph units composited over the previous ones.
pub fn render_tile(tile: &Rect, px: u32, centers: &[(Point, [u8; 3])], radius: f64) -> Vec<u8> {
    let mut buf = vec![0u8; (px * px * 4) as usize];
    let sx = px as f64 / tile.width();
    let sy = px as f64 / tile.height();
    let a = HINT_ALPHA as f64 / 255.0;
    for &(c, rgb) in centers {
        let (cx, cy) = ((c.x - tile.min_x) * sx, (tile.max_y - c.y) * sy);
        let (rx, ry) = ((radius * sx).max(0.75), (radius * sy).max(0.75));
        let c0 = ((cx - rx).floor().max(0.0)) as u32;
        let c1 = ((cx + rx).ceil().min(px as f64)) as u32;
        let r0 = ((cy - ry).floor().max(0.0)) as u32;
        let r1 = ((cy + ry).ceil().min(px as f64)) as u32;
        for row in r0..r1 {
            for col in c0..c1 {
                let dx = (col as f64 + 0.5 - cx) / rx;
                let dy = (row as f64 + 0.5 - cy) / ry;
                if dx * dx + dy * dy > 1.0 {
                    continue;
                }
                let k = ((row * px + col) * 4) as usize;
                let da = buf[k + 3] as f64 / 255.0;
                let oa = a + da * (1.0 - a);
                for ch in 0..3 {
                    let src = rgb[ch] as f64;
                    let dst = buf[k + ch] as f64;
                    buf[k + ch] = ((src * a + dst * da * (1.0 - a)) / oa).round() as u8;
                }
                buf[k + 3] = (oa * 255.0).round() as u8;
            }
        }
    }
    buf
}

pub fn encode_png(rgba: &[u8], px: u32) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, px, px);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header()?;
        w.write_image_data(rgba)?;
    }
    Ok(out)
}
