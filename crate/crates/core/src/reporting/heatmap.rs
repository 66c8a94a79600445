//! Archive heatmaps as SVG plus a companion value matrix.
//!
//! The first behavior dimension runs left to right, the second bottom to top.
//! Occupied cells are colored on a black → purple → orange → pale yellow ramp
//! scaled to the objective range; empty cells show the background.

use std::fmt::Write as _;

use crate::archive::{ArchiveCell, GridArchive};
use crate::error::{Error, Result};

const BACKGROUND: &str = "#bdbdbd";

// Inferno-like control points.
const RAMP: [(f64, [f64; 3]); 5] = [
    (0.0, [0.0, 0.0, 4.0]),
    (0.25, [87.0, 16.0, 110.0]),
    (0.5, [188.0, 55.0, 84.0]),
    (0.75, [249.0, 142.0, 9.0]),
    (1.0, [252.0, 255.0, 164.0]),
];

/// Color for `t ∈ [0, 1]` as `#rrggbb`.
pub fn ramp_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
    let k = RAMP
        .windows(2)
        .position(|w| t <= w[1].0)
        .unwrap_or(RAMP.len() - 2);
    let (t0, c0) = RAMP[k];
    let (t1, c1) = RAMP[k + 1];
    let u = (t - t0) / (t1 - t0);
    let ch = |i: usize| (c0[i] + u * (c1[i] - c0[i])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapStyle {
    pub cell_px: usize,
    /// Fixed color range; `None` uses the objectives' own min/max.
    pub range: Option<(f64, f64)>,
}

impl Default for HeatmapStyle {
    fn default() -> Self {
        Self {
            cell_px: 8,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub svg: String,
    pub matrix_csv: String,
}

/// Value grid indexed `[row][col]`, row 0 at the top (highest second-dim bin).
pub fn matrix(bins: &[usize], cells: &[ArchiveCell]) -> Result<Vec<Vec<Option<f64>>>> {
    let (cols, rows) = match *bins {
        [c] => (c, 1),
        [c, r] => (c, r),
        _ => {
            return Err(Error::usage(format!(
                "heatmaps need a 1- or 2-dimensional archive, got {} dimensions",
                bins.len()
            )))
        }
    };
    let mut grid = vec![vec![None; cols]; rows];
    for cell in cells {
        if cell.bins.len() != bins.len() || cell.bins.iter().zip(bins).any(|(b, n)| b >= n) {
            return Err(Error::usage(format!("cell {:?} outside grid {bins:?}", cell.bins)));
        }
        let col = cell.bins[0];
        let row = rows - 1 - cell.bins.get(1).copied().unwrap_or(0);
        grid[row][col] = Some(cell.objective);
    }
    Ok(grid)
}

pub fn render(bins: &[usize], cells: &[ArchiveCell], style: &HeatmapStyle) -> Result<Heatmap> {
    let grid = matrix(bins, cells)?;
    let rows = grid.len();
    let cols = grid[0].len();
    let (lo, hi) = match style.range {
        Some(r) => r,
        None => cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| {
            (a.min(c.objective), b.max(c.objective))
        }),
    };
    let px = style.cell_px.max(1);
    let (w, h) = (cols * px, rows * px);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="{BACKGROUND}"/>"#);
    for (r, row) in grid.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if let Some(v) = v {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
                let _ = writeln!(
                    svg,
                    r#"<rect x="{}" y="{}" width="{px}" height="{px}" fill="{}"><title>{c},{} {v}</title></rect>"#,
                    c * px,
                    r * px,
                    ramp_color(t),
                    rows - 1 - r,
                );
            }
        }
    }
    svg.push_str("</svg>\n");

    let mut csv = String::new();
    for row in &grid {
        let line: Vec<String> = row
            .iter()
            .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
            .collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    Ok(Heatmap {
        svg,
        matrix_csv: csv,
    })
}

pub fn render_archive(archive: &GridArchive, style: &HeatmapStyle) -> Result<Heatmap> {
    let bins: Vec<usize> = archive.spec().dims().iter().map(|d| d.bins).collect();
    let cells: Vec<ArchiveCell> = archive
        .sorted_cells()
        .into_iter()
        .map(|(bins, e)| ArchiveCell {
            bins,
            objective: e.objective,
        })
        .collect();
    render(&bins, &cells, style)
}
