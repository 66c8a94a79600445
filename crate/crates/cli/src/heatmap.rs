use std::path::{Path, PathBuf};

use clap::Args;
use qdo_core::archive::{read_archive_cells, ArchiveSpec};
use qdo_core::problems;
use qdo_core::reporting::heatmap::{render, HeatmapStyle};
use qdo_core::{Error, Result};

#[derive(Args)]
pub struct HeatmapArgs {
    /// Archive CSV written by `qdo run`.
    #[arg(long)]
    archive: PathBuf,
    /// SVG output; the value matrix goes next to it with a .csv extension.
    #[arg(long)]
    out: PathBuf,
    /// Fixed color range `lo:hi` instead of the archive's own min/max.
    #[arg(long, value_parser = parse_range)]
    range: Option<(f64, f64)>,
    /// Problem id giving the grid shape.
    #[arg(long, conflicts_with = "spec")]
    problem: Option<String>,
    /// Run manifest giving the grid shape; defaults to run_config.json
    /// beside the archive.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Pixel size of one cell.
    #[arg(long, default_value_t = 8)]
    cell_px: usize,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err("need finite lo < hi".into());
    }
    Ok((lo, hi))
}

fn archive_from_manifest(path: &Path) -> Result<ArchiveSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let archive = value
        .get("archive")
        .ok_or_else(|| Error::Usage(format!("{} has no archive field", path.display())))?;
    Ok(serde_json::from_value(archive.clone())?)
}

fn grid(args: &HeatmapArgs) -> Result<ArchiveSpec> {
    if let Some(id) = &args.problem {
        return Ok(problems::lookup(id)?.archive);
    }
    let manifest = match &args.spec {
        Some(p) => p.clone(),
        None => args
            .archive
            .parent()
            .unwrap_or(Path::new("."))
            .join("run_config.json"),
    };
    if args.spec.is_none() && !manifest.exists() {
        return Err(Error::Usage(format!(
            "cannot tell the grid shape: {} not found; pass --problem or --spec",
            manifest.display()
        )));
    }
    archive_from_manifest(&manifest)
}

pub fn matrix_path(out: &Path) -> PathBuf {
    let p = out.with_extension("csv");
    if p == out {
        out.with_extension("matrix.csv")
    } else {
        p
    }
}

pub fn heatmap(args: &HeatmapArgs) -> Result<()> {
    let spec = grid(args)?;
    let bins: Vec<usize> = spec.dims().iter().map(|d| d.bins).collect();
    let cells = read_archive_cells(&args.archive)?;
    let style = HeatmapStyle {
        cell_px: args.cell_px,
        range: args.range,
    };
    let h = render(&bins, &cells, &style)?;
    let write = |path: &Path, text: &str| {
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    };
    write(&args.out, &h.svg)?;
    write(&matrix_path(&args.out), &h.matrix_csv)
}
