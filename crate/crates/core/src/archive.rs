//! Uniform grid archive over the behavior space.
//!
//! Each feature dimension `[lower, upper)` is cut into `bins` equally wide
//! intervals; a niche is one cell of the resulting grid and holds at most one
//! elite, the best objective seen so far. Feature values outside the range are
//! clamped into the edge bins.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search_space::{Configuration, Genotype};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchiveDim {
    pub lower: f64,
    pub upper: f64,
    pub bins: usize,
}

impl ArchiveDim {
    pub fn new(lower: f64, upper: f64, bins: usize) -> Self {
        Self { lower, upper, bins }
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower) / self.bins as f64
    }

    /// Bin of `y`, clamped into `[0, bins - 1]`.
    pub fn bin(&self, y: f64) -> usize {
        let raw = ((y - self.lower) / self.width()).floor();
        if raw <= 0.0 {
            0
        } else {
            (raw as usize).min(self.bins - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ArchiveSpec {
    dims: Vec<ArchiveDim>,
}

#[derive(Deserialize)]
struct RawSpec {
    dims: Vec<ArchiveDim>,
}

impl TryFrom<RawSpec> for ArchiveSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ArchiveSpec::new(raw.dims)
    }
}

impl ArchiveSpec {
    pub fn new(dims: Vec<ArchiveDim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::usage("archive needs at least one behavior dimension"));
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(Error::usage(format!(
                    "archive dim {i}: need finite lower < upper, got [{}, {}]",
                    d.lower, d.upper
                )));
            }
            if d.bins == 0 {
                return Err(Error::usage(format!("archive dim {i}: bins must be >= 1")));
            }
        }
        let spec = Self { dims };
        spec.checked_cells()
            .ok_or_else(|| Error::usage("archive has too many cells"))?;
        Ok(spec)
    }

    /// Shorthand for a grid of `bins` per dimension over `[0, 1]^n`.
    pub fn unit(n: usize, bins: usize) -> Result<Self> {
        Self::new(vec![ArchiveDim::new(0.0, 1.0, bins); n])
    }

    pub fn dims(&self) -> &[ArchiveDim] {
        &self.dims
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    fn checked_cells(&self) -> Option<usize> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(d.bins))
    }

    /// Total niche count `k`.
    pub fn cells(&self) -> usize {
        self.checked_cells().expect("validated at construction")
    }

    pub fn bin_index(&self, features: &[f64]) -> Result<Vec<usize>> {
        if features.len() != self.dims.len() {
            return Err(Error::usage(format!(
                "expected {} feature values, got {}",
                self.dims.len(),
                features.len()
            )));
        }
        features
            .iter()
            .zip(&self.dims)
            .map(|(&y, d)| {
                if y.is_nan() {
                    Err(Error::EvaluationFault("NaN feature value".into()))
                } else {
                    Ok(d.bin(y))
                }
            })
            .collect()
    }

    /// Row-major flat index (last dimension fastest).
    pub fn flat_index(&self, bins: &[usize]) -> usize {
        bins.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&b, d)| acc * d.bins + b)
    }

    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d.bins;
            flat /= d.bins;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub genotype: Genotype,
    pub configuration: Configuration,
    pub objective: f64,
    pub features: Vec<f64>,
    pub eval_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InsertOutcome {
    NewCell,
    Improved(f64),
    Rejected,
}

impl InsertOutcome {
    pub fn is_accepted(&self) -> bool {
        !matches!(self, InsertOutcome::Rejected)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub coverage: f64,
    pub qd_score: f64,
    pub max_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridArchive {
    spec: ArchiveSpec,
    cells: Vec<Option<Elite>>,
    // flat indices in first-occupation order; parent selection draws from here
    occupied: Vec<usize>,
}

impl GridArchive {
    pub fn new(spec: ArchiveSpec) -> Self {
        let k = spec.cells();
        Self {
            spec,
            cells: vec![None; k],
            occupied: Vec::new(),
        }
    }

    pub fn spec(&self) -> &ArchiveSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn get(&self, bins: &[usize]) -> Option<&Elite> {
        if bins.len() != self.spec.n_dims()
            || bins.iter().zip(self.spec.dims()).any(|(&b, d)| b >= d.bins)
        {
            return None;
        }
        self.cells[self.spec.flat_index(bins)].as_ref()
    }

    pub fn insert(&mut self, candidate: Elite) -> Result<InsertOutcome> {
        if !candidate.objective.is_finite() {
            return Err(Error::EvaluationFault(format!(
                "non-finite objective {}",
                candidate.objective
            )));
        }
        if let Some(bad) = candidate.features.iter().find(|y| !y.is_finite()) {
            return Err(Error::EvaluationFault(format!("non-finite feature {bad}")));
        }
        let bins = self.spec.bin_index(&candidate.features)?;
        let flat = self.spec.flat_index(&bins);
        let slot = &mut self.cells[flat];
        match slot {
            None => {
                *slot = Some(candidate);
                self.occupied.push(flat);
                Ok(InsertOutcome::NewCell)
            }
            Some(inc) if candidate.objective > inc.objective => {
                let delta = candidate.objective - inc.objective;
                *inc = candidate;
                Ok(InsertOutcome::Improved(delta))
            }
            Some(_) => Ok(InsertOutcome::Rejected),
        }
    }

    pub fn summary(&self) -> Summary {
        let mut qd_score = 0.0;
        let mut max_objective: Option<f64> = None;
        for e in self.elites() {
            qd_score += e.objective;
            max_objective = Some(max_objective.map_or(e.objective, |m| m.max(e.objective)));
        }
        Summary {
            coverage: self.len() as f64 / self.cells.len() as f64,
            qd_score,
            max_objective,
        }
    }

    /// Elites in first-occupation order.
    pub fn elites(&self) -> impl Iterator<Item = &Elite> {
        self.occupied
            .iter()
            .map(|&i| self.cells[i].as_ref().expect("occupied cell"))
    }

    /// `(bin tuple, elite)` pairs sorted lexicographically by bin tuple.
    pub fn sorted_cells(&self) -> Vec<(Vec<usize>, &Elite)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|e| (self.spec.unflatten(i), e)))
            .collect()
    }

    pub fn random_elite<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<&Elite> {
        if self.occupied.is_empty() {
            return None;
        }
        let i = self.occupied[rng.random_range(0..self.occupied.len())];
        self.cells[i].as_ref()
    }

    /// Writes the archive CSV: bins, features, objective, eval index, genotype
    /// and configuration columns; one row per occupied cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let n = self.spec.n_dims();
        let first = self.elites().next();
        let d = first.map_or(0, |e| e.genotype.len());
        let names: Vec<String> = first
            .map(|e| e.configuration.iter().map(|(k, _)| k.to_owned()).collect())
            .unwrap_or_default();
        let mut header: Vec<String> = (0..n).map(|i| format!("bin_{i}")).collect();
        header.extend((0..n).map(|i| format!("feat_{i}")));
        header.push("objective".into());
        header.push("eval_index".into());
        header.extend((0..d).map(|i| format!("g_{i}")));
        header.extend(names);
        w.write_record(&header).map_err(csv_err)?;
        for (bins, e) in self.sorted_cells() {
            let mut row: Vec<String> = bins.iter().map(|b| b.to_string()).collect();
            row.extend(e.features.iter().map(|v| v.to_string()));
            row.push(e.objective.to_string());
            row.push(e.eval_index.to_string());
            row.extend(e.genotype.as_slice().iter().map(|v| v.to_string()));
            row.extend(e.configuration.iter().map(|(_, v)| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<archive csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

/// One occupied cell read back from an archive CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveCell {
    pub bins: Vec<usize>,
    pub objective: f64,
}

/// Reads the bin and objective columns of an archive CSV.
pub fn read_archive_cells(path: &Path) -> Result<Vec<ArchiveCell>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let headers = r
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let bin_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("bin_"))
        .map(|(i, _)| i)
        .collect();
    let obj_col = headers
        .iter()
        .position(|h| h == "objective")
        .ok_or_else(|| parse_err(path, 1, "missing objective column".into()))?;
    if bin_cols.is_empty() {
        return Err(parse_err(path, 1, "no bin_* columns".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        let bins = bin_cols
            .iter()
            .map(|&c| rec[c].parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        let objective = rec[obj_col]
            .parse::<f64>()
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(ArchiveCell { bins, objective });
    }
    Ok(out)
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message,
    }
}
