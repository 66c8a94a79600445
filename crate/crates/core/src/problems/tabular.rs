//! Tabular surrogate: inverse-distance weighting over the nearest stored
//! samples in genotype space.

use std::path::Path;

use super::{EvaluationResult, Evaluator};
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};

const NEIGHBOURS: usize = 5;
const EXACT_TOL: f64 = 1e-12;
const DIST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    d: usize,
    m: usize,
    genotypes: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn new(genotypes: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        if genotypes.is_empty() {
            return Err(Error::usage("sample table is empty"));
        }
        if genotypes.len() != outputs.len() {
            return Err(Error::usage("genotype and output row counts differ"));
        }
        let d = genotypes[0].len();
        let m = outputs[0].len();
        if d == 0 || m < 2 {
            return Err(Error::usage("sample table needs d >= 1 and m >= 2"));
        }
        if genotypes.iter().any(|g| g.len() != d) || outputs.iter().any(|y| y.len() != m) {
            return Err(Error::usage("ragged sample table"));
        }
        Ok(Self {
            d,
            m,
            genotypes,
            outputs,
        })
    }

    /// Reads a `g_0,…,g_{d-1},y_1,…,y_m` CSV file.
    pub fn load(path: &Path) -> Result<Self> {
        let parse = |line: u64, message: String| Error::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let mut r = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let headers = r.headers().map_err(|e| parse(1, e.to_string()))?.clone();
        let d = headers.iter().take_while(|h| h.starts_with("g_")).count();
        let m = headers.len() - d;
        for (i, h) in headers.iter().enumerate() {
            let expected = if i < d {
                format!("g_{i}")
            } else {
                format!("y_{}", i - d + 1)
            };
            if h.trim() != expected {
                return Err(parse(1, format!("header column {i} is {h:?}, expected {expected:?}")));
            }
        }
        let mut genotypes = Vec::new();
        let mut outputs = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| {
                parse(e.position().map_or(0, |p| p.line()), e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != d + m {
                return Err(parse(
                    line,
                    format!("expected {} fields, found {}", d + m, rec.len()),
                ));
            }
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse(line, e.to_string()))?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(parse(line, "non-finite value".into()));
            }
            genotypes.push(vals[..d].to_vec());
            outputs.push(vals[d..].to_vec());
        }
        Self::new(genotypes, outputs).map_err(|e| match e {
            Error::Usage(msg) => parse(1, msg),
            other => other,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn arity(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.genotypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genotypes.is_empty()
    }

    pub fn predict(&self, g: &[f64]) -> Result<EvaluationResult> {
        if g.len() != self.d {
            return Err(Error::usage(format!(
                "query has {} components, table has {}",
                g.len(),
                self.d
            )));
        }
        if let Some(i) = self
            .genotypes
            .iter()
            .position(|row| row.iter().zip(g).all(|(a, b)| (a - b).abs() <= EXACT_TOL))
        {
            return Ok(split(&self.outputs[i]));
        }
        let mut dist: Vec<(f64, usize)> = self
            .genotypes
            .iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &dist[..NEIGHBOURS.min(dist.len())];
        let weights: Vec<f64> = nearest.iter().map(|(d2, _)| 1.0 / (d2 + DIST_EPS)).collect();
        let total: f64 = weights.iter().sum();
        let mut out = vec![0.0; self.m];
        for ((_, i), w) in nearest.iter().zip(&weights) {
            for (o, y) in out.iter_mut().zip(&self.outputs[*i]) {
                *o += w / total * y;
            }
        }
        Ok(split(&out))
    }
}

fn split(y: &[f64]) -> EvaluationResult {
    EvaluationResult::new(y[0], y[1..].to_vec())
}

/// Evaluates configurations by normalizing them into the table's genotype
/// space, so integer rounding is reflected in the lookup.
#[derive(Debug, Clone)]
pub struct TabularEvaluator {
    space: SearchSpace,
    table: SampleTable,
}

impl TabularEvaluator {
    pub fn new(space: SearchSpace, table: SampleTable) -> Result<Self> {
        if space.dim() != table.dim() {
            return Err(Error::usage(format!(
                "table has {} genotype columns, search space has {} parameters",
                table.dim(),
                space.dim()
            )));
        }
        Ok(Self { space, table })
    }
}

impl Evaluator for TabularEvaluator {
    fn arity(&self) -> usize {
        self.table.arity()
    }

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        let g = self.space.normalize(config)?;
        self.table.predict(g.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn table() -> SampleTable {
        SampleTable::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0.4, 1.0], vec![0.6, 3.0]],
        )
        .unwrap()
    }

    #[test]
    fn exact_match_and_symmetric_query() {
        let t = table();
        assert_eq!(t.predict(&[1.0, 0.0]).unwrap(), EvaluationResult::new(0.6, vec![3.0]));
        let mid = t.predict(&[0.5, 0.3]).unwrap();
        assert!((mid.objective - 0.5).abs() < 1e-12);
        assert!((mid.features[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_table_is_constant() {
        let t = SampleTable::new(vec![vec![0.3]], vec![vec![0.9, 2.0, 5.0]]).unwrap();
        for q in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(t.predict(&[q]).unwrap(), EvaluationResult::new(0.9, vec![2.0, 5.0]));
        }
    }

    #[test]
    fn uses_at_most_five_neighbours() {
        // Far-away sixth row must not contribute.
        let mut g: Vec<Vec<f64>> = (0..5).map(|i| vec![0.01 * i as f64]).collect();
        g.push(vec![1.0]);
        let mut y: Vec<Vec<f64>> = (0..5).map(|_| vec![0.5, 0.0]).collect();
        y.push(vec![100.0, 0.0]);
        let t = SampleTable::new(g, y).unwrap();
        assert!((t.predict(&[0.02001]).unwrap().objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn load_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.csv");
        std::fs::write(&ok, "g_0,g_1,y_1,y_2\n0,0,0.4,1\n1,0,0.6,3\n").unwrap();
        assert_eq!(SampleTable::load(&ok).unwrap(), table());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "g_0,y_1,y_2\n").unwrap();
        assert!(matches!(SampleTable::load(&empty), Err(Error::Parse { .. })));

        let bad = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, "g_0,y_1,y_2\n0.1,0.2,0.3\n0.2,oops,0.1").unwrap();
        match SampleTable::load(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }

        let short = dir.path().join("short.csv");
        std::fs::write(&short, "g_0,y_1,y_2\n0.1,0.2\n").unwrap();
        match SampleTable::load(&short) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
