//! Problem registry: the twelve HPO-derived benchmark problems and the
//! synthetic problems `grid_sphere_d<N>` / `peaks_d<N>`.

use std::sync::Arc;

use super::{GridSphere, Peaks, Problem, ProblemDef};
use crate::archive::{ArchiveCell, ArchiveDim, ArchiveSpec};
use crate::error::{Error, Result};
use crate::search_space::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    Interpretability,
    ResourceUsage,
}

impl Context {
    pub fn as_str(&self) -> &'static str {
        match self {
            Context::Interpretability => "interpretability",
            Context::ResourceUsage => "resource_usage",
        }
    }
}

#[derive(Clone, Copy)]
enum Learner {
    Ranger,
    Xgboost,
}

struct Entry {
    learner: Learner,
    dataset: u32,
    context: Context,
    // (lower, upper, bins) per feature
    dims: [(f64, f64, usize); 2],
}

const fn nf_ias(learner: Learner, dataset: u32, p: usize) -> Entry {
    Entry {
        learner,
        dataset,
        context: Context::Interpretability,
        dims: [(0.0, p as f64, p + 1), (0.0, 1.0, 100)],
    }
}

const fn rm_tp(dataset: u32, rm: (f64, f64), tp: (f64, f64)) -> Entry {
    Entry {
        learner: Learner::Ranger,
        dataset,
        context: Context::ResourceUsage,
        dims: [(rm.0, rm.1, 33), (tp.0, tp.1, 33)],
    }
}

const TABLE: [Entry; 12] = [
    nf_ias(Learner::Ranger, 41146, 20),
    nf_ias(Learner::Ranger, 40981, 14),
    nf_ias(Learner::Ranger, 1489, 5),
    nf_ias(Learner::Ranger, 1067, 21),
    nf_ias(Learner::Xgboost, 41146, 20),
    nf_ias(Learner::Xgboost, 40981, 14),
    nf_ias(Learner::Xgboost, 1489, 5),
    nf_ias(Learner::Xgboost, 1067, 21),
    rm_tp(41146, (1.0, 200.0), (0.19, 4.5)),
    rm_tp(40981, (1.0, 40.0), (0.10, 0.65)),
    rm_tp(1489, (1.0, 200.0), (0.19, 4.5)),
    rm_tp(1067, (1.0, 78.0), (0.13, 1.55)),
];

impl Entry {
    fn id(&self) -> String {
        let learner = match self.learner {
            Learner::Ranger => "ranger",
            Learner::Xgboost => "xgboost",
        };
        format!("iaml_{learner}_{}/{}", self.dataset, self.context.as_str())
    }

    fn def(&self) -> ProblemDef {
        let space = match self.learner {
            Learner::Ranger => SearchSpace::ranger(),
            Learner::Xgboost => SearchSpace::xgboost(),
        };
        let feature_names = match self.context {
            Context::Interpretability => ["NF", "IAS"],
            Context::ResourceUsage => ["rammodel", "timepredict"],
        };
        ProblemDef {
            id: self.id(),
            space,
            archive: ArchiveSpec::new(
                self.dims
                    .iter()
                    .map(|&(lo, hi, bins)| ArchiveDim::new(lo, hi, bins))
                    .collect(),
            )
            .expect("registry archive is valid"),
            feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// All benchmark problems in registry order.
pub fn paper_problems() -> Vec<ProblemDef> {
    TABLE.iter().map(Entry::def).collect()
}

/// Looks up `iaml_<learner>_<dataset>/<context>`.
pub fn paper_problem(id: &str) -> Result<ProblemDef> {
    TABLE
        .iter()
        .find(|e| e.id() == id)
        .map(Entry::def)
        .ok_or_else(|| unknown(id))
}

pub const SYNTHETIC_IDS: [&str; 2] = ["grid_sphere_d<N>", "peaks_d<N>"];

enum Synthetic {
    GridSphere(GridSphere),
    Peaks(Peaks),
}

fn parse_synthetic(id: &str) -> Result<Synthetic> {
    let parse = |prefix: &str| id.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok());
    if let Some(d) = parse("grid_sphere_d") {
        Ok(Synthetic::GridSphere(GridSphere::new(d)?))
    } else if let Some(d) = parse("peaks_d") {
        Ok(Synthetic::Peaks(Peaks::new(d)?))
    } else {
        Err(unknown(id))
    }
}

fn synthetic_archive() -> ArchiveSpec {
    ArchiveSpec::unit(2, 10).expect("unit archive is valid")
}

/// Synthetic problems on `[0, 1]^N` with a 10×10 archive over the first two
/// coordinates.
pub fn synthetic_problem(id: &str) -> Result<Problem> {
    let (d, evaluator): (usize, Arc<dyn super::Evaluator>) = match parse_synthetic(id)? {
        Synthetic::GridSphere(p) => (p.dim(), Arc::new(p)),
        Synthetic::Peaks(p) => (p.dim(), Arc::new(p)),
    };
    ProblemDef {
        id: id.to_owned(),
        space: SearchSpace::unit_cube(d)?,
        archive: synthetic_archive(),
        feature_names: vec!["g_0".into(), "g_1".into()],
    }
    .bind(evaluator)
}

/// Brute-force per-niche optima of a synthetic problem: the best objective
/// over a `resolution × resolution` lattice on the feature plane, with the
/// remaining coordinates at their optimum. Cells come back in row-major
/// order; cells without a lattice point are omitted.
pub fn niche_optima(id: &str, resolution: usize) -> Result<Vec<ArchiveCell>> {
    if resolution < 2 {
        return Err(Error::usage("oracle resolution must be >= 2"));
    }
    let problem = parse_synthetic(id)?;
    let archive = synthetic_archive();
    let mut best: Vec<Option<f64>> = vec![None; archive.cells()];
    let step = (resolution - 1) as f64;
    for i in 0..resolution {
        for j in 0..resolution {
            let (g1, g2) = (i as f64 / step, j as f64 / step);
            let r = match &problem {
                Synthetic::GridSphere(p) => p.value(&p.best_at(g1, g2)),
                Synthetic::Peaks(p) => p.value(&p.best_at(g1, g2)),
            };
            let flat = archive.flat_index(&archive.bin_index(&r.features)?);
            if best[flat].is_none_or(|b| r.objective > b) {
                best[flat] = Some(r.objective);
            }
        }
    }
    Ok(best
        .into_iter()
        .enumerate()
        .filter_map(|(flat, v)| {
            v.map(|objective| ArchiveCell {
                bins: archive.unflatten(flat),
                objective,
            })
        })
        .collect())
}

/// Definition of any registered problem, synthetic or not.
pub fn lookup(id: &str) -> Result<ProblemDef> {
    match synthetic_problem(id) {
        Ok(p) => Ok(p.def),
        Err(_) => paper_problem(id),
    }
}

fn unknown(id: &str) -> Error {
    let mut ids: Vec<String> = TABLE.iter().map(Entry::id).collect();
    ids.extend(SYNTHETIC_IDS.iter().map(|s| s.to_string()));
    Error::usage(format!("unknown problem {id:?}; known problems: {}", ids.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_cell_counts() {
        let k = |id: &str| paper_problem(id).unwrap().archive.cells();
        assert_eq!(k("iaml_ranger_41146/interpretability"), 2100);
        assert_eq!(k("iaml_ranger_40981/interpretability"), 1500);
        assert_eq!(k("iaml_ranger_1489/interpretability"), 600);
        assert_eq!(k("iaml_ranger_1067/interpretability"), 2200);
        assert_eq!(k("iaml_xgboost_1489/interpretability"), 600);
        for ds in [41146, 40981, 1489, 1067] {
            assert_eq!(k(&format!("iaml_ranger_{ds}/resource_usage")), 1089);
        }
    }

    #[test]
    fn registry_ranges() {
        let p = paper_problem("iaml_ranger_1067/resource_usage").unwrap();
        let d = p.archive.dims();
        assert_eq!((d[0].lower, d[0].upper, d[0].bins), (1.0, 78.0, 33));
        assert_eq!((d[1].lower, d[1].upper, d[1].bins), (0.13, 1.55, 33));
        assert_eq!(p.feature_names, vec!["rammodel", "timepredict"]);
        let p = paper_problem("iaml_xgboost_1489/interpretability").unwrap();
        assert_eq!(p.space, SearchSpace::xgboost());
        assert_eq!(p.archive.dims()[0].upper, 5.0);
        assert_eq!(p.archive.dims()[0].bins, 6);
        assert_eq!(paper_problems().len(), 12);
    }

    #[test]
    fn unknown_id_lists_registry() {
        let err = paper_problem("iaml_foo").unwrap_err().to_string();
        assert!(err.contains("iaml_ranger_40981/interpretability"));
        assert!(synthetic_problem("grid_sphere_d2").is_err());
        assert_eq!(synthetic_problem("peaks_d6").unwrap().def.space.dim(), 6);
        assert!(lookup("grid_sphere_d6").is_ok());
    }

    #[test]
    fn grid_sphere_optima_are_one() {
        let cells = niche_optima("grid_sphere_d6", 21).unwrap();
        assert_eq!(cells.len(), 100);
        assert!(cells.iter().all(|c| c.objective == 1.0));
        assert_eq!(cells[1].bins, vec![0, 1]);
        assert!(niche_optima("grid_sphere_d6", 1).is_err());
        assert!(niche_optima("iaml_ranger_1489/interpretability", 21).is_err());
    }
}
