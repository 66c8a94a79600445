//! Black-box problems `f: Λ → ℝ^m`.
//!
//! The first output is the objective (maximized), the remaining `m − 1` are
//! feature values that place a solution in the archive.

mod external;
mod registry;
mod synthetic;
mod tabular;

use std::fmt;
use std::sync::Arc;

pub use external::{ExternalEvaluator, PROTOCOL, DEFAULT_TIMEOUT};
pub use registry::{
    lookup, niche_optima, paper_problem, paper_problems, synthetic_problem, Context, SYNTHETIC_IDS,
};
pub use synthetic::{GridSphere, Peaks};
pub use tabular::{SampleTable, TabularEvaluator};

use crate::archive::ArchiveSpec;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub objective: f64,
    pub features: Vec<f64>,
}

impl EvaluationResult {
    pub fn new(objective: f64, features: Vec<f64>) -> Self {
        Self {
            objective,
            features,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.objective.is_finite() && self.features.iter().all(|v| v.is_finite())
    }
}

pub trait Evaluator: Send + Sync {
    /// Output arity `m` (objective plus features).
    fn arity(&self) -> usize;

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult>;

    /// Whether concurrent `evaluate` calls may run in parallel.
    fn parallel_safe(&self) -> bool {
        true
    }
}

/// Problem metadata: search space, archive layout and feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    pub id: String,
    pub space: SearchSpace,
    pub archive: ArchiveSpec,
    pub feature_names: Vec<String>,
}

impl ProblemDef {
    pub fn arity(&self) -> usize {
        self.archive.n_dims() + 1
    }

    /// Attaches an evaluator, checking that its arity matches the archive.
    pub fn bind(self, evaluator: Arc<dyn Evaluator>) -> Result<Problem> {
        if evaluator.arity() != self.arity() {
            return Err(Error::usage(format!(
                "problem {} needs an evaluator with m = {} outputs, evaluator reports m = {}",
                self.id,
                self.arity(),
                evaluator.arity()
            )));
        }
        Ok(Problem {
            def: self,
            evaluator,
        })
    }
}

/// A problem bound to its evaluator.
#[derive(Clone)]
pub struct Problem {
    pub def: ProblemDef,
    pub evaluator: Arc<dyn Evaluator>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("def", &self.def).finish_non_exhaustive()
    }
}

impl Problem {
    pub fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        let r = self.evaluator.evaluate(config)?;
        if r.features.len() != self.def.archive.n_dims() {
            return Err(Error::EvaluationFault(format!(
                "evaluator returned {} features for {config}, expected {}",
                r.features.len(),
                self.def.archive.n_dims()
            )));
        }
        if !r.is_finite() {
            return Err(Error::EvaluationFault(format!(
                "non-finite result (objective {}, features {:?}) for configuration {config}",
                r.objective, r.features
            )));
        }
        Ok(r)
    }
}
