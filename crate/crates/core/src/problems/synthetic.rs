//! Synthetic problems on the identity space `[0, 1]^d` with known per-niche
//! optima. Features are the first two coordinates.

use std::f64::consts::PI;

use super::{EvaluationResult, Evaluator};
use crate::error::{Error, Result};
use crate::search_space::Configuration;

fn coords(config: &Configuration, d: usize) -> Result<Vec<f64>> {
    if config.len() != d {
        return Err(Error::usage(format!(
            "expected {d} coordinates, got {}",
            config.len()
        )));
    }
    Ok(config.iter().map(|(_, v)| v).collect())
}

/// `y = max(0, 1 − 4/(d−2) · Σ_{i≥3} (g_i − (g_1+g_2)/2)²)`; every niche attains 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSphere {
    d: usize,
}

impl GridSphere {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::usage("grid_sphere needs d >= 3"));
        }
        Ok(Self { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn value(&self, g: &[f64]) -> EvaluationResult {
        let centre = (g[0] + g[1]) / 2.0;
        let ss: f64 = g[2..].iter().map(|v| (v - centre).powi(2)).sum();
        let y = (1.0 - 4.0 / (self.d as f64 - 2.0) * ss).max(0.0);
        EvaluationResult::new(y, vec![g[0], g[1]])
    }

    /// Genotype maximizing the objective for the given features.
    pub fn best_at(&self, g1: f64, g2: f64) -> Vec<f64> {
        let mut g = vec![(g1 + g2) / 2.0; self.d];
        g[0] = g1;
        g[1] = g2;
        g
    }
}

impl Evaluator for GridSphere {
    fn arity(&self) -> usize {
        3
    }

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        Ok(self.value(&coords(config, self.d)?))
    }
}

/// `y = clamp₀¹(0.5 + 0.5 sin(3πg₁) sin(3πg₂) − Σ_{i≥3} (g_i − 0.5)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peaks {
    d: usize,
}

impl Peaks {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::usage("peaks needs d >= 2"));
        }
        Ok(Self { d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Objective with inner coordinates at their optimum.
    pub fn surface(g1: f64, g2: f64) -> f64 {
        (0.5 + 0.5 * (3.0 * PI * g1).sin() * (3.0 * PI * g2).sin()).clamp(0.0, 1.0)
    }

    pub fn value(&self, g: &[f64]) -> EvaluationResult {
        let penalty: f64 = g[2..].iter().map(|v| (v - 0.5).powi(2)).sum();
        let raw = 0.5 + 0.5 * (3.0 * PI * g[0]).sin() * (3.0 * PI * g[1]).sin() - penalty;
        EvaluationResult::new(raw.clamp(0.0, 1.0), vec![g[0], g[1]])
    }

    pub fn best_at(&self, g1: f64, g2: f64) -> Vec<f64> {
        let mut g = vec![0.5; self.d];
        g[0] = g1;
        g[1] = g2;
        g
    }
}

impl Evaluator for Peaks {
    fn arity(&self) -> usize {
        3
    }

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        Ok(self.value(&coords(config, self.d)?))
    }
}
