//! Bounded hyperparameter search spaces.
//!
//! Optimizers work on genotypes in the unit cube `[0, 1]^d`. Before a
//! configuration is evaluated it is mapped back to the original scale:
//! linearly, or through `exp` for log-scaled parameters, and integer
//! parameters are rounded (half away from zero) and clamped to their bounds.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(rename = "log", default)]
    pub log_scale: bool,
}

impl ParamDef {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind: ParamKind::Continuous,
            lower,
            upper,
            log_scale: false,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            kind: ParamKind::Integer,
            ..Self::continuous(name, lower, upper)
        }
    }

    pub fn log(mut self) -> Self {
        self.log_scale = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::usage(format!(
                "parameter {}: need finite lower < upper, got [{}, {}]",
                self.name, self.lower, self.upper
            )));
        }
        if self.log_scale && self.lower <= 0.0 {
            return Err(Error::usage(format!(
                "parameter {}: log-scaled parameters need lower > 0",
                self.name
            )));
        }
        if self.kind == ParamKind::Integer && self.upper - self.lower < 1.0 {
            return Err(Error::usage(format!(
                "parameter {}: integer range must span at least one unit",
                self.name
            )));
        }
        Ok(())
    }

    /// Maps a unit-interval coordinate to the original scale.
    pub fn denormalize(&self, g: f64) -> f64 {
        let raw = if self.log_scale {
            let (lo, hi) = (self.lower.ln(), self.upper.ln());
            (lo + g * (hi - lo)).exp()
        } else {
            self.lower + g * (self.upper - self.lower)
        };
        let raw = raw.clamp(self.lower, self.upper);
        match self.kind {
            // f64::round is half-away-from-zero.
            ParamKind::Integer => raw.round().clamp(self.lower.ceil(), self.upper.floor()),
            ParamKind::Continuous => raw,
        }
    }

    pub fn normalize(&self, value: f64) -> Result<f64> {
        if !value.is_finite() || value < self.lower || value > self.upper {
            return Err(Error::usage(format!(
                "parameter {}: value {} outside [{}, {}]",
                self.name, value, self.lower, self.upper
            )));
        }
        let g = if self.log_scale {
            let (lo, hi) = (self.lower.ln(), self.upper.ln());
            (value.ln() - lo) / (hi - lo)
        } else {
            (value - self.lower) / (self.upper - self.lower)
        };
        Ok(g.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct SearchSpace {
    params: Vec<ParamDef>,
}

#[derive(Deserialize)]
struct RawSpace {
    params: Vec<ParamDef>,
}

impl TryFrom<RawSpace> for SearchSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        SearchSpace::new(raw.params)
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamDef>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::usage("search space needs at least one parameter"));
        }
        let mut seen = HashSet::new();
        for p in &params {
            p.validate()?;
            if !seen.insert(p.name.as_str()) {
                return Err(Error::usage(format!("duplicate parameter name {}", p.name)));
            }
        }
        Ok(Self { params })
    }

    /// Identity space `g_0 … g_{d-1}` on `[0, 1]^d`, used by the synthetic problems.
    pub fn unit_cube(d: usize) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|i| ParamDef::continuous(&format!("g_{i}"), 0.0, 1.0))
                .collect(),
        )
    }

    /// Random forest (`iaml_ranger`) search space.
    pub fn ranger() -> Self {
        Self::new(vec![
            ParamDef::integer("num.trees", 1.0, 2000.0),
            ParamDef::continuous("mtry.ratio", 0.0, 1.0),
            ParamDef::integer("min.node.size", 1.0, 100.0),
            ParamDef::continuous("sample.fraction", 0.1, 1.0),
        ])
        .expect("built-in space is valid")
    }

    /// Gradient boosting (`iaml_xgboost`) search space.
    pub fn xgboost() -> Self {
        Self::new(vec![
            ParamDef::continuous("alpha", 1e-4, 1000.0).log(),
            ParamDef::continuous("lambda", 1e-4, 1000.0).log(),
            ParamDef::integer("nrounds", 3.0, 2000.0).log(),
            ParamDef::continuous("subsample", 0.1, 1.0),
            ParamDef::continuous("colsample_bylevel", 0.01, 1.0),
            ParamDef::continuous("colsample_bytree", 0.01, 1.0),
            ParamDef::continuous("eta", 1e-4, 1.0).log(),
            ParamDef::continuous("gamma", 1e-4, 7.0).log(),
            ParamDef::integer("max_depth", 1.0, 15.0),
            ParamDef::continuous("min_child_weight", std::f64::consts::E, 150.0).log(),
        ])
        .expect("built-in space is valid")
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn param(&self, name: &str) -> Option<&ParamDef> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("search space serializes")
    }

    pub fn denormalize(&self, g: &Genotype) -> Result<Configuration> {
        if g.len() != self.dim() {
            return Err(Error::usage(format!(
                "genotype has {} components, search space has {}",
                g.len(),
                self.dim()
            )));
        }
        let values = self
            .params
            .iter()
            .zip(g.as_slice())
            .map(|(p, &x)| (p.name.clone(), p.denormalize(x)))
            .collect();
        Ok(Configuration { values })
    }

    pub fn normalize(&self, c: &Configuration) -> Result<Genotype> {
        let values = self
            .params
            .iter()
            .map(|p| {
                let v = c
                    .get(&p.name)
                    .ok_or_else(|| Error::usage(format!("configuration lacks {}", p.name)))?;
                p.normalize(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Genotype(values))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Genotype {
        sample_unit(rng, self.dim())
    }
}

/// A point in the normalized unit cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Genotype(Vec<f64>);

impl Genotype {
    /// Validates that every component is a finite number in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::usage(format!("genotype component {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Componentwise clamp into `[0, 1]`. Non-finite components are an error.
pub fn clip_unit(values: &[f64]) -> Result<Genotype> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::usage(format!(
            "cannot clip non-finite genotype component {bad}"
        )));
    }
    Ok(Genotype(values.iter().map(|v| v.clamp(0.0, 1.0)).collect()))
}

pub fn sample_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Genotype {
    Genotype((0..d).map(|_| rng.random::<f64>()).collect())
}

/// Original-scale hyperparameter values keyed by parameter name, in
/// search-space order.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    values: IndexMap<String, f64>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl FromIterator<(String, f64)> for Configuration {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        Self {
            values: iter.into_iter().collect(),
        }
    }
}

// Whole numbers go out as JSON integers so evaluators see `500`, not `500.0`.
impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (k, &v) in &self.values {
            if v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 {
                map.serialize_entry(k, &(v as i64))?;
            } else {
                map.serialize_entry(k, &v)?;
            }
        }
        map.end()
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, "}}")
    }
}
