//! (μ/μ_w, λ)-CMA-ES core.
//!
//! Parameter defaults follow Hansen's tutorial; weights, `μ_eff` and the
//! learning rates are recomputed on every update from the number of parents
//! actually supplied, so a generation with fewer selected parents than
//! `⌈λ/2⌉` still produces a proper weighted recombination.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const MIN_SIGMA: f64 = 1e-12;
const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartReason {
    NoParents,
    SigmaCollapsed,
    NonFinite,
    IllConditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmaStatus {
    Updated,
    NeedsRestart(RestartReason),
}

#[derive(Debug, Clone, PartialEq)]
struct Eigen {
    basis: DMatrix<f64>,
    // square roots of the eigenvalues of C
    scales: DVector<f64>,
}

impl Eigen {
    fn identity(n: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaEs {
    lambda: usize,
    sigma0: f64,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: u64,
    eigen: Eigen,
    eigen_stale: bool,
}

/// Recombination weights `ln(μ + 1/2) − ln i`, normalized to sum to one.
pub fn recombination_weights(mu: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

impl CmaEs {
    pub fn new(mean: Vec<f64>, sigma0: f64, lambda: usize) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::usage("CMA-ES needs dimension >= 1"));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::usage(format!("sigma0 must be positive, got {sigma0}")));
        }
        if lambda == 0 {
            return Err(Error::usage("CMA-ES population size must be >= 1"));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("CMA-ES mean must be finite"));
        }
        let n = mean.len();
        Ok(Self {
            lambda,
            sigma0,
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            eigen: Eigen::identity(n),
            eigen_stale: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn evolution_paths(&self) -> (&[f64], &[f64]) {
        (self.p_sigma.as_slice(), self.p_c.as_slice())
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Parent count used for a generation with `available` ranked parents.
    pub fn parent_count(&self, available: usize) -> usize {
        self.lambda.div_ceil(2).min(available)
    }

    /// Eigenvalues of the current covariance matrix.
    pub fn eigenvalues(&mut self) -> Vec<f64> {
        self.refresh_eigen();
        self.eigen.scales.iter().map(|s| s * s).collect()
    }

    fn refresh_eigen(&mut self) {
        if self.eigen_stale {
            self.eigen = decompose(&self.cov);
            self.eigen_stale = false;
        }
    }

    /// Draws `n` points from `N(mean, sigma² C)`, unbounded.
    pub fn ask<R: Rng + ?Sized>(&mut self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        self.refresh_eigen();
        let d = self.dim();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &self.eigen.basis * z.component_mul(&self.eigen.scales);
                (&self.mean + y * self.sigma).data.into()
            })
            .collect()
    }

    /// Updates the distribution from parents ranked best first. Only the
    /// first [`parent_count`](Self::parent_count) entries are used.
    pub fn update(&mut self, ranked: &[&[f64]]) -> Result<CmaStatus> {
        let n = self.dim();
        if let Some(bad) = ranked.iter().find(|x| x.len() != n) {
            return Err(Error::usage(format!(
                "parent has {} components, CMA-ES dimension is {n}",
                bad.len()
            )));
        }
        let mu = self.parent_count(ranked.len());
        if mu == 0 {
            return Ok(CmaStatus::NeedsRestart(RestartReason::NoParents));
        }
        self.refresh_eigen();

        let nf = n as f64;
        let weights = recombination_weights(mu);
        let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mueff + 2.0) / (nf + mueff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
        let c_mu = (1.0 - c_1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        let steps: Vec<DVector<f64>> = ranked[..mu]
            .iter()
            .map(|x| (DVector::from_column_slice(x) - &self.mean) / self.sigma)
            .collect();
        let y_w = steps
            .iter()
            .zip(&weights)
            .fold(DVector::zeros(n), |acc, (y, w)| acc + y * *w);

        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let bt_y = self.eigen.basis.transpose() * &y_w;
        let whitened = &self.eigen.basis * bt_y.component_div(&self.eigen.scales);
        self.p_sigma = &self.p_sigma * (1.0 - c_sigma)
            + whitened * (c_sigma * (2.0 - c_sigma) * mueff).sqrt();

        self.generation += 1;
        let ps_norm = self.p_sigma.norm();
        let decay = (1.0 - (1.0 - c_sigma).powf(2.0 * self.generation as f64)).sqrt();
        let h_sigma = ps_norm / decay < (1.4 + 2.0 / (nf + 1.0)) * chi_n;

        self.p_c *= 1.0 - c_c;
        if h_sigma {
            self.p_c += &y_w * (c_c * (2.0 - c_c) * mueff).sqrt();
        }
        let delta_h = if h_sigma { 0.0 } else { c_c * (2.0 - c_c) };

        let rank_one = &self.p_c * self.p_c.transpose();
        let rank_mu = steps
            .iter()
            .zip(&weights)
            .fold(DMatrix::zeros(n, n), |acc, (y, w)| acc + (y * y.transpose()) * *w);
        self.cov = &self.cov * (1.0 + c_1 * delta_h - c_1 - c_mu) + rank_one * c_1 + rank_mu * c_mu;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;

        self.sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();
        self.eigen_stale = true;

        Ok(match self.health() {
            Some(reason) => CmaStatus::NeedsRestart(reason),
            None => CmaStatus::Updated,
        })
    }

    fn health(&mut self) -> Option<RestartReason> {
        let finite = self.sigma.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && self.cov.iter().all(|v| v.is_finite())
            && self.p_sigma.iter().all(|v| v.is_finite())
            && self.p_c.iter().all(|v| v.is_finite());
        if !finite {
            return Some(RestartReason::NonFinite);
        }
        if self.sigma < MIN_SIGMA {
            return Some(RestartReason::SigmaCollapsed);
        }
        self.refresh_eigen();
        let eig: Vec<f64> = self.eigen.scales.iter().map(|s| s * s).collect();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max = eig.iter().copied().fold(0.0, f64::max);
        if min <= 0.0 || !min.is_finite() || max / min > MAX_CONDITION {
            return Some(RestartReason::IllConditioned);
        }
        None
    }

    /// Resets to `N(mean, sigma0² I)` with zero evolution paths.
    pub fn reset(&mut self, mean: Vec<f64>) {
        let n = self.dim();
        debug_assert_eq!(mean.len(), n);
        self.mean = DVector::from_vec(mean);
        self.sigma = self.sigma0;
        self.cov = DMatrix::identity(n, n);
        self.p_sigma = DVector::zeros(n);
        self.p_c = DVector::zeros(n);
        self.generation = 0;
        self.eigen = Eigen::identity(n);
        self.eigen_stale = false;
    }
}

fn decompose(cov: &DMatrix<f64>) -> Eigen {
    let eig = SymmetricEigen::new(cov.clone());
    // Negative eigenvalues become NaN scales and are caught by the health check.
    Eigen {
        basis: eig.eigenvectors,
        scales: eig.eigenvalues.map(f64::sqrt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn weights_are_normalized_and_decreasing() {
        for mu in 1..12 {
            let w = recombination_weights(mu);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.windows(2).all(|p| p[0] > p[1]));
            assert!(w.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn tiny_sigma_samples_equal_mean() {
        let mut es = CmaEs::new(vec![0.5; 3], 1e-300, 4).unwrap();
        for x in es.ask(&mut rng::from_seed(1), 4) {
            assert_eq!(x, vec![0.5; 3]);
        }
    }

    #[test]
    fn no_parents_requests_restart() {
        let mut es = CmaEs::new(vec![0.5; 3], 0.1, 4).unwrap();
        assert_eq!(
            es.update(&[]).unwrap(),
            CmaStatus::NeedsRestart(RestartReason::NoParents)
        );
    }

    #[test]
    fn covariance_stays_spd_on_sphere() {
        let mut es = CmaEs::new(vec![1.0; 5], 0.5, 12).unwrap();
        let mut r = rng::from_seed(5);
        for _ in 0..100 {
            let mut xs = es.ask(&mut r, 12);
            xs.sort_by(|a, b| sphere(a).total_cmp(&sphere(b)));
            let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            assert_eq!(es.update(&refs).unwrap(), CmaStatus::Updated);
            let c = es.covariance().clone();
            assert!((&c - c.transpose()).amax() < 1e-9);
            assert!(es.eigenvalues().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn reset_restores_initial_distribution() {
        let mut es = CmaEs::new(vec![0.2; 4], 0.1, 8).unwrap();
        let mut r = rng::from_seed(2);
        let xs = es.ask(&mut r, 8);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        es.update(&refs).unwrap();
        es.reset(vec![0.7; 4]);
        assert_eq!(es.sigma(), 0.1);
        assert_eq!(es.covariance(), &DMatrix::identity(4, 4));
        assert_eq!(es.evolution_paths(), (&[0.0; 4][..], &[0.0; 4][..]));
        assert_eq!(es.mean(), &[0.7; 4]);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(CmaEs::new(vec![], 0.1, 4).is_err());
        assert!(CmaEs::new(vec![0.0], 0.0, 4).is_err());
        assert!(CmaEs::new(vec![0.0], 0.1, 0).is_err());
    }
}
