//! Small statistics helpers for replication summaries and optimizer
//! comparisons.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub se: f64,
}

/// Mean and standard error. Deviations are taken from the first value so a
/// column of identical values yields that value and zero error exactly.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len() as f64;
    let pivot = xs[0];
    let mean = pivot + xs.iter().map(|x| x - pivot).sum::<f64>() / n;
    let se = if xs.len() < 2 {
        f64::NAN
    } else {
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    };
    MeanSe { mean, se }
}

/// Mid-ranks (1-based) of the pooled sample.
fn ranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut out = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = mid;
        }
        i = j + 1;
    }
    out
}

/// One-sided Wilcoxon rank-sum test of `x` stochastically greater than `y`.
///
/// Exact null distribution when there are no ties and the samples are
/// small; otherwise the normal approximation with tie and continuity
/// correction.
pub fn rank_sum_greater(x: &[f64], y: &[f64]) -> f64 {
    let (n1, n2) = (x.len(), y.len());
    assert!(n1 > 0 && n2 > 0, "rank-sum test needs non-empty samples");
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let r = ranks(&pooled);
    let w: f64 = r[..n1].iter().sum();
    let u = w - (n1 * (n1 + 1)) as f64 / 2.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let tied = sorted.windows(2).any(|p| p[0] == p[1]);
    if !tied && n1 + n2 <= 60 {
        exact_upper_tail(n1, n2, u.round() as usize)
    } else {
        let (a, b, n) = (n1 as f64, n2 as f64, (n1 + n2) as f64);
        let mut counts = std::collections::BTreeMap::<u64, f64>::new();
        for v in &r {
            *counts.entry(v.to_bits()).or_default() += 1.0;
        }
        let tie: f64 = counts.values().map(|t| t * t * t - t).sum();
        let var = a * b / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
        if var <= 0.0 {
            return 1.0;
        }
        let z = (u - a * b / 2.0 - 0.5) / var.sqrt();
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

/// `P(U >= u)` under the null, counting rank configurations.
fn exact_upper_tail(n1: usize, n2: usize, u: usize) -> f64 {
    let max_u = n1 * n2;
    // ways[i][j][s]: orderings of i x's and j y's whose U statistic is s.
    // The largest element is either an x (beating all j y's) or a y.
    let mut ways = vec![vec![vec![0f64; max_u + 1]; n2 + 1]; n1 + 1];
    for row in ways[0].iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=n1 {
        ways[i][0][0] = 1.0;
        for j in 1..=n2 {
            for s in 0..=max_u {
                let mut v = ways[i][j - 1][s];
                if s >= j {
                    v += ways[i - 1][j][s - j];
                }
                ways[i][j][s] = v;
            }
        }
    }
    let dist = &ways[n1][n2];
    let total: f64 = dist.iter().sum();
    dist[u.min(max_u)..].iter().sum::<f64>() / total
}

// Chebyshev fit of erfc from Numerical Recipes (relative error < 1.2e-7).
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_basics() {
        let m = mean_se(&[1.0, 2.0]);
        assert_eq!(m.mean, 1.5);
        assert!((m.se - 0.5).abs() < 1e-15);
        assert!(mean_se(&[3.0]).se.is_nan());
        assert_eq!(mean_se(&[0.1; 10]), MeanSe { mean: 0.1, se: 0.0 });
    }

    #[test]
    fn exact_rank_sum_complete_separation() {
        let x: Vec<f64> = (10..20).map(f64::from).collect();
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        // 1 / C(20, 10)
        let p = rank_sum_greater(&x, &y);
        assert!((p - 1.0 / 184_756.0).abs() < 1e-15);
        assert!((rank_sum_greater(&y, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_small_case_by_enumeration() {
        // x = {3, 4}, y = {1, 2, 5}: U = 4; P(U >= 4) over C(5,2) = 10 splits.
        let p = rank_sum_greater(&[3.0, 4.0], &[1.0, 2.0, 5.0]);
        let mut hits = 0;
        for a in 1..=5 {
            for b in a + 1..=5 {
                if a + b - 3 >= 4 {
                    hits += 1;
                }
            }
        }
        assert!((p - hits as f64 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn tied_samples_use_normal_approximation() {
        let p = rank_sum_greater(&[1.0; 10], &[0.0; 10]);
        assert!(p < 1e-4);
        assert!((rank_sum_greater(&[1.0; 5], &[1.0; 5]) - 1.0).abs() < 1e-12);
        assert!((erfc(0.0) - 1.0).abs() < 1e-7);
    }
}
