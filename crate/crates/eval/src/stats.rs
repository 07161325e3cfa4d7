//! Rank statistics and weighted summaries.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("an input has zero variance")]
    ZeroVariance,
    #[error("input contains a non-finite value")]
    NonFinite,
}

/// Samples with `min(n_a, n_b)` at or below this get exact p-values.
pub const EXACT_MAX_MIN_N: usize = 8;

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of midranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    pearson(&midranks(x), &midranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: pairs where it is larger, ties counting half.
    pub u: f64,
    /// Two-sided.
    pub p: f64,
    pub method: PValueMethod,
}

fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(a)?;
    check_finite(b)
}

/// Exact p-values when the smaller sample has at most
/// [`EXACT_MAX_MIN_N`] values, tie-corrected normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check_samples(a, b)?;
    if a.len().min(b.len()) <= EXACT_MAX_MIN_N {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

/// Permutation distribution of U over all ways to draw the first sample's
/// size from the pooled midranks. Two-sided p doubles the smaller tail.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check_samples(a, b)?;
    let u = u_statistic(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    // Doubled midranks are integers.
    let ranks: Vec<usize> = midranks(&pooled).iter().map(|r| (r * 2.0).round() as usize).collect();
    let k = a.len().min(b.len());
    let observed: usize = if a.len() <= b.len() {
        ranks[..a.len()].iter().sum()
    } else {
        ranks[a.len()..].iter().sum()
    };
    let max_sum: usize = {
        let mut sorted = ranks.clone();
        sorted.sort_unstable_by(|x, y| y.cmp(x));
        sorted[..k].iter().sum()
    };
    // ways[j][s]: subsets of size j with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        for j in (1..=k).rev() {
            let (lower, upper) = ways.split_at_mut(j);
            let (prev, cur) = (&lower[j - 1], &mut upper[0]);
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let dist = &ways[k];
    let total: f64 = dist.iter().sum();
    let lower: f64 = dist[..=observed.min(max_sum)].iter().sum();
    let upper: f64 = dist[observed.min(max_sum)..].iter().sum();
    let p = (2.0 * lower.min(upper) / total).min(1.0);
    Ok(MannWhitney {
        u,
        p,
        method: PValueMethod::Exact,
    })
}

/// Normal approximation with tie and continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    check_samples(a, b)?;
    let u = u_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j] == pooled[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let variance = if n > 1.0 {
        na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    let mean = na * nb / 2.0;
    let p = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p,
        method: PValueMethod::NormalApprox,
    })
}

/// Weighted mean and standard deviation with weights read as frequencies:
/// the variance divides by `sum(w) - 1`. `sd` is `None` when `sum(w) <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSummary {
    pub weight: f64,
    pub mean: f64,
    pub sd: Option<f64>,
}

pub fn weighted_summary(values: &[(f64, f64)]) -> Option<WeightedSummary> {
    let weight: f64 = values.iter().map(|(_, w)| w).sum();
    if values.is_empty() || weight <= 0.0 {
        return None;
    }
    let mean = values.iter().map(|(x, w)| x * w).sum::<f64>() / weight;
    let sd = (weight > 1.0).then(|| {
        let ss: f64 = values.iter().map(|(x, w)| w * (x - mean) * (x - mean)).sum();
        (ss / (weight - 1.0)).sqrt()
    });
    Some(WeightedSummary { weight, mean, sd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn exact_small_case() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 0.1).abs() < 1e-12);
        assert_eq!(r.method, PValueMethod::Exact);
    }

    #[test]
    fn identical_multisets() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u, 8.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_reverse() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(spearman_rho(&x, &[1.0; 4]), Err(StatsError::ZeroVariance));
        assert_eq!(spearman_rho(&x, &y[..3]), Err(StatsError::LengthMismatch { left: 4, right: 3 }));
    }

    #[test]
    fn weighted_summary_hand_values() {
        let s = weighted_summary(&[(8.0, 0.5), (6.0, 0.5), (9.0, 1.0)]).unwrap();
        assert_eq!(s.weight, 2.0);
        assert_eq!(s.mean, 8.0);
        // 0.5*0 + 0.5*4 + 1*1 = 3, over 2 - 1.
        assert_eq!(s.sd, Some(3.0f64.sqrt()));
        assert_eq!(weighted_summary(&[(9.0, 1.0)]).unwrap().sd, None);
    }
}
