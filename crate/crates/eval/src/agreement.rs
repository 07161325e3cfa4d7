//! Inter-annotator agreement: weighted Cohen's kappa and observed agreement.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rubric::Criterion;
use crate::store::{AnnotationRecord, Phase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no paired ratings")]
    Empty,
    #[error("rating {value} outside {categories} categories")]
    CategoryOutOfRange { value: usize, categories: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Linear,
    Quadratic,
}

impl Weighting {
    /// Disagreement weight of categories `i` and `j` out of `k`.
    pub fn weight(self, i: usize, j: usize, k: usize) -> f64 {
        if k < 2 {
            return 0.0;
        }
        let d = i.abs_diff(j) as f64 / (k - 1) as f64;
        match self {
            Weighting::Linear => d,
            Weighting::Quadratic => d * d,
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Linear => "linear",
            Weighting::Quadratic => "quadratic",
        })
    }
}

impl FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Weighting::Linear),
            "quadratic" => Ok(Weighting::Quadratic),
            other => Err(format!("unknown kappa weighting {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kappa {
    Value(f64),
    /// Expected disagreement is zero, e.g. both raters used one category.
    NotApplicable,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::NotApplicable => None,
        }
    }
}

/// Counts of `(a[i], b[i])` pairs.
pub fn confusion_matrix(a: &[usize], b: &[usize], categories: usize) -> Result<Vec<Vec<f64>>, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut m = vec![vec![0.0; categories]; categories];
    for (&x, &y) in a.iter().zip(b) {
        for value in [x, y] {
            if value >= categories {
                return Err(AgreementError::CategoryOutOfRange { value, categories });
            }
        }
        m[x][y] += 1.0;
    }
    Ok(m)
}

/// Weighted kappa, `1 - sum(w * observed) / sum(w * expected)` with
/// disagreement weights over the declared category order.
pub fn weighted_kappa(a: &[usize], b: &[usize], categories: usize, weighting: Weighting) -> Result<Kappa, AgreementError> {
    let m = confusion_matrix(a, b, categories)?;
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    let n = a.len() as f64;
    let rows: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..categories).map(|j| m.iter().map(|r| r[j]).sum()).collect();
    let (mut observed, mut expected) = (0.0, 0.0);
    for i in 0..categories {
        for j in 0..categories {
            let w = weighting.weight(i, j, categories);
            observed += w * m[i][j] / n;
            expected += w * rows[i] * cols[j] / (n * n);
        }
    }
    if expected <= f64::EPSILON {
        return Ok(Kappa::NotApplicable);
    }
    Ok(Kappa::Value(1.0 - observed / expected))
}

/// Fraction of exact matches.
pub fn observed_agreement<T: PartialEq>(a: &[T], b: &[T]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(AgreementError::Empty);
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64)
}

/// Agreement of one annotator pair on one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub annotators: (String, String),
    pub n: usize,
    pub kappa: Kappa,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAgreement {
    pub criterion: Criterion,
    pub weighting: Weighting,
    /// True for criteria reported by observed agreement instead of kappa.
    pub observed_preferred: bool,
    pub pairs: Vec<PairAgreement>,
    /// Mean kappa over pairs where it is applicable.
    pub mean_kappa: Option<f64>,
    pub mean_observed: Option<f64>,
}

/// Pairs up ratings of items rated by exactly two annotators in the main
/// phase and computes agreement per annotator pair.
pub fn criterion_agreement(
    records: &[AnnotationRecord],
    criterion: Criterion,
    weighting: Weighting,
) -> CriterionAgreement {
    // item key -> annotator -> code
    let mut items: BTreeMap<(String, String, String), BTreeMap<String, usize>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Main) {
        for (url, code) in criterion.codes(&r.rubric) {
            items
                .entry((r.task_id.clone(), r.response_id.clone(), url.unwrap_or_default().to_string()))
                .or_default()
                .insert(r.annotator_id.clone(), code);
        }
    }
    let mut by_pair: BTreeMap<(String, String), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for ratings in items.values().filter(|m| m.len() == 2) {
        let mut it = ratings.iter();
        let (a, ca) = it.next().expect("two entries");
        let (b, cb) = it.next().expect("two entries");
        let entry = by_pair.entry((a.clone(), b.clone())).or_default();
        entry.0.push(*ca);
        entry.1.push(*cb);
    }
    let categories = criterion.categories().len();
    let pairs: Vec<PairAgreement> = by_pair
        .into_iter()
        .map(|(annotators, (a, b))| PairAgreement {
            annotators,
            n: a.len(),
            kappa: weighted_kappa(&a, &b, categories, weighting).expect("codes fit the schema"),
            observed: observed_agreement(&a, &b).expect("nonempty pairs"),
        })
        .collect();
    let mean = |values: Vec<f64>| (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    CriterionAgreement {
        criterion,
        weighting,
        observed_preferred: criterion.uses_observed_agreement(),
        mean_kappa: mean(pairs.iter().filter_map(|p| p.kappa.value()).collect()),
        mean_observed: mean(pairs.iter().map(|p| p.observed).collect()),
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expand(matrix: &[[usize; 3]; 3]) -> (Vec<usize>, Vec<usize>) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, row) in matrix.iter().enumerate() {
            for (j, &count) in row.iter().enumerate() {
                for _ in 0..count {
                    a.push(i);
                    b.push(j);
                }
            }
        }
        (a, b)
    }

    #[test]
    fn hand_computed_linear_kappa() {
        // Observed weighted disagreement 1/8, expected 28/64: kappa = 5/7.
        let (a, b) = expand(&[[2, 1, 0], [0, 2, 1], [0, 0, 2]]);
        let k = weighted_kappa(&a, &b, 3, Weighting::Linear).unwrap().value().unwrap();
        assert!((k - 5.0 / 7.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_and_degenerate() {
        let a = [0, 1, 2, 1];
        assert_eq!(weighted_kappa(&a, &a, 3, Weighting::Quadratic).unwrap(), Kappa::Value(1.0));
        assert_eq!(weighted_kappa(&[1, 1, 1], &[1, 1, 1], 3, Weighting::Linear).unwrap(), Kappa::NotApplicable);
        assert_eq!(
            weighted_kappa(&[1], &[1, 2], 3, Weighting::Linear),
            Err(AgreementError::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn observed() {
        assert_eq!(observed_agreement(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(observed_agreement(&[1, 2, 3], &[4, 5, 6]).unwrap(), 0.0);
    }
}
