//! Structural metrics over an attribution matrix.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionMatrix;
use crate::error::{Error, Result};

/// Name under which the crosstalk aggregate is reported.
pub const CROSSTALK_DEFINITION: &str = "crosstalk_v1";

/// Mean purity over active elements.
pub fn mean_purity(a: &AttributionMatrix) -> Result<f64> {
    let active: Vec<usize> = a.active_indices().collect();
    if active.is_empty() {
        return Err(Error::UndefinedMetric("mean purity needs an active element"));
    }
    Ok(active.iter().map(|&i| a.purity(i)).sum::<f64>() / active.len() as f64)
}

/// Fraction of concepts that are the primary of at least one active element.
pub fn coverage(a: &AttributionMatrix) -> f64 {
    let mut covered = vec![false; a.n_concepts()];
    for i in a.active_indices() {
        covered[a.primary(i)] = true;
    }
    covered.iter().filter(|&&c| c).count() as f64 / a.n_concepts() as f64
}

/// Active elements with positive attribution to `j`, with their values.
fn contributions(a: &AttributionMatrix, j: usize) -> Vec<(usize, f64)> {
    a.active_indices()
        .map(|i| (i, a.get(i, j)))
        .filter(|&(_, v)| v > 0.0)
        .collect()
}

/// Normalized Herfindahl concentration of concept `j`; `None` when nothing contributes.
pub fn compactness(a: &AttributionMatrix, j: usize) -> Option<f64> {
    let parts = contributions(a, j);
    let n = parts.len();
    match n {
        0 => None,
        1 => Some(1.0),
        _ => {
            let total: f64 = parts.iter().map(|p| p.1).sum();
            let h: f64 = parts.iter().map(|p| (p.1 / total).powi(2)).sum();
            let inv = 1.0 / n as f64;
            Some(((h - inv) / (1.0 - inv)).clamp(0.0, 1.0))
        }
    }
}

/// Attribution-weighted positional spread of concept `j`, inverted so 1 is most local.
/// `n` is the total number of scoring units, active or not.
pub fn locality(a: &AttributionMatrix, j: usize, n: usize) -> Option<f64> {
    let parts = contributions(a, j);
    if parts.is_empty() {
        return None;
    }
    if n <= 1 {
        return Some(1.0);
    }
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let mu: f64 = parts.iter().map(|&(i, v)| v / total * i as f64).sum();
    let mad: f64 = parts.iter().map(|&(i, v)| v / total * (i as f64 - mu).abs()).sum();
    Some((1.0 - mad / ((n - 1) as f64 / 2.0)).clamp(0.0, 1.0))
}

/// Row-mass-weighted mean of `1 - purity` over active elements.
pub fn crosstalk(a: &AttributionMatrix) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in a.active_indices() {
        let mass = a.row_sum(i);
        num += mass * (1.0 - a.purity(i));
        den += mass;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("crosstalk needs an active element"));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerConcept {
    pub per_concept: BTreeMap<String, Option<f64>>,
    pub mean: Option<f64>,
}

impl PerConcept {
    fn build(names: &[String], values: Vec<Option<f64>>) -> Self {
        let mean = mean_defined(&values);
        PerConcept {
            per_concept: names.iter().cloned().zip(values).collect(),
            mean,
        }
    }
}

/// Per-document structural report. Metrics are `None` when no element is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub purity: Option<f64>,
    pub coverage: f64,
    pub compactness: PerConcept,
    pub locality: PerConcept,
    pub crosstalk: Option<f64>,
    pub crosstalk_definition: String,
    pub n_elements: usize,
    pub n_active: usize,
    pub n_concepts: usize,
    pub config: serde_json::Value,
}

impl StructuralReport {
    /// `names` labels concepts in matrix column order; duplicates get a `#j` suffix.
    pub fn compute(a: &AttributionMatrix, names: &[String], config: serde_json::Value) -> Self {
        let mut labels: Vec<String> = Vec::with_capacity(a.n_concepts());
        for j in 0..a.n_concepts() {
            let base = names.get(j).cloned().unwrap_or_else(|| format!("concept{j}"));
            let label = if labels.contains(&base) {
                format!("{base}#{j}")
            } else {
                base
            };
            labels.push(label);
        }
        let n = a.n_elements();
        StructuralReport {
            purity: mean_purity(a).ok(),
            coverage: coverage(a),
            compactness: PerConcept::build(&labels, (0..a.n_concepts()).map(|j| compactness(a, j)).collect()),
            locality: PerConcept::build(&labels, (0..a.n_concepts()).map(|j| locality(a, j, n)).collect()),
            crosstalk: crosstalk(a).ok(),
            crosstalk_definition: CROSSTALK_DEFINITION.to_string(),
            n_elements: n,
            n_active: a.n_active(),
            n_concepts: a.n_concepts(),
            config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> AttributionMatrix {
        AttributionMatrix::from_rows(rows, 0.0).unwrap()
    }

    fn column(values: &[(usize, f64)], n: usize) -> AttributionMatrix {
        let mut rows = vec![vec![0.0]; n];
        for &(i, v) in values {
            rows[i][0] = v;
        }
        matrix(rows)
    }

    #[test]
    fn one_hot_rows_are_pure() {
        let a = matrix(vec![vec![1.0, 0.0], vec![0.0, 0.5]]);
        assert_eq!(mean_purity(&a).unwrap(), 1.0);
        assert_eq!(crosstalk(&a).unwrap(), 0.0);
        assert_eq!(coverage(&a), 1.0);
    }

    #[test]
    fn purity_mean_arithmetic() {
        let a = matrix(vec![vec![0.8, 0.2], vec![0.6, 0.4]]);
        assert!((mean_purity(&a).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn no_active_elements_is_undefined() {
        let a = matrix(vec![vec![0.0, 0.001]]);
        assert!(matches!(mean_purity(&a), Err(Error::UndefinedMetric(_))));
        assert!(crosstalk(&a).is_err());
    }

    #[test]
    fn coverage_counts_chosen_concepts() {
        let a = matrix(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        assert_eq!(coverage(&a), 0.75);
    }

    #[test]
    fn inactive_rows_do_not_cover() {
        let a = matrix(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.005],
        ]);
        assert_eq!(coverage(&a), 0.75);
    }

    #[test]
    fn compactness_cases() {
        assert_eq!(compactness(&column(&[(2, 0.4)], 4), 0), Some(1.0));
        assert!(compactness(&column(&[(0, 0.5), (1, 0.5)], 2), 0).unwrap().abs() < 1e-12);
        let c = compactness(&column(&[(0, 0.9), (1, 0.1)], 2), 0).unwrap();
        assert!((c - 0.64).abs() < 1e-12);
        assert_eq!(compactness(&column(&[], 3), 0), None);
    }

    #[test]
    fn locality_cases() {
        assert_eq!(locality(&column(&[(7, 0.3)], 10), 0, 10), Some(1.0));
        let near = locality(&column(&[(1, 1.0), (3, 1.0), (5, 1.0)], 19), 0, 19).unwrap();
        let far = locality(&column(&[(1, 1.0), (9, 1.0), (18, 1.0)], 19), 0, 19).unwrap();
        assert!((near - (1.0 - (4.0 / 3.0) / 9.0)).abs() < 1e-12);
        assert!((near - 0.852).abs() < 5e-4);
        assert!((far - 0.358).abs() < 5e-4);
        let spread = locality(&column(&[(0, 0.5), (9, 0.5)], 10), 0, 10).unwrap();
        assert!(spread.abs() < 1e-12);
        assert_eq!(locality(&column(&[(0, 1.0)], 1), 0, 1), Some(1.0));
    }

    #[test]
    fn crosstalk_weighted_by_mass() {
        // Row masses 1 and 3 with purities 1.0 and 0.6.
        let a = matrix(vec![vec![1.0, 0.0], vec![1.8, 1.2]]);
        assert!((crosstalk(&a).unwrap() - 0.3).abs() < 1e-12);
        let single = matrix(vec![vec![0.7, 0.3]]);
        assert!((crosstalk(&single).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn report_serializes_nulls() {
        let a = matrix(vec![vec![1.0, 0.0], vec![0.5, 0.0]]);
        let r = StructuralReport::compute(&a, &["a".into(), "a".into()], serde_json::json!({"k": 1}));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["compactness"]["per_concept"]["a#1"], serde_json::Value::Null);
        assert_eq!(v["n_active"], 2);
        assert_eq!(v["crosstalk_definition"], "crosstalk_v1");
        assert_eq!(v["coverage"], 0.5);
    }
}
