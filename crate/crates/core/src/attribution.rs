//! Element–concept attribution from LOO footprints and concept heatmaps.

use serde::Serialize;

use crate::concepts::ConceptSet;
use crate::error::{Error, Result};
use crate::raster::DiffMap;

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const ACTIVE_THRESHOLD: f64 = 0.01;

/// N×C attribution matrix with derived per-element quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionMatrix {
    rows: Vec<Vec<f64>>,
    n_concepts: usize,
    active: Vec<bool>,
    primary: Vec<usize>,
    purity: Vec<f64>,
    epsilon: f64,
    active_threshold: f64,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

impl AttributionMatrix {
    /// Builds the matrix from raw rows, deriving primaries, purity and activity.
    pub fn from_rows(rows: Vec<Vec<f64>>, epsilon: f64) -> Result<Self> {
        Self::from_rows_with(rows, epsilon, ACTIVE_THRESHOLD)
    }

    /// As [`from_rows`](Self::from_rows) with an explicit activity threshold on row sums.
    pub fn from_rows_with(rows: Vec<Vec<f64>>, epsilon: f64, active_threshold: f64) -> Result<Self> {
        let n_concepts = rows.first().map_or(0, Vec::len);
        if n_concepts == 0 {
            return Err(Error::UndefinedMetric("attribution needs at least one concept"));
        }
        if rows.iter().any(|r| r.len() != n_concepts) {
            return Err(Error::Config("ragged attribution rows".into()));
        }
        if rows.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "attribution values must be finite and non-negative".into(),
            ));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon {epsilon} must be >= 0")));
        }
        let mut active = Vec::with_capacity(rows.len());
        let mut primary = Vec::with_capacity(rows.len());
        let mut purity = Vec::with_capacity(rows.len());
        for row in &rows {
            let sum: f64 = row.iter().sum();
            let p = argmax(row);
            active.push(sum >= active_threshold);
            primary.push(p);
            let denom = sum + epsilon;
            purity.push(if denom > 0.0 { row[p] / denom } else { 0.0 });
        }
        Ok(AttributionMatrix {
            rows,
            n_concepts,
            active,
            primary,
            purity,
            epsilon,
            active_threshold,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.rows.len()
    }

    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn active_threshold(&self) -> f64 {
        self.active_threshold
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().sum()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Primary concept index (argmax, lowest index on ties).
    pub fn primary(&self, i: usize) -> usize {
        self.primary[i]
    }

    pub fn primaries(&self) -> &[usize] {
        &self.primary
    }

    pub fn purity(&self, i: usize) -> f64 {
        self.purity[i]
    }

    pub fn purities(&self) -> &[f64] {
        &self.purity
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rows.len()).filter(|&i| self.active[i])
    }

    /// Active elements whose primary concept is `j`.
    pub fn group(&self, j: usize) -> Vec<usize> {
        self.active_indices().filter(|&i| self.primary[i] == j).collect()
    }

    /// CSV with a header row of concept names, one row per element.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("element,active,primary,purity");
        for n in names {
            out.push(',');
            out.push_str(&csv_field(n));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{}",
                self.active[i], self.primary[i], self.purity[i]
            ));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Attribution of every footprint against every concept heatmap.
pub fn attribute(footprints: &[DiffMap], concepts: &ConceptSet, epsilon: f64) -> Result<AttributionMatrix> {
    attribute_with(footprints, concepts, epsilon, ACTIVE_THRESHOLD)
}

pub fn attribute_with(
    footprints: &[DiffMap],
    concepts: &ConceptSet,
    epsilon: f64,
    active_threshold: f64,
) -> Result<AttributionMatrix> {
    if concepts.is_empty() {
        return Err(Error::UndefinedMetric("attribution needs at least one concept"));
    }
    for m in footprints {
        for h in &concepts.concepts {
            if m.dimensions() != h.dimensions() {
                return Err(Error::DimensionMismatch {
                    left: m.dimensions(),
                    right: h.dimensions(),
                });
            }
        }
    }
    let rows = footprints
        .iter()
        .map(|m| {
            let denom = m.mass() + epsilon;
            concepts
                .concepts
                .iter()
                .map(|h| {
                    if denom == 0.0 {
                        return 0.0;
                    }
                    let overlap: f64 = m.values().iter().zip(h.values()).map(|(a, b)| a * b).sum();
                    overlap / denom
                })
                .collect()
        })
        .collect();
    AttributionMatrix::from_rows_with(rows, epsilon, active_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{ConceptHeatmap, Provider};
    use proptest::prelude::*;

    fn heat(name: &str, f: impl Fn(u32, u32) -> f64) -> ConceptHeatmap {
        ConceptHeatmap::from_fn(name, Provider::File, None, (10, 10), f).unwrap()
    }

    fn foot(f: impl Fn(u32, u32) -> f64) -> DiffMap {
        let values = (0..10)
            .flat_map(|y| (0..10).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        DiffMap::from_values(10, 10, values).unwrap()
    }

    #[test]
    fn footprint_inside_constant_heatmap() {
        let set = ConceptSet::new(vec![heat("a", |_, _| 0.0), heat("b", |_, _| 1.0)]);
        let m = foot(|x, y| if x < 3 && y < 3 { 0.5 } else { 0.0 });
        let a = attribute(&[m], &set, DEFAULT_EPSILON).unwrap();
        assert_eq!(a.get(0, 0), 0.0);
        assert!((a.get(0, 1) - 4.5 / (4.5 + 1e-8)).abs() < 1e-15);
        assert_eq!(a.primary(0), 1);
        assert!((a.purity(0) - 1.0).abs() < 1e-8);
        assert!(a.is_active(0));
    }

    #[test]
    fn zero_mass_footprint_inactive() {
        let set = ConceptSet::new(vec![heat("a", |_, _| 1.0)]);
        let a = attribute(&[DiffMap::zeros(10, 10)], &set, DEFAULT_EPSILON).unwrap();
        assert_eq!(a.row(0), &[0.0]);
        assert!(!a.is_active(0));
        assert_eq!(a.n_active(), 0);
    }

    #[test]
    fn counting_oracle() {
        // Footprint of 1 on all 100 pixels; heatmap = 1 on the first 40.
        let set = ConceptSet::new(vec![heat("a", |x, y| if y * 10 + x < 40 { 1.0 } else { 0.0 })]);
        let a = attribute(&[foot(|_, _| 1.0)], &set, DEFAULT_EPSILON).unwrap();
        assert_eq!(a.get(0, 0), 40.0 / (100.0 + 1e-8));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let a = AttributionMatrix::from_rows(vec![vec![0.2, 0.4, 0.4], vec![0.3, 0.3, 0.3]], 0.0).unwrap();
        assert_eq!(a.primaries(), &[1, 0]);
    }

    #[test]
    fn activity_threshold_is_inclusive() {
        let a = AttributionMatrix::from_rows(vec![vec![0.01, 0.0], vec![0.0099, 0.0]], 0.0).unwrap();
        assert_eq!(a.active(), &[true, false]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let set = ConceptSet::new(vec![heat("a", |_, _| 1.0)]);
        let r = attribute(&[DiffMap::zeros(5, 5)], &set, DEFAULT_EPSILON);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn no_concepts_rejected() {
        assert!(attribute(&[DiffMap::zeros(10, 10)], &ConceptSet::default(), DEFAULT_EPSILON).is_err());
    }

    #[test]
    fn csv_has_one_row_per_element() {
        let a = AttributionMatrix::from_rows(vec![vec![0.5, 0.25], vec![0.0, 0.0]], 0.0).unwrap();
        let csv = a.to_csv(&["x".into(), "y,z".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "element,active,primary,purity,x,\"y,z\"");
        assert_eq!(lines[1], "0,true,0,0.6666666666666666,0.5,0.25");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #[test]
        fn partitioned_heatmaps_sum_to_at_most_one(
            values in proptest::collection::vec(0.0f64..1.0, 100),
            split in 0u32..10,
        ) {
            let set = ConceptSet::new(vec![
                heat("l", |x, _| if x < split { 1.0 } else { 0.0 }),
                heat("r", |x, _| if x < split { 0.0 } else { 1.0 }),
            ]);
            let m = DiffMap::from_values(10, 10, values).unwrap();
            let mass = m.mass();
            let a = attribute(&[m], &set, DEFAULT_EPSILON).unwrap();
            let s = a.row_sum(0);
            prop_assert!(s <= 1.0 + 1e-12);
            prop_assert!((s - mass / (mass + DEFAULT_EPSILON)).abs() < 1e-9);
        }

        #[test]
        fn purity_scale_invariant(row in proptest::collection::vec(0.0f64..1.0, 1..6), k in 0.01f64..100.0) {
            prop_assume!(row.iter().sum::<f64>() > 0.0);
            let scaled: Vec<f64> = row.iter().map(|v| v * k).collect();
            let a = AttributionMatrix::from_rows(vec![row], 0.0).unwrap();
            let b = AttributionMatrix::from_rows(vec![scaled], 0.0).unwrap();
            prop_assert_eq!(a.primary(0), b.primary(0));
            prop_assert!((a.purity(0) - b.purity(0)).abs() < 1e-12);
            prop_assert!(a.purity(0) > 0.0 && a.purity(0) <= 1.0);
        }
    }
}
