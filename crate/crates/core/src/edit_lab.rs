//! Edit-precision protocol: apply each edit kind to each concept's element
//! group and measure how much of the pixel change lands inside that concept.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::AttributionMatrix;
use crate::concepts::ConceptSet;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::raster::{self, DiffMap, RenderSettings};
use crate::svg::{EditKind, EditOp, EditSpec, SvgDocument};

pub const PRECISION_DEFINITION: &str = "target/(target+collateral)";
pub const REGROUP_DEFINITION: &str = "regroup_precision_v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditOptions {
    pub render: RenderSettings,
    pub seed: u64,
    /// Total translation length in render pixels.
    pub move_px: f64,
    pub scale_factor: f64,
    pub binarize_level: f64,
    pub workers: usize,
}

impl Default for EditOptions {
    fn default() -> Self {
        EditOptions {
            render: RenderSettings::default(),
            seed: 0,
            move_px: 20.0,
            scale_factor: 0.7,
            binarize_level: 0.5,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditOutcome {
    pub concept: String,
    pub concept_index: usize,
    pub kind: EditKind,
    pub targets: Vec<usize>,
    pub target_change: f64,
    pub collateral: f64,
    pub precision: Option<f64>,
    pub definition: &'static str,
}

/// Target and collateral pixel sets for one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct Regions {
    pub target: Vec<bool>,
    pub collateral: Vec<bool>,
}

impl Regions {
    /// Target = the concept's binarized mask. Collateral = every pixel that is not
    /// exclusively the target's, so unclaimed pixels and shared pixels both count.
    pub fn for_concept(concepts: &ConceptSet, j: usize, level: f64) -> Regions {
        let target = concepts.concepts[j].binarize(level);
        let mut others = vec![false; target.len()];
        for (k, c) in concepts.concepts.iter().enumerate() {
            if k != j {
                for (o, v) in others.iter_mut().zip(c.values()) {
                    *o |= *v > level;
                }
            }
        }
        let collateral = target.iter().zip(&others).map(|(&t, &o)| !t || o).collect();
        Regions { target, collateral }
    }
}

fn masked(diff: &DiffMap, region: &[bool]) -> (f64, usize) {
    diff.values()
        .iter()
        .zip(region)
        .filter(|(_, &r)| r)
        .fold((0.0, 0), |(s, n), (v, _)| (s + v, n + 1))
}

/// Target change, collateral and precision of a single edit's pixel diff.
pub fn evaluate_edit(kind: EditKind, diff: &DiffMap, regions: &Regions) -> (f64, f64, Option<f64>) {
    let (t_sum, t_n) = masked(diff, &regions.target);
    let (c_sum, c_n) = masked(diff, &regions.collateral);
    let (target, collateral) = if kind == EditKind::Regroup {
        let t_mean = if t_n == 0 { 0.0 } else { t_sum / t_n as f64 };
        let c_mean = if c_n == 0 { 0.0 } else { c_sum / c_n as f64 };
        (1.0 - t_mean, c_mean)
    } else {
        (t_sum, c_sum)
    };
    let total = target + collateral;
    let precision = (total > 0.0).then(|| (target / total).clamp(0.0, 1.0));
    (target, collateral, precision)
}

fn op_for(kind: EditKind, options: &EditOptions, doc: &SvgDocument, color: [u8; 3]) -> EditOp {
    match kind {
        EditKind::Color => EditOp::Color { rgb: color },
        EditKind::Delete => EditOp::Delete,
        EditKind::Move => {
            let per_axis = options.move_px / std::f64::consts::SQRT_2 / doc.viewbox().fit_scale(options.render.size);
            EditOp::Move {
                dx: per_axis,
                dy: per_axis,
            }
        }
        EditKind::Scale => EditOp::Scale {
            factor: options.scale_factor,
        },
        EditKind::Regroup => EditOp::Regroup,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditProtocol {
    pub outcomes: Vec<EditOutcome>,
    pub skipped: Vec<String>,
}

/// Runs all five edit kinds on every concept whose group of primary elements is nonempty.
pub fn run_edit_protocol(
    doc: &SvgDocument,
    attribution: &AttributionMatrix,
    concepts: &ConceptSet,
    options: &EditOptions,
) -> Result<EditProtocol> {
    let size = options.render.size;
    if attribution.n_elements() != doc.len() || attribution.n_concepts() != concepts.len() {
        return Err(Error::Config(format!(
            "attribution is {}x{} but the document has {} elements and {} concepts",
            attribution.n_elements(),
            attribution.n_concepts(),
            doc.len(),
            concepts.len()
        )));
    }
    if let Some(c) = concepts.concepts.iter().find(|c| c.dimensions() != (size, size)) {
        return Err(Error::DimensionMismatch {
            left: c.dimensions(),
            right: (size, size),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for (j, concept) in concepts.concepts.iter().enumerate() {
        let group = attribution.group(j);
        if group.is_empty() {
            skipped.push(format!("concept `{}` has no primary elements", concept.name));
            continue;
        }
        let color: [u8; 3] = rng.random();
        for kind in EditKind::ALL {
            jobs.push((j, kind, EditSpec::new(op_for(kind, options, doc, color), group.clone())));
        }
    }
    let before = options.render.render(doc)?;
    let outcomes = map_indexed(options.workers, jobs.len(), |n| {
        let (j, kind, spec) = &jobs[n];
        let after = options.render.render(&doc.apply_edit(spec)?)?;
        let diff = raster::abs_diff(&before, &after)?;
        let regions = Regions::for_concept(concepts, *j, options.binarize_level);
        let (target_change, collateral, precision) = evaluate_edit(*kind, &diff, &regions);
        Ok(EditOutcome {
            concept: concepts.concepts[*j].name.clone(),
            concept_index: *j,
            kind: *kind,
            targets: spec.targets.clone(),
            target_change,
            collateral,
            precision,
            definition: if *kind == EditKind::Regroup {
                REGROUP_DEFINITION
            } else {
                PRECISION_DEFINITION
            },
        })
    })?;
    Ok(EditProtocol { outcomes, skipped })
}

/// Mean defined precision per edit kind plus the mean over all defined outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditSummary {
    pub per_kind: BTreeMap<EditKind, Option<f64>>,
    pub overall: Option<f64>,
}

pub fn summarize<'a>(outcomes: impl IntoIterator<Item = &'a EditOutcome>) -> EditSummary {
    let mut sums: BTreeMap<EditKind, (f64, usize)> = EditKind::ALL.iter().map(|&k| (k, (0.0, 0))).collect();
    for o in outcomes {
        if let Some(p) = o.precision {
            let e = sums.get_mut(&o.kind).expect("all kinds present");
            e.0 += p;
            e.1 += 1;
        }
    }
    let (total, count) = sums.values().fold((0.0, 0), |(s, n), &(a, b)| (s + a, n + b));
    EditSummary {
        per_kind: sums
            .into_iter()
            .map(|(k, (s, n))| (k, (n > 0).then(|| s / n as f64)))
            .collect(),
        overall: (count > 0).then(|| total / count as f64),
    }
}
