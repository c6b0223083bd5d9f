//! Subpath splitting guarded by a render check.
//!
//! A compound path is split only when its fragments, painted one after the
//! other, reproduce the unsplit path. Paths whose subpaths cut holes into each
//! other (evenodd, or nonzero with opposite winding) fail the check and stay whole.

use serde::Serialize;

use crate::error::Result;
use crate::raster::{self, RenderSettings};
use crate::svg::{count_movetos, ElementKind, SvgDocument};

/// Mean absolute difference allowed over the painted region, per channel in [0, 1].
pub const DEFAULT_SPLIT_TOLERANCE: f64 = 1.0 / 255.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeptWhole {
    /// Index in the unsplit document.
    pub element: usize,
    pub mean_diff: f64,
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub document: SvgDocument,
    pub kept_whole: Vec<KeptWhole>,
}

impl SplitOutcome {
    pub fn warnings(&self) -> Vec<String> {
        self.kept_whole
            .iter()
            .map(|k| {
                format!(
                    "element {} left unsplit: fragments differ from the compound path by {:.4} on average",
                    k.element, k.mean_diff
                )
            })
            .collect()
    }
}

/// Mean diff over pixels painted by either render; 0 when nothing is painted.
fn painted_mean_diff(a: &raster::Raster, b: &raster::Raster, blank: &raster::Raster) -> Result<f64> {
    let diff = raster::abs_diff(a, b)?;
    let from_a = raster::abs_diff(a, blank)?;
    let from_b = raster::abs_diff(b, blank)?;
    let mut sum = 0.0;
    let mut painted = 0usize;
    for ((d, p), q) in diff.values().iter().zip(from_a.values()).zip(from_b.values()) {
        if *p > 0.0 || *q > 0.0 {
            sum += d;
            painted += 1;
        }
    }
    Ok(if painted == 0 { 0.0 } else { sum / painted as f64 })
}

pub fn split_verified(doc: &SvgDocument, settings: &RenderSettings, tolerance: f64) -> Result<SplitOutcome> {
    let blank = settings.render(&doc.only(&[]))?;
    let mut kept_whole = Vec::new();
    for el in doc.elements() {
        if el.kind != ElementKind::Path {
            continue;
        }
        // Unparsable data is reported by the split itself below.
        if count_movetos(el.attr("d").unwrap_or("")).unwrap_or(0) < 2 {
            continue;
        }
        let alone = doc.only(&[el.index]);
        let whole = settings.render(&alone)?;
        let pieces = settings.render(&alone.split_subpaths()?)?;
        let mean_diff = painted_mean_diff(&whole, &pieces, &blank)?;
        if mean_diff > tolerance {
            kept_whole.push(KeptWhole {
                element: el.index,
                mean_diff,
            });
        }
    }
    let document = doc.split_subpaths_where(|i| !kept_whole.iter().any(|k| k.element == i))?;
    Ok(SplitOutcome { document, kept_whole })
}
