//! End-to-end composition used by the CLI and the acceptance suite.

use crate::attribution::{attribute_with, AttributionMatrix};
use crate::concepts::{fuse, ConceptCandidates, ConceptSet};
use crate::config::RunConfig;
use crate::edit_lab::{run_edit_protocol, EditProtocol};
use crate::error::{Error, Result};
use crate::metrics::StructuralReport;
use crate::raster::Raster;
use crate::scoring::{loo_analyze, LooAnalysis};
use crate::split::{split_verified, KeptWhole};
use crate::svg::SvgDocument;

#[derive(Debug, Clone)]
pub struct ScoredDocument {
    /// The document after subpath splitting; LOO indices refer to it.
    pub document: SvgDocument,
    pub reference: Raster,
    pub loo: LooAnalysis,
    pub kept_whole: Vec<KeptWhole>,
}

impl ScoredDocument {
    pub fn warnings(&self) -> Vec<String> {
        self.kept_whole
            .iter()
            .map(|k| {
                format!(
                    "element {} left unsplit (fragment render differs by {:.4})",
                    k.element, k.mean_diff
                )
            })
            .collect()
    }
}

/// Splits compound paths, then runs LOO against `reference`, or against the
/// document's own render when no reference is given.
pub fn score_document(doc: &SvgDocument, reference: Option<&Raster>, config: &RunConfig) -> Result<ScoredDocument> {
    config.validate()?;
    let render = config.render();
    let split = split_verified(doc, &render, config.split_tolerance)?;
    let reference = match reference {
        Some(r) => r.clone(),
        None => render.render(doc)?,
    };
    let backend = config.similarity_backend()?;
    let loo = loo_analyze(&split.document, &reference, &backend, &config.loo_options())?;
    Ok(ScoredDocument {
        document: split.document,
        reference,
        loo,
        kept_whole: split.kept_whole,
    })
}

#[derive(Debug, Clone)]
pub struct StructuralAnalysis {
    pub concepts: ConceptSet,
    pub attribution: AttributionMatrix,
    pub report: StructuralReport,
    pub warnings: Vec<String>,
}

pub fn structural_analysis(
    scored: &ScoredDocument,
    candidates: &[ConceptCandidates],
    config: &RunConfig,
) -> Result<StructuralAnalysis> {
    let size = config.render_size;
    for c in candidates.iter().flat_map(|c| &c.candidates) {
        if c.dimensions() != (size, size) {
            return Err(Error::Heatmap(format!(
                "heatmap for `{}` is {:?}, expected {size}x{size}",
                c.name,
                c.dimensions()
            )));
        }
    }
    let fused = fuse(candidates, &config.fusion())?;
    let attribution = attribute_with(
        &scored.loo.footprints(),
        &fused.set,
        config.epsilon,
        config.active_threshold,
    )?;
    let report = StructuralReport::compute(&attribution, &fused.set.names(), config.to_json());
    let mut warnings = scored.warnings();
    warnings.extend(fused.warnings);
    Ok(StructuralAnalysis {
        concepts: fused.set,
        attribution,
        report,
        warnings,
    })
}

pub fn edit_evaluation(
    scored: &ScoredDocument,
    structural: &StructuralAnalysis,
    config: &RunConfig,
) -> Result<EditProtocol> {
    run_edit_protocol(
        &scored.document,
        &structural.attribution,
        &structural.concepts,
        &config.edit_options(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn disjoint_two_concept_document_is_pure() {
        let config = RunConfig {
            render_size: 64,
            ..RunConfig::default()
        };
        let case = synth::two_concepts(64);
        let scored = score_document(&case.document, None, &config).unwrap();
        assert_eq!(scored.loo.results.len(), 2);
        let s = structural_analysis(&scored, &case.concepts, &config).unwrap();
        assert!((s.report.purity.unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(s.report.coverage, 1.0);
        assert_eq!(s.report.n_active, 2);
        assert_eq!(s.report.compactness.mean, Some(1.0));
    }

    #[test]
    fn wrong_heatmap_size_rejected() {
        let config = RunConfig {
            render_size: 64,
            ..RunConfig::default()
        };
        let case = synth::two_concepts(32);
        let scored = score_document(&case.document, None, &config).unwrap();
        assert!(matches!(
            structural_analysis(&scored, &case.concepts, &config),
            Err(Error::Heatmap(_))
        ));
    }
}
