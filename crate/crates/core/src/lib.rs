//! Leave-one-out element analysis for SVG documents.

pub mod artifact;
pub mod attribution;
pub mod concepts;
pub mod config;
pub mod edit_lab;
pub mod error;
pub mod metrics;
mod parallel;
pub mod pipeline;
pub mod raster;
pub mod scoring;
pub mod split;
pub mod svg;
pub mod synth;

pub use artifact::{detect, inject, DetectionMethod, DetectionResult, InjectionRecord};
pub use attribution::{attribute, AttributionMatrix};
pub use concepts::{fuse, load_heatmaps, ConceptCandidates, ConceptHeatmap, ConceptSet, FusionThresholds, Provider};
pub use config::RunConfig;
pub use edit_lab::{run_edit_protocol, EditOutcome};
pub use error::{Error, ErrorClass, Result};
pub use metrics::StructuralReport;
pub use raster::{Background, DiffMap, Raster, RenderSettings};
pub use scoring::{loo_analyze, LooAnalysis, LooOptions, LooResult, SimilarityBackend};
pub use svg::{EditKind, EditOp, EditSpec, ElementKind, SvgDocument, ViewBox, VisualElement};
