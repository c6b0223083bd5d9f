//! Shared fixtures for the criterion benches.

use svgloo::{synth, Raster, RenderSettings, SvgDocument};

/// A separable synthetic document with three injected artifacts, and the clean render.
pub fn injected_fixture(seed: u64, size: u32) -> (SvgDocument, Raster, Vec<usize>) {
    let clean = synth::separable_document(seed);
    let reference = RenderSettings::new(size)
        .render(&clean)
        .expect("synthetic documents render");
    let record = svgloo::inject(&clean, 3, seed).expect("injection into a nonempty document");
    (record.injected, reference, record.truth)
}
