//! Concept heatmaps: loading, provider selection and merging.
//!
//! Heatmaps come from an interchange manifest (JSON + 8-bit grayscale PNGs)
//! written by any grounding provider. Per concept, a confident instance mask
//! with a sensible area wins over a soft text-prompted heatmap; concepts whose
//! binarized supports nearly coincide are then merged.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    TextPromptedSegmentation,
    InstanceMask,
    File,
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provider::TextPromptedSegmentation => "text-prompted-segmentation",
            Provider::InstanceMask => "instance-mask",
            Provider::File => "file",
        })
    }
}

/// A spatial map in [0, 1] for one named concept.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptHeatmap {
    pub name: String,
    pub provider: Provider,
    pub score: Option<f64>,
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ConceptHeatmap {
    pub fn new(
        name: impl Into<String>,
        provider: Provider,
        score: Option<f64>,
        width: u32,
        height: u32,
        values: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Heatmap("heatmap has a zero dimension".into()));
        }
        if values.len() != width as usize * height as usize {
            return Err(Error::Heatmap(format!(
                "{} values cannot fill a {width}x{height} heatmap",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Heatmap(format!("heatmap value {v} outside [0, 1]")));
        }
        Ok(ConceptHeatmap {
            name: name.into(),
            provider,
            score,
            width,
            height,
            values,
        })
    }

    /// Builds a heatmap by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        name: impl Into<String>,
        provider: Provider,
        score: Option<f64>,
        size: (u32, u32),
        f: impl Fn(u32, u32) -> f64,
    ) -> Result<Self> {
        let (w, h) = size;
        let values = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        ConceptHeatmap::new(name, provider, score, w, h, values)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Mass divided by pixel count.
    pub fn area_fraction(&self) -> f64 {
        self.mass() / self.values.len() as f64
    }

    /// Pixels strictly above `level`.
    pub fn binarize(&self, level: f64) -> Vec<bool> {
        self.values.iter().map(|&v| v > level).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Bilinear resample with pixel-center alignment (edges clamp).
    pub fn resized(&self, width: u32, height: u32) -> ConceptHeatmap {
        if (width, height) == self.dimensions() {
            return self.clone();
        }
        let values = resize_bilinear(&self.values, self.width, self.height, width, height);
        ConceptHeatmap {
            values,
            width,
            height,
            ..self.clone()
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().map(|v| (v * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(self.width, self.height, bytes)
            .expect("length checked at construction")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

pub fn resize_bilinear(src: &[f64], sw: u32, sh: u32, dw: u32, dh: u32) -> Vec<f64> {
    let sx = sw as f64 / dw as f64;
    let sy = sh as f64 / dh as f64;
    let sample = |coord: f64, len: u32| -> (usize, usize, f64) {
        let c = coord.clamp(0.0, (len - 1) as f64);
        let lo = c.floor() as usize;
        let hi = (lo + 1).min(len as usize - 1);
        (lo, hi, c - lo as f64)
    };
    let mut out = Vec::with_capacity(dw as usize * dh as usize);
    for y in 0..dh {
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sy - 0.5, sh);
        for x in 0..dw {
            let (x0, x1, fx) = sample((x as f64 + 0.5) * sx - 0.5, sw);
            let at = |xx: usize, yy: usize| src[yy * sw as usize + xx];
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
        }
    }
    out
}

/// IoU of two binary masks; 0 when both are empty.
pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.iter().zip(b) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// All grounding candidates for one concept.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptCandidates {
    pub name: String,
    pub candidates: Vec<ConceptHeatmap>,
}

/// The final concept list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConceptSet {
    pub concepts: Vec<ConceptHeatmap>,
}

impl ConceptSet {
    pub fn new(concepts: Vec<ConceptHeatmap>) -> Self {
        ConceptSet { concepts }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.concepts.iter().map(|c| c.name.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionThresholds {
    pub min_instance_score: f64,
    pub min_area: f64,
    pub max_area: f64,
    pub merge_iou: f64,
    pub binarize_level: f64,
}

impl Default for FusionThresholds {
    fn default() -> Self {
        FusionThresholds {
            min_instance_score: 0.3,
            min_area: 0.005,
            max_area: 0.95,
            merge_iou: 0.9,
            binarize_level: 0.5,
        }
    }
}

impl FusionThresholds {
    /// Whether an instance mask with this score and area fraction is trusted.
    pub fn accepts_instance(&self, score: f64, area_fraction: f64) -> bool {
        score >= self.min_instance_score && area_fraction >= self.min_area && area_fraction <= self.max_area
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseOutcome {
    pub set: ConceptSet,
    pub warnings: Vec<String>,
}

fn select(candidates: &ConceptCandidates, t: &FusionThresholds) -> (ConceptHeatmap, Option<String>) {
    let list = &candidates.candidates;
    if let Some(mask) = list
        .iter()
        .find(|c| c.provider == Provider::InstanceMask && t.accepts_instance(c.score.unwrap_or(0.0), c.area_fraction()))
    {
        return (mask.clone(), None);
    }
    for provider in [Provider::TextPromptedSegmentation, Provider::File] {
        if let Some(c) = list.iter().find(|c| c.provider == provider) {
            return (c.clone(), None);
        }
    }
    (
        list[0].clone(),
        Some(format!(
            "concept `{}`: no candidate passed the instance-mask filters and no soft heatmap exists; using the first mask",
            candidates.name
        )),
    )
}

/// Selects one heatmap per concept, drops empty ones, then merges near-duplicates.
pub fn fuse(candidates: &[ConceptCandidates], thresholds: &FusionThresholds) -> Result<FuseOutcome> {
    let mut warnings = Vec::new();
    let mut selected: Vec<ConceptHeatmap> = Vec::with_capacity(candidates.len());
    for concept in candidates {
        if concept.candidates.is_empty() {
            return Err(Error::Heatmap(format!("concept `{}` has no candidates", concept.name)));
        }
        let (mut chosen, warning) = select(concept, thresholds);
        warnings.extend(warning);
        chosen.name = concept.name.clone();
        if chosen.is_zero() {
            warnings.push(format!("concept `{}` dropped: empty heatmap", concept.name));
            continue;
        }
        if let Some(first) = selected.first() {
            if first.dimensions() != chosen.dimensions() {
                return Err(Error::Heatmap(format!(
                    "concept `{}` is {:?}, expected {:?}",
                    concept.name,
                    chosen.dimensions(),
                    first.dimensions()
                )));
            }
        }
        selected.push(chosen);
    }

    // Greedy merging: repeatedly merge the pair with the highest IoU above the
    // threshold (ties go to the earliest pair), keeping the earlier name.
    let mut masks: Vec<Vec<bool>> = selected.iter().map(|c| c.binarize(thresholds.binarize_level)).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..selected.len() {
            for j in (i + 1)..selected.len() {
                let iou = mask_iou(&masks[i], &masks[j]);
                if iou > thresholds.merge_iou && best.is_none_or(|(b, _, _)| iou > b) {
                    best = Some((iou, i, j));
                }
            }
        }
        let Some((iou, i, j)) = best else { break };
        let absorbed = selected.remove(j);
        masks.remove(j);
        warnings.push(format!(
            "concept `{}` merged into `{}` (IoU {iou:.3})",
            absorbed.name, selected[i].name
        ));
        let keep = &mut selected[i];
        for (v, w) in keep.values.iter_mut().zip(&absorbed.values) {
            *v = v.max(*w);
        }
        masks[i] = keep.binarize(thresholds.binarize_level);
    }

    if selected.is_empty() {
        return Err(Error::Heatmap("no concepts left after fusion".into()));
    }
    Ok(FuseOutcome {
        set: ConceptSet::new(selected),
        warnings,
    })
}

/// Heatmap manifest, shared with grounding providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapManifest {
    pub render_size: u32,
    pub concepts: Vec<ManifestConcept>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConcept {
    pub name: String,
    pub candidates: Vec<ManifestCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCandidate {
    pub provider: Provider,
    pub score: Option<f64>,
    /// Path relative to the manifest's directory.
    pub png: String,
}

fn load_gray(path: &Path) -> Result<(u32, u32, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Heatmap(format!("{} has a zero dimension", path.display())));
    }
    Ok((w, h, gray.into_raw().into_iter().map(|v| v as f64 / 255.0).collect()))
}

/// Loads every candidate listed in a manifest, resampled to `render_size`.
pub fn load_heatmaps(manifest_path: &Path, render_size: u32) -> Result<Vec<ConceptCandidates>> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: HeatmapManifest =
        serde_json::from_str(&text).map_err(|e| Error::Heatmap(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .concepts
        .iter()
        .map(|concept| {
            let candidates = concept
                .candidates
                .iter()
                .map(|c| {
                    let path: PathBuf = base.join(&c.png);
                    let (w, h, values) = load_gray(&path)?;
                    Ok(
                        ConceptHeatmap::new(concept.name.clone(), c.provider, c.score, w, h, values)?
                            .resized(render_size, render_size),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConceptCandidates {
                name: concept.name.clone(),
                candidates,
            })
        })
        .collect()
}

/// Writes candidates as PNGs plus `manifest.json` under `dir`; returns the manifest path.
pub fn write_heatmaps(dir: &Path, render_size: u32, concepts: &[ConceptCandidates]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = HeatmapManifest {
        render_size,
        concepts: Vec::new(),
    };
    for (ci, concept) in concepts.iter().enumerate() {
        let mut entry = ManifestConcept {
            name: concept.name.clone(),
            candidates: Vec::new(),
        };
        for (k, c) in concept.candidates.iter().enumerate() {
            let file = format!("concept{ci:02}_{k}_{}.png", c.provider);
            c.save_png(&dir.join(&file))?;
            entry.candidates.push(ManifestCandidate {
                provider: c.provider,
                score: c.score,
                png: file,
            });
        }
        manifest.concepts.push(entry);
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(name: &str, provider: Provider, score: Option<f64>, x0: u32, x1: u32) -> ConceptHeatmap {
        ConceptHeatmap::from_fn(name, provider, score, (20, 20), |x, _| {
            if (x0..x1).contains(&x) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn soft(name: &str, value: f64) -> ConceptHeatmap {
        ConceptHeatmap::from_fn(name, Provider::TextPromptedSegmentation, None, (20, 20), |_, _| value).unwrap()
    }

    #[test]
    fn confident_instance_mask_selected() {
        // 4 of 20 columns: area fraction 0.2.
        let mask = block("flower", Provider::InstanceMask, Some(0.9), 0, 4);
        let c = ConceptCandidates {
            name: "flower".into(),
            candidates: vec![soft("flower", 0.4), mask.clone()],
        };
        let out = fuse(&[c], &FusionThresholds::default()).unwrap();
        assert_eq!(out.set.concepts[0].provider, Provider::InstanceMask);
        assert_eq!(out.set.concepts[0].values(), mask.values());
    }

    #[test]
    fn weak_instance_mask_falls_back_to_soft() {
        let c = ConceptCandidates {
            name: "stem".into(),
            candidates: vec![
                block("stem", Provider::InstanceMask, Some(0.2), 0, 4),
                soft("stem", 0.4),
            ],
        };
        let out = fuse(&[c], &FusionThresholds::default()).unwrap();
        assert_eq!(out.set.concepts[0].provider, Provider::TextPromptedSegmentation);
    }

    #[test]
    fn identical_masks_merge() {
        let a = ConceptCandidates {
            name: "a".into(),
            candidates: vec![block("a", Provider::File, None, 0, 10)],
        };
        let b = ConceptCandidates {
            name: "b".into(),
            candidates: vec![block("b", Provider::File, None, 0, 10)],
        };
        let c = ConceptCandidates {
            name: "c".into(),
            candidates: vec![block("c", Provider::File, None, 10, 20)],
        };
        let out = fuse(&[a, b, c], &FusionThresholds::default()).unwrap();
        assert_eq!(out.set.names(), vec!["a", "c"]);
    }

    #[test]
    fn merge_takes_elementwise_max() {
        let mut strong = block("a", Provider::File, None, 0, 10);
        strong.values[0] = 0.7;
        let weak = ConceptHeatmap::from_fn(
            "b",
            Provider::File,
            None,
            (20, 20),
            |x, _| {
                if x < 10 {
                    0.8
                } else {
                    0.3
                }
            },
        )
        .unwrap();
        let out = fuse(
            &[
                ConceptCandidates {
                    name: "a".into(),
                    candidates: vec![strong],
                },
                ConceptCandidates {
                    name: "b".into(),
                    candidates: vec![weak],
                },
            ],
            &FusionThresholds::default(),
        )
        .unwrap();
        assert_eq!(out.set.len(), 1);
        let merged = &out.set.concepts[0];
        assert_eq!(merged.name, "a");
        assert_eq!(merged.get(0, 0), 0.8);
        assert_eq!(merged.get(1, 0), 1.0);
        assert_eq!(merged.get(15, 0), 0.3);
    }

    #[test]
    fn empty_heatmap_dropped_with_warning() {
        let out = fuse(
            &[
                ConceptCandidates {
                    name: "blank".into(),
                    candidates: vec![soft("blank", 0.0)],
                },
                ConceptCandidates {
                    name: "sky".into(),
                    candidates: vec![soft("sky", 0.6)],
                },
            ],
            &FusionThresholds::default(),
        )
        .unwrap();
        assert_eq!(out.set.names(), vec!["sky"]);
        assert!(out.warnings.iter().any(|w| w.contains("blank")));
    }

    #[test]
    fn zero_candidates_is_error() {
        let r = fuse(
            &[ConceptCandidates {
                name: "x".into(),
                candidates: vec![],
            }],
            &FusionThresholds::default(),
        );
        assert!(matches!(r, Err(Error::Heatmap(_))));
    }

    #[test]
    fn bilinear_upsample_of_ramp() {
        // Ramp v(x) = x / 10 on 11 columns, upsampled to 22.
        let src: Vec<f64> = (0..2).flat_map(|_| (0..11).map(|x| x as f64 / 10.0)).collect();
        let out = resize_bilinear(&src, 11, 2, 22, 4);
        for x in 0..22u32 {
            // Oracle: the source coordinate of output pixel centre x, clamped to the grid.
            let s = ((x as f64 + 0.5) * 0.5 - 0.5).clamp(0.0, 10.0);
            for y in 0..4 {
                assert!((out[(y * 22 + x) as usize] - s / 10.0).abs() < 1e-12);
            }
        }
        // Corners clamp to the source corners.
        assert_eq!(out[0], 0.0);
        assert_eq!(out[21], 1.0);
    }

    #[test]
    fn manifest_roundtrip_and_resize() {
        let dir = tempfile::tempdir().unwrap();
        let concepts: Vec<ConceptCandidates> = ["head", "stem", "leaf"]
            .iter()
            .enumerate()
            .map(|(i, n)| ConceptCandidates {
                name: n.to_string(),
                candidates: vec![block(
                    n,
                    Provider::InstanceMask,
                    Some(0.5),
                    i as u32 * 5,
                    i as u32 * 5 + 5,
                )],
            })
            .collect();
        let manifest = write_heatmaps(dir.path(), 20, &concepts).unwrap();
        let loaded = load_heatmaps(&manifest, 20).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded[1].candidates[0].values(), concepts[1].candidates[0].values());
        assert_eq!(loaded[1].candidates[0].score, Some(0.5));
        let bigger = load_heatmaps(&manifest, 40).unwrap();
        assert_eq!(bigger[0].candidates[0].dimensions(), (40, 40));
    }

    #[test]
    fn missing_png_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"render_size": 8, "concepts": [{"name": "a", "candidates": [{"provider": "file", "score": null, "png": "nope.png"}]}]}"#,
        )
        .unwrap();
        let err = load_heatmaps(&path, 8).unwrap_err();
        assert!(err.to_string().contains("nope.png"), "{err}");
    }

    proptest! {
        #[test]
        fn instance_selection_predicate(score in 0.0f64..1.0, area in 0.0f64..1.0) {
            let t = FusionThresholds::default();
            let expected = score >= 0.3 && (0.005..=0.95).contains(&area);
            prop_assert_eq!(t.accepts_instance(score, area), expected);
        }

        #[test]
        fn merging_never_grows_and_stays_in_range(cuts in proptest::collection::vec((0u32..20, 1u32..20), 1..6)) {
            let cands: Vec<ConceptCandidates> = cuts
                .iter()
                .enumerate()
                .map(|(i, &(a, len))| {
                    let name = format!("c{i}");
                    ConceptCandidates {
                        name: name.clone(),
                        candidates: vec![block(&name, Provider::File, None, a, (a + len).min(20))],
                    }
                })
                .collect();
            let out = fuse(&cands, &FusionThresholds::default()).unwrap();
            prop_assert!(out.set.len() <= cands.len());
            prop_assert!(out.set.concepts.iter().all(|c| c.values().iter().all(|v| (0.0..=1.0).contains(v))));
            let again = fuse(&cands, &FusionThresholds::default()).unwrap();
            prop_assert_eq!(out, again);
        }
    }
}
