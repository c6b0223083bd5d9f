//! Synthetic artifact injection and detection.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::raster::{self, Raster, RenderSettings};
use crate::scoring::{loo_analyze, LooOptions, SimilarityBackend};
use crate::svg::{ElementKind, SvgDocument, VisualElement};

pub const DEFAULT_ARTIFACTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    RandomShape,
    StrayPath,
    DuplicateWithOffset,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 3] = [
        ArtifactKind::RandomShape,
        ArtifactKind::StrayPath,
        ArtifactKind::DuplicateWithOffset,
    ];
}

#[derive(Debug, Clone)]
pub struct InjectionRecord {
    pub source: SvgDocument,
    pub injected: SvgDocument,
    /// Indices of the artifacts in `injected`, ascending.
    pub truth: Vec<usize>,
    /// Artifact kinds in insertion order.
    pub kinds: Vec<ArtifactKind>,
    pub seed: u64,
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> String {
    let [r, g, b]: [u8; 3] = rng.random();
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn attrs(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn random_shape(doc: &SvgDocument, rng: &mut ChaCha8Rng) -> VisualElement {
    let vb = doc.viewbox();
    let area = rng.random_range(0.02..=0.15) * vb.width * vb.height;
    let aspect: f64 = rng.random_range(0.5..=2.0);
    let fill = random_color(rng);
    if rng.random_bool(0.5) {
        let w = (area * aspect).sqrt().min(vb.width);
        let h = (area / w).min(vb.height);
        let x = vb.x + rng.random_range(0.0..=vb.width - w);
        let y = vb.y + rng.random_range(0.0..=vb.height - h);
        VisualElement::new(
            ElementKind::Rect,
            attrs(&[
                ("x", num(x)),
                ("y", num(y)),
                ("width", num(w)),
                ("height", num(h)),
                ("fill", fill),
            ]),
        )
    } else {
        let rx = (area / std::f64::consts::PI * aspect).sqrt().min(vb.width / 2.0);
        let ry = (area / std::f64::consts::PI / rx).min(vb.height / 2.0);
        let cx = vb.x + rx + rng.random_range(0.0..=vb.width - 2.0 * rx);
        let cy = vb.y + ry + rng.random_range(0.0..=vb.height - 2.0 * ry);
        VisualElement::new(
            ElementKind::Ellipse,
            attrs(&[
                ("cx", num(cx)),
                ("cy", num(cy)),
                ("rx", num(rx)),
                ("ry", num(ry)),
                ("fill", fill),
            ]),
        )
    }
}

fn stray_path(doc: &SvgDocument, rng: &mut ChaCha8Rng) -> VisualElement {
    let vb = doc.viewbox();
    let segments = rng.random_range(3..=6);
    let mut d = String::new();
    for k in 0..=segments {
        let x = vb.x + rng.random_range(0.05..=0.95) * vb.width;
        let y = vb.y + rng.random_range(0.05..=0.95) * vb.height;
        d.push_str(&format!("{}{} {}", if k == 0 { "M" } else { " L" }, num(x), num(y)));
    }
    let width = rng.random_range(0.015..=0.03) * vb.width.max(vb.height);
    VisualElement::new(
        ElementKind::Path,
        attrs(&[
            ("d", d),
            ("fill", "none".into()),
            ("stroke", random_color(rng)),
            ("stroke-width", num(width)),
            ("stroke-linecap", "round".into()),
            ("stroke-linejoin", "round".into()),
        ]),
    )
}

fn duplicate(doc: &SvgDocument, originals: &[usize], rng: &mut ChaCha8Rng) -> VisualElement {
    let vb = doc.viewbox();
    let pick = originals[rng.random_range(0..originals.len())];
    let mut clone = doc.elements()[pick].clone();
    clone.attributes.remove("id");
    clone.origin = crate::svg::Origin::Synthetic;
    let mut offset = |extent: f64| {
        let magnitude = rng.random_range(0.05..=0.15) * extent;
        if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        }
    };
    let dx = offset(vb.width);
    let dy = offset(vb.height);
    clone.prepend_transform(&format!("translate({} {})", num(dx), num(dy)));
    clone
}

/// Inserts `count` artifacts at random z-positions.
pub fn inject(doc: &SvgDocument, count: usize, seed: u64) -> Result<InjectionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds_available: &[ArtifactKind] = if doc.is_empty() {
        &ArtifactKind::ALL[..2]
    } else {
        &ArtifactKind::ALL
    };
    let start = rng.random_range(0..kinds_available.len());
    let mut current = doc.clone();
    let mut truth: Vec<usize> = Vec::new();
    let mut kinds = Vec::with_capacity(count);
    for k in 0..count {
        let kind = kinds_available[(start + k) % kinds_available.len()];
        let element = match kind {
            ArtifactKind::RandomShape => random_shape(&current, &mut rng),
            ArtifactKind::StrayPath => stray_path(&current, &mut rng),
            ArtifactKind::DuplicateWithOffset => {
                let originals: Vec<usize> = (0..current.len()).filter(|i| !truth.contains(i)).collect();
                duplicate(&current, &originals, &mut rng)
            }
        };
        let position = rng.random_range(0..=current.len());
        for t in truth.iter_mut() {
            if *t >= position {
                *t += 1;
            }
        }
        truth.push(position);
        current = current.insert(position, element);
        kinds.push(kind);
    }
    truth.sort_unstable();
    Ok(InjectionRecord {
        source: doc.clone(),
        injected: current,
        truth,
        kinds,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMethod {
    Loo,
    PrefixDelta,
    IsolatedScore,
    Random,
}

impl DetectionMethod {
    pub const ALL: [DetectionMethod; 4] = [
        DetectionMethod::Loo,
        DetectionMethod::PrefixDelta,
        DetectionMethod::IsolatedScore,
        DetectionMethod::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionMethod::Loo => "loo",
            DetectionMethod::PrefixDelta => "prefix-delta",
            DetectionMethod::IsolatedScore => "isolated-score",
            DetectionMethod::Random => "random",
        }
    }
}

impl fmt::Display for DetectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .or((s == "isolated").then_some(DetectionMethod::IsolatedScore))
            .ok_or_else(|| Error::Config(format!("unknown detection method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub render: RenderSettings,
    pub k: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            render: RenderSettings::default(),
            k: DEFAULT_ARTIFACTS,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub method: DetectionMethod,
    pub flagged: Vec<usize>,
    /// Per-element scores the method ranked by; empty for `random`.
    pub scores: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub delta_ssim: f64,
}

/// Indices of the `k` lowest scores, ties to the lower index; returned ascending.
pub fn flag_lowest(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut flagged: Vec<usize> = order.into_iter().take(k).collect();
    flagged.sort_unstable();
    flagged
}

pub fn precision_recall_f1(flagged: &[usize], truth: &[usize]) -> (f64, f64, f64) {
    let hits = flagged.iter().filter(|i| truth.contains(i)).count() as f64;
    let precision = if flagged.is_empty() {
        0.0
    } else {
        hits / flagged.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        hits / truth.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Per-element scores for a ranking method; lower means more likely an artifact.
pub fn method_scores(
    doc: &SvgDocument,
    reference: &Raster,
    method: DetectionMethod,
    backend: &SimilarityBackend,
    options: &DetectOptions,
) -> Result<Option<Vec<f64>>> {
    let render = &options.render;
    match method {
        DetectionMethod::Loo => {
            let loo = LooOptions {
                render: *render,
                workers: options.workers,
                ..LooOptions::default()
            };
            Ok(Some(loo_analyze(doc, reference, backend, &loo)?.deltas()))
        }
        DetectionMethod::PrefixDelta => {
            let scorer = backend.prepare(reference)?;
            let prefix_scores = map_indexed(options.workers, doc.len() + 1, |len| {
                scorer.score(&render.render(&doc.prefix(len))?)
            })?;
            Ok(Some(prefix_scores.windows(2).map(|w| w[1] - w[0]).collect()))
        }
        DetectionMethod::IsolatedScore => {
            let scorer = backend.prepare(reference)?;
            let scores = map_indexed(options.workers, doc.len(), |i| {
                scorer.score(&render.render(&doc.only(&[i]))?)
            })?;
            Ok(Some(scores))
        }
        DetectionMethod::Random => Ok(None),
    }
}

/// Flags `k` elements with `method` and scores the flags against `truth`.
pub fn detect(
    doc: &SvgDocument,
    reference: &Raster,
    truth: &[usize],
    method: DetectionMethod,
    backend: &SimilarityBackend,
    options: &DetectOptions,
) -> Result<DetectionResult> {
    if doc.len() < options.k {
        return Err(Error::Config(format!(
            "cannot flag {} of {} elements",
            options.k,
            doc.len()
        )));
    }
    let scores = method_scores(doc, reference, method, backend, options)?;
    let flagged = match &scores {
        Some(s) => flag_lowest(s, options.k),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            let mut picked = index::sample(&mut rng, doc.len(), options.k).into_vec();
            picked.sort_unstable();
            picked
        }
    };
    let (precision, recall, f1) = precision_recall_f1(&flagged, truth);
    let before = raster::ssim(&options.render.render(doc)?, reference)?;
    let after = raster::ssim(&options.render.render(&doc.without(&flagged))?, reference)?;
    Ok(DetectionResult {
        method,
        flagged,
        scores: scores.unwrap_or_default(),
        precision,
        recall,
        f1,
        delta_ssim: after - before,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> SvgDocument {
        SvgDocument::parse(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 100 100">{body}</svg>"#
        ))
        .unwrap()
    }

    fn grid() -> SvgDocument {
        let body: String = (0..6)
            .map(|i| {
                format!(
                    r##"<rect x="{}" y="{}" width="12" height="12" fill="#336699"/>"##,
                    5 + (i % 3) * 32,
                    10 + (i / 3) * 50
                )
            })
            .collect();
        doc(&body)
    }

    #[test]
    fn zero_count_is_identity() {
        let d = grid();
        let r = inject(&d, 0, 3).unwrap();
        assert!(r.truth.is_empty());
        assert_eq!(r.injected.to_svg_string(), d.to_svg_string());
    }

    #[test]
    fn same_seed_same_injection() {
        let d = grid();
        let a = inject(&d, 3, 11).unwrap();
        let b = inject(&d, 3, 11).unwrap();
        assert_eq!(a.injected.to_svg_string(), b.injected.to_svg_string());
        assert_eq!(a.truth, b.truth);
        let c = inject(&d, 3, 12).unwrap();
        assert_ne!(a.injected.to_svg_string(), c.injected.to_svg_string());
    }

    #[test]
    fn truth_points_at_synthetic_elements() {
        let d = grid();
        for seed in 0..20 {
            let r = inject(&d, 3, seed).unwrap();
            assert_eq!(r.injected.len(), d.len() + 3);
            assert_eq!(r.truth.len(), 3);
            let originals: Vec<usize> = (0..r.injected.len()).filter(|i| !r.truth.contains(i)).collect();
            // Removing the artifacts restores the source element list.
            let cleaned = r.injected.only(&originals);
            assert_eq!(cleaned.to_svg_string(), d.to_svg_string());
        }
    }

    #[test]
    fn kinds_cycle_through_all_three() {
        let r = inject(&grid(), 3, 5).unwrap();
        let mut kinds = r.kinds.clone();
        kinds.sort_by_key(|k| *k as u8);
        assert_eq!(kinds, ArtifactKind::ALL);
    }

    #[test]
    fn empty_document_skips_duplicates() {
        let empty = grid().only(&[]);
        let r = inject(&empty, 4, 1).unwrap();
        assert!(!r.kinds.contains(&ArtifactKind::DuplicateWithOffset));
        assert_eq!(r.injected.len(), 4);
    }

    #[test]
    fn injection_changes_render() {
        let d = grid();
        let settings = RenderSettings::new(64);
        let r = inject(&d, 3, 2).unwrap();
        let diff = raster::abs_diff(&settings.render(&d).unwrap(), &settings.render(&r.injected).unwrap()).unwrap();
        assert!(diff.mass() > 0.0);
    }

    #[test]
    fn flag_ties_prefer_lower_index() {
        assert_eq!(flag_lowest(&[0.0, -1.0, 0.0, 0.0, -1.0], 3), vec![0, 1, 4]);
    }

    #[test]
    fn equal_sizes_give_equal_scores() {
        let (p, r, f) = precision_recall_f1(&[1, 2, 3], &[2, 3, 9]);
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(p, r);
        assert!((f - p).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in DetectionMethod::ALL {
            assert_eq!(m.as_str().parse::<DetectionMethod>().unwrap(), m);
        }
        assert!("clip".parse::<DetectionMethod>().is_err());
    }

    #[test]
    fn loo_flags_separable_blobs() {
        let clean = grid();
        let settings = RenderSettings::new(64);
        let reference = settings.render(&clean).unwrap();
        let blob = |x: u32| {
            VisualElement::new(
                ElementKind::Rect,
                attrs(&[
                    ("x", x.to_string()),
                    ("y", "30".into()),
                    ("width", "20".into()),
                    ("height", "20".into()),
                    ("fill", "#ff00ff".into()),
                ]),
            )
        };
        let injected = clean.insert(6, blob(0)).insert(2, blob(40)).insert(0, blob(75));
        let truth = vec![0, 3, 8];
        let options = DetectOptions {
            render: settings,
            ..DetectOptions::default()
        };
        let r = detect(
            &injected,
            &reference,
            &truth,
            DetectionMethod::Loo,
            &SimilarityBackend::NegMse,
            &options,
        )
        .unwrap();
        assert_eq!(r.flagged, truth);
        assert_eq!(r.f1, 1.0);
        assert!(r.delta_ssim > 0.0);
        let all = ["loo", "prefix-delta", "isolated-score", "random"];
        for name in all {
            let m: DetectionMethod = name.parse().unwrap();
            let r = detect(&injected, &reference, &truth, m, &SimilarityBackend::NegMse, &options).unwrap();
            assert_eq!(r.flagged.len(), 3);
            assert!((0.0..=1.0).contains(&r.f1));
        }
    }

    #[test]
    fn too_few_elements_rejected() {
        let d = grid().only(&[0, 1]);
        let settings = RenderSettings::new(32);
        let reference = settings.render(&d).unwrap();
        let options = DetectOptions {
            render: settings,
            ..DetectOptions::default()
        };
        assert!(detect(
            &d,
            &reference,
            &[],
            DetectionMethod::Random,
            &SimilarityBackend::NegMse,
            &options
        )
        .is_err());
    }
}
