//! Seeded synthetic documents and concept heatmaps for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::concepts::{ConceptCandidates, ConceptHeatmap, Provider};
use crate::svg::SvgDocument;

const PALETTE: [&str; 8] = [
    "#2f4858", "#33658a", "#86bbd8", "#758e4f", "#f6ae2d", "#f26419", "#6d597a", "#b56576",
];

fn wrap(view: u32, body: &str) -> SvgDocument {
    SvgDocument::parse(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {view} {view}">{body}</svg>"#
    ))
    .expect("generated markup parses")
}

fn r1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Relative-command body for one closed subpath spanning roughly `s` units.
fn closed_subpath(rng: &mut ChaCha8Rng, s: f64) -> String {
    let a = r1(s * rng.random_range(0.6..=1.0));
    let b = r1(s * rng.random_range(0.6..=1.0));
    match rng.random_range(0..4) {
        0 => format!("h{a} v{b} h{} z", -a),
        1 => format!("l{a} 0 l{} {b} z", r1(-a / 2.0)),
        2 => format!("q{} {} {a} 0 l0 {b} l{} 0 z", r1(a / 2.0), r1(-b / 4.0), -a),
        _ => {
            let r = r1(a / 2.0);
            format!("a{r} {r} 0 1 0 {} 0 a{r} {r} 0 1 0 {} 0 z", 2.0 * r, -2.0 * r)
        }
    }
}

/// Open relative polyline; returns the body and its end offset.
fn open_subpath(rng: &mut ChaCha8Rng, s: f64) -> (String, (f64, f64)) {
    let a = r1(s * rng.random_range(0.5..=1.0));
    let b = r1(s * rng.random_range(0.5..=1.0));
    (format!("l{a} {b} l{} 0", r1(-a / 2.0)), (r1(a / 2.0), b))
}

/// One document holding 1–3 compound paths whose subpaths sit in disjoint cells.
fn compound_document(rng: &mut ChaCha8Rng) -> SvgDocument {
    let mut cells: Vec<(f64, f64)> = (0..16)
        .map(|c| ((c % 4) as f64 * 25.0, (c / 4) as f64 * 25.0))
        .collect();
    let mut body = String::new();
    for _ in 0..rng.random_range(1..=3) {
        let stroke_only = rng.random_bool(0.25);
        let n = rng.random_range(2..=5).min(cells.len());
        let mut d = String::new();
        let mut cur = (0.0, 0.0);
        for k in 0..n {
            let (cx, cy) = cells.remove(rng.random_range(0..cells.len()));
            let start = (
                cx + r1(rng.random_range(4.0..=7.0)),
                cy + r1(rng.random_range(4.0..=7.0)),
            );
            if k == 0 || rng.random_bool(0.3) {
                d.push_str(&format!("M{} {} ", start.0, start.1));
            } else {
                d.push_str(&format!("m{} {} ", r1(start.0 - cur.0), r1(start.1 - cur.1)));
            }
            if stroke_only {
                let (seg, end) = open_subpath(rng, 12.0);
                d.push_str(&seg);
                cur = (r1(start.0 + end.0), r1(start.1 + end.1));
            } else {
                d.push_str(&closed_subpath(rng, 12.0));
                cur = start;
            }
            d.push(' ');
        }
        let color = PALETTE[rng.random_range(0..PALETTE.len())];
        let paint = if stroke_only {
            format!(r#"fill="none" stroke="{color}" stroke-width="2""#)
        } else {
            format!(r#"fill="{color}""#)
        };
        body.push_str(&format!(r#"<path d="{}" {paint}/>"#, d.trim_end()));
    }
    wrap(100, &body)
}

/// Documents of compound paths written with relative `m` continuations.
pub fn compound_path_corpus(count: usize, seed: u64) -> Vec<SvgDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| compound_document(&mut rng)).collect()
}

/// Compound paths whose subpaths cut holes into each other.
pub fn hole_cases() -> Vec<SvgDocument> {
    vec![
        wrap(
            100,
            r##"<path fill-rule="evenodd" fill="#33658a" d="M10 10h60v60h-60z m15 15h30v30h-30z"/>"##,
        ),
        wrap(
            100,
            r##"<path fill="#758e4f" d="M10 10h60v60h-60z M25 25v30h30v-30z"/>"##,
        ),
    ]
}

/// Opaque shapes in distinct cells of a 5×5 grid on a 200×200 canvas.
pub fn separable_document(seed: u64) -> SvgDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(6..=12);
    let picked = rand::seq::index::sample(&mut rng, 25, count).into_vec();
    let mut body = String::new();
    for cell in picked {
        let x0 = (cell % 5) as f64 * 40.0 + 20.0 + rng.random_range(-4.0..=4.0);
        let y0 = (cell / 5) as f64 * 40.0 + 20.0 + rng.random_range(-4.0..=4.0);
        let (cx, cy) = (r1(x0), r1(y0));
        let s = r1(rng.random_range(8.0..=12.0));
        let fill = PALETTE[rng.random_range(0..PALETTE.len())];
        let shape = match rng.random_range(0..4) {
            0 => format!(
                r#"<rect x="{}" y="{}" width="{}" height="{}""#,
                cx - s,
                cy - s,
                2.0 * s,
                2.0 * s
            ),
            1 => format!(r#"<circle cx="{cx}" cy="{cy}" r="{s}""#),
            2 => format!(r#"<ellipse cx="{cx}" cy="{cy}" rx="{s}" ry="{}""#, r1(s * 0.6)),
            _ => format!(
                r#"<polygon points="{cx},{} {},{} {},{}""#,
                cy - s,
                cx + s,
                cy + s,
                cx - s,
                cy + s
            ),
        };
        body.push_str(&format!(r#"{shape} fill="{fill}"/>"#));
    }
    wrap(200, &body)
}

pub fn separable_corpus(count: usize, seed: u64) -> Vec<SvgDocument> {
    (0..count as u64)
        .map(|k| separable_document(seed.wrapping_mul(1_000_003).wrapping_add(k)))
        .collect()
}

/// A document with concept heatmaps, sized for one render size.
#[derive(Debug, Clone)]
pub struct ConceptCase {
    pub document: SvgDocument,
    pub concepts: Vec<ConceptCandidates>,
}

/// One confident instance mask per vertical third of the canvas.
pub fn stripe_concepts(names: &[&str], render_size: u32) -> Vec<ConceptCandidates> {
    let n = names.len() as u32;
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mask = ConceptHeatmap::from_fn(
                *name,
                Provider::InstanceMask,
                Some(0.9),
                (render_size, render_size),
                |x, _| {
                    if x * n / render_size == j as u32 {
                        1.0
                    } else {
                        0.0
                    }
                },
            )
            .expect("values in range");
            ConceptCandidates {
                name: name.to_string(),
                candidates: vec![mask],
            }
        })
        .collect()
}

const CONCEPT_NAMES: [&str; 3] = ["sun", "tree", "house"];
const CONCEPT_COLORS: [&str; 3] = ["#f6ae2d", "#758e4f", "#b56576"];

fn concept_body() -> String {
    let mut body = String::new();
    for (j, color) in CONCEPT_COLORS.iter().enumerate() {
        body.push_str(&format!(
            r#"<rect x="{}" y="40" width="40" height="50" fill="{color}"/>"#,
            j * 100 + 30
        ));
    }
    for (j, color) in CONCEPT_COLORS.iter().enumerate() {
        body.push_str(&format!(
            r#"<circle cx="{}" cy="190" r="25" fill="{color}"/>"#,
            j * 100 + 50
        ));
    }
    body
}

/// Three concepts, each drawn by two elements lying wholly inside its own third.
/// Element paint order interleaves the concepts.
pub fn isolated_concepts(render_size: u32) -> ConceptCase {
    ConceptCase {
        document: wrap(300, &concept_body()),
        concepts: stripe_concepts(&CONCEPT_NAMES, render_size),
    }
}

/// As [`isolated_concepts`] plus one bar split 60/40 between the first two thirds.
pub fn entangled_concepts(render_size: u32) -> ConceptCase {
    let body = format!(
        r#"{}<rect x="40" y="250" width="100" height="35" fill="{}"/>"#,
        concept_body(),
        CONCEPT_COLORS[0]
    );
    ConceptCase {
        document: wrap(300, &body),
        concepts: stripe_concepts(&CONCEPT_NAMES, render_size),
    }
}

/// Two squares in opposite halves with one concept per half.
pub fn two_concepts(render_size: u32) -> ConceptCase {
    ConceptCase {
        document: wrap(
            100,
            r##"<rect x="10" y="30" width="30" height="30" fill="#33658a"/><rect x="60" y="30" width="30" height="30" fill="#f26419"/>"##,
        ),
        concepts: stripe_concepts(&["left", "right"], render_size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::ElementKind;

    #[test]
    fn compound_corpus_is_deterministic_and_compound() {
        let a = compound_path_corpus(20, 1);
        let b = compound_path_corpus(20, 1);
        assert_eq!(a.len(), 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_svg_string(), y.to_svg_string());
        }
        assert!(a.iter().all(|d| d.split_subpaths().unwrap().len() > d.len()));
        let relative = a
            .iter()
            .flat_map(|d| d.elements())
            .filter(|e| e.attr("d").is_some_and(|d| d.contains(" m")))
            .count();
        assert!(relative > 5);
    }

    #[test]
    fn separable_documents_vary() {
        let docs = separable_corpus(10, 3);
        assert!(docs.iter().all(|d| (6..=12).contains(&d.len())));
        assert_ne!(docs[0].to_svg_string(), docs[1].to_svg_string());
        assert!(docs
            .iter()
            .flat_map(|d| d.elements())
            .any(|e| e.kind == ElementKind::Polygon));
    }

    #[test]
    fn stripes_partition_the_canvas() {
        let c = stripe_concepts(&CONCEPT_NAMES, 96);
        for x in 0..96 {
            let owners: Vec<usize> = (0..3).filter(|&j| c[j].candidates[0].get(x, 5) == 1.0).collect();
            assert_eq!(owners.len(), 1);
        }
        assert!((c[0].candidates[0].area_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn concept_cases_shapes() {
        assert_eq!(isolated_concepts(64).document.len(), 6);
        assert_eq!(entangled_concepts(64).document.len(), 7);
        assert_eq!(two_concepts(64).concepts.len(), 2);
    }
}
