//! Compound path splitting.
//!
//! A fragment starts at a moveto. Only that moveto is rewritten (to absolute
//! coordinates of the current point); every later command in the fragment is
//! copied as written, since relative commands resolve against the same current
//! point whether the fragment is drawn alone or in context.

use std::fmt::Write as _;

use svgtypes::{PathParser, PathSegment};

use super::{ElementKind, Origin, SvgDocument, VisualElement};
use crate::error::{Error, Result};

/// Number of moveto commands in path data.
pub fn count_movetos(d: &str) -> Result<usize, String> {
    let mut n = 0;
    for seg in PathParser::from(d) {
        if let PathSegment::MoveTo { .. } = seg.map_err(|e| e.to_string())? {
            n += 1;
        }
    }
    Ok(n)
}

/// Splits path data into one self-contained string per moveto.
pub fn split_path_data(d: &str) -> Result<Vec<String>, String> {
    let mut fragments: Vec<String> = Vec::new();
    let (mut cx, mut cy) = (0.0f64, 0.0f64);
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    let mut seen_move = false;

    for seg in PathParser::from(d) {
        let seg = seg.map_err(|e| e.to_string())?;
        if !seen_move && !matches!(seg, PathSegment::MoveTo { .. }) {
            return Err("path data must begin with a moveto".into());
        }
        match seg {
            PathSegment::MoveTo { abs, x, y } => {
                seen_move = true;
                let (px, py) = if abs { (x, y) } else { (cx + x, cy + y) };
                fragments.push(format!("M{px} {py}"));
                (cx, cy) = (px, py);
                (sx, sy) = (px, py);
            }
            other => {
                let out = fragments.last_mut().expect("moveto seen");
                write_segment(out, &other);
                (cx, cy) = advance(&other, (cx, cy), (sx, sy));
            }
        }
    }
    Ok(fragments)
}

fn letter(abs: bool, upper: char) -> char {
    if abs {
        upper
    } else {
        upper.to_ascii_lowercase()
    }
}

fn write_segment(out: &mut String, seg: &PathSegment) {
    let _ = match *seg {
        PathSegment::MoveTo { .. } => unreachable!("handled by caller"),
        PathSegment::LineTo { abs, x, y } => write!(out, "{}{x} {y}", letter(abs, 'L')),
        PathSegment::HorizontalLineTo { abs, x } => write!(out, "{}{x}", letter(abs, 'H')),
        PathSegment::VerticalLineTo { abs, y } => write!(out, "{}{y}", letter(abs, 'V')),
        PathSegment::CurveTo {
            abs,
            x1,
            y1,
            x2,
            y2,
            x,
            y,
        } => write!(out, "{}{x1} {y1} {x2} {y2} {x} {y}", letter(abs, 'C')),
        PathSegment::SmoothCurveTo { abs, x2, y2, x, y } => {
            write!(out, "{}{x2} {y2} {x} {y}", letter(abs, 'S'))
        }
        PathSegment::Quadratic { abs, x1, y1, x, y } => {
            write!(out, "{}{x1} {y1} {x} {y}", letter(abs, 'Q'))
        }
        PathSegment::SmoothQuadratic { abs, x, y } => write!(out, "{}{x} {y}", letter(abs, 'T')),
        PathSegment::EllipticalArc {
            abs,
            rx,
            ry,
            x_axis_rotation,
            large_arc,
            sweep,
            x,
            y,
        } => write!(
            out,
            "{}{rx} {ry} {x_axis_rotation} {} {} {x} {y}",
            letter(abs, 'A'),
            large_arc as u8,
            sweep as u8
        ),
        PathSegment::ClosePath { abs } => write!(out, "{}", letter(abs, 'Z')),
    };
}

fn advance(seg: &PathSegment, cur: (f64, f64), start: (f64, f64)) -> (f64, f64) {
    let (cx, cy) = cur;
    let to = |abs: bool, x: f64, y: f64| if abs { (x, y) } else { (cx + x, cy + y) };
    match *seg {
        PathSegment::MoveTo { abs, x, y }
        | PathSegment::LineTo { abs, x, y }
        | PathSegment::CurveTo { abs, x, y, .. }
        | PathSegment::SmoothCurveTo { abs, x, y, .. }
        | PathSegment::Quadratic { abs, x, y, .. }
        | PathSegment::SmoothQuadratic { abs, x, y }
        | PathSegment::EllipticalArc { abs, x, y, .. } => to(abs, x, y),
        PathSegment::HorizontalLineTo { abs, x } => (if abs { x } else { cx + x }, cy),
        PathSegment::VerticalLineTo { abs, y } => (cx, if abs { y } else { cy + y }),
        PathSegment::ClosePath { .. } => start,
    }
}

fn element_label(el: &VisualElement) -> String {
    match el.attr("id") {
        Some(id) => format!("#{} (<{}> at index {})", id, el.kind, el.index),
        None => format!("<{}> at index {}", el.kind, el.index),
    }
}

pub(super) fn split_document(doc: &SvgDocument, mut accept: impl FnMut(usize) -> bool) -> Result<SvgDocument> {
    let mut out = Vec::with_capacity(doc.len());
    for el in doc.elements() {
        if el.kind != ElementKind::Path {
            out.push(el.clone());
            continue;
        }
        let d = el.attr("d").unwrap_or("");
        let path_error = |message: String| Error::PathData {
            element: element_label(el),
            message,
        };
        let movetos = count_movetos(d).map_err(path_error)?;
        if movetos < 2 || !accept(el.index) {
            out.push(el.clone());
            continue;
        }
        let fragments = split_path_data(d).map_err(path_error)?;
        let (parent, span) = match &el.origin {
            Origin::Node { node, span } => (*node, span.clone()),
            Origin::SubpathSplit { parent, span, .. } => (*parent, span.clone()),
            Origin::Synthetic => (usize::MAX, 0..0),
        };
        for (ordinal, fragment) in fragments.into_iter().enumerate() {
            let mut piece = el.clone();
            piece.set_attr("d", fragment);
            if ordinal > 0 {
                piece.attributes.remove("id");
            }
            if el.origin != Origin::Synthetic {
                piece.origin = Origin::SubpathSplit {
                    parent,
                    span: span.clone(),
                    ordinal,
                };
            }
            out.push(piece);
        }
    }
    Ok(doc.with_elements(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> SvgDocument {
        SvgDocument::parse(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 20 20">{body}</svg>"#
        ))
        .unwrap()
    }

    #[test]
    fn two_movetos_two_elements() {
        let d = doc(r#"<path d="M0 0 L1 0 M5 5 L6 5" fill="red"/>"#);
        let s = d.split_subpaths().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.elements()[0].attr("d"), Some("M0 0L1 0"));
        assert_eq!(s.elements()[1].attr("d"), Some("M5 5L6 5"));
        assert!(s.elements().iter().all(|e| e.attr("fill") == Some("red")));
    }

    #[test]
    fn single_moveto_unchanged() {
        let d = doc(r#"<path d="m 1,1 l 2 2 z"/>"#);
        let s = d.split_subpaths().unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.elements()[0].attr("d"), Some("m 1,1 l 2 2 z"));
    }

    #[test]
    fn relative_moveto_resolved_against_current_point() {
        let frags = split_path_data("m1 1 l2 0 l0 2 z m3 0 l1 1 m1 1 h2").unwrap();
        // After z the current point returns to (1,1); m3 0 -> (4,1);
        // l1 1 -> (5,2); m1 1 -> (6,3).
        assert_eq!(frags, vec!["M1 1l2 0l0 2z", "M4 1l1 1", "M6 3h2"]);
    }

    #[test]
    fn implicit_lineto_after_moveto_kept() {
        let frags = split_path_data("M0 0 10 0 10 10 M20 20 30 20").unwrap();
        assert_eq!(frags.len(), 2);
        assert_eq!(frags[0], "M0 0L10 0L10 10");
        assert_eq!(frags[1], "M20 20L30 20");
    }

    #[test]
    fn relative_implicit_lineto_after_relative_moveto() {
        let frags = split_path_data("M0 0 h1 m 2 2 3 3").unwrap();
        assert_eq!(frags, vec!["M0 0h1", "M3 2l3 3"]);
    }

    #[test]
    fn idempotent() {
        let d = doc(r#"<path d="M0 0 L1 0 M5 5 L6 5 m1 1 l1 1"/><rect width="1" height="1"/>"#);
        let once = d.split_subpaths().unwrap();
        let twice = once.split_subpaths().unwrap();
        assert_eq!(once.len(), twice.len());
        for (a, b) in once.elements().iter().zip(twice.elements()) {
            assert!(a.paint_eq(b));
        }
    }

    #[test]
    fn fragments_take_parent_position() {
        let d = doc(r#"<rect width="1" height="1"/><path id="p" d="M0 0h1M2 2h1M4 4h1"/><circle r="1"/>"#);
        let s = d.split_subpaths().unwrap();
        let kinds: Vec<ElementKind> = s.elements().iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ElementKind::Rect,
                ElementKind::Path,
                ElementKind::Path,
                ElementKind::Path,
                ElementKind::Circle
            ]
        );
        assert_eq!(s.elements()[1].attr("id"), Some("p"));
        assert_eq!(s.elements()[2].attr("id"), None);
        assert!(matches!(
            s.elements()[3].origin,
            Origin::SubpathSplit { ordinal: 2, .. }
        ));
    }

    #[test]
    fn bad_path_data_names_element() {
        let d = doc(r#"<path id="bad" d="M0 0 L1 0 M5 5 Q"/>"#);
        match d.split_subpaths() {
            Err(Error::PathData { element, .. }) => assert!(element.contains("#bad")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_fragment_begins_with_one_moveto() {
        let frags = split_path_data("M0 0 C1 1 2 2 3 3 S4 4 5 5 M1 1 Q2 2 3 3 T4 4 A1 1 0 1 0 5 5 z").unwrap();
        for f in &frags {
            assert_eq!(count_movetos(f).unwrap(), 1);
            assert!(f.starts_with('M'));
        }
    }
}
