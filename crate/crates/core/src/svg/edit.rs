use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SvgDocument, VisualElement};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    Color,
    Delete,
    Move,
    Scale,
    Regroup,
}

impl EditKind {
    pub const ALL: [EditKind; 5] = [
        EditKind::Color,
        EditKind::Delete,
        EditKind::Move,
        EditKind::Scale,
        EditKind::Regroup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EditKind::Color => "color",
            EditKind::Delete => "delete",
            EditKind::Move => "move",
            EditKind::Scale => "scale",
            EditKind::Regroup => "regroup",
        }
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An edit operation with exactly the parameters its kind needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EditOp {
    Color {
        rgb: [u8; 3],
    },
    Delete,
    /// Translation in user units.
    Move {
        dx: f64,
        dy: f64,
    },
    /// Uniform scale about the joint bounding-box center of the targets.
    Scale {
        factor: f64,
    },
    Regroup,
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::Color { .. } => EditKind::Color,
            EditOp::Delete => EditKind::Delete,
            EditOp::Move { .. } => EditKind::Move,
            EditOp::Scale { .. } => EditKind::Scale,
            EditOp::Regroup => EditKind::Regroup,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditSpec {
    pub op: EditOp,
    pub targets: Vec<usize>,
}

impl EditSpec {
    pub fn new(op: EditOp, targets: impl IntoIterator<Item = usize>) -> Self {
        EditSpec {
            op,
            targets: targets.into_iter().collect(),
        }
    }

    pub fn kind(&self) -> EditKind {
        self.op.kind()
    }
}

fn paints(value: Option<&str>) -> bool {
    matches!(value, Some(v) if v.trim() != "none")
}

fn recolor(el: &mut VisualElement, rgb: [u8; 3]) {
    let color = format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
    if !paints(el.attr("fill")) && paints(el.attr("stroke")) {
        el.set_attr("stroke", color);
    } else {
        el.set_attr("fill", color);
    }
}

pub(super) fn apply(doc: &SvgDocument, edit: &EditSpec) -> Result<SvgDocument> {
    let targets: BTreeSet<usize> = edit.targets.iter().copied().collect();
    if targets.len() != edit.targets.len() {
        return Err(Error::InvalidEdit("duplicate target indices".into()));
    }
    if let Some(&bad) = targets.iter().find(|&&i| i >= doc.len()) {
        return Err(Error::InvalidEdit(format!(
            "target {bad} out of range for {} elements",
            doc.len()
        )));
    }
    match edit.op {
        EditOp::Scale { factor } if !(factor > 0.0 && factor.is_finite()) => {
            return Err(Error::InvalidEdit(format!("scale factor {factor} must be > 0")));
        }
        EditOp::Move { dx, dy } if !(dx.is_finite() && dy.is_finite()) => {
            return Err(Error::InvalidEdit("non-finite translation".into()));
        }
        _ => {}
    }
    if targets.is_empty() {
        return Ok(doc.clone());
    }

    let mut elements: Vec<VisualElement> = doc.elements().to_vec();
    match edit.op {
        EditOp::Color { rgb } => {
            for &i in &targets {
                recolor(&mut elements[i], rgb);
            }
        }
        EditOp::Delete => {
            elements.retain(|e| !targets.contains(&e.index));
        }
        EditOp::Move { dx, dy } => {
            if dx != 0.0 || dy != 0.0 {
                let t = format!("translate({dx} {dy})");
                for &i in &targets {
                    elements[i].prepend_transform(&t);
                }
            }
        }
        EditOp::Scale { factor } => {
            let idx: Vec<usize> = targets.iter().copied().collect();
            if let Some(bb) = doc.bounding_box(&idx)? {
                let (cx, cy) = bb.center();
                let t = format!("translate({cx} {cy}) scale({factor}) translate({} {})", -cx, -cy);
                for &i in &targets {
                    elements[i].prepend_transform(&t);
                }
            }
        }
        EditOp::Regroup => {
            let first = *targets.iter().next().expect("non-empty");
            let group: Vec<VisualElement> = targets.iter().map(|&i| elements[i].clone()).collect();
            let mut reordered = Vec::with_capacity(elements.len());
            for el in elements {
                if el.index == first {
                    reordered.extend(group.iter().cloned());
                } else if !targets.contains(&el.index) {
                    reordered.push(el);
                }
            }
            elements = reordered;
        }
    }
    Ok(doc.with_elements(elements))
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

    fn nine() -> SvgDocument {
        let body: String = (0..9)
            .map(|i| format!(r#"<rect x="{}" width="1" height="1"/>"#, i * 10))
            .collect();
        doc(&body)
    }

    #[test]
    fn move_prepends_translation() {
        let d = doc(r#"<rect x="10" y="10" width="5" height="5" transform="rotate(10)"/>"#);
        let out = d
            .apply_edit(&EditSpec::new(EditOp::Move { dx: 20.0, dy: 0.0 }, [0]))
            .unwrap();
        assert_eq!(out.elements()[0].attr("transform"), Some("translate(20 0) rotate(10)"));
    }

    #[test]
    fn move_shifts_effective_position() {
        let d = doc(r#"<rect x="10" y="10" width="5" height="5"/>"#);
        let out = d
            .apply_edit(&EditSpec::new(EditOp::Move { dx: 20.0, dy: 0.0 }, [0]))
            .unwrap();
        let before = d.bounding_box(&[0]).unwrap().unwrap();
        let after = out.bounding_box(&[0]).unwrap().unwrap();
        assert!((after.x - before.x - 20.0).abs() < 1e-4);
        assert!((after.y - before.y).abs() < 1e-4);
    }

    #[test]
    fn delete_empty_targets_is_identity() {
        let d = nine();
        let out = d.apply_edit(&EditSpec::new(EditOp::Delete, [])).unwrap();
        assert_eq!(out.len(), d.len());
        assert!(out.elements().iter().zip(d.elements()).all(|(a, b)| a.paint_eq(b)));
    }

    #[test]
    fn delete_removes_targets_only() {
        let d = nine();
        let out = d.apply_edit(&EditSpec::new(EditOp::Delete, [0, 4])).unwrap();
        assert_eq!(out.len(), 7);
        assert!(out.elements()[0].paint_eq(&d.elements()[1]));
        assert!(out.elements()[3].paint_eq(&d.elements()[5]));
    }

    #[test]
    fn regroup_matches_permutation_oracle() {
        let d = nine();
        let targets = [1usize, 4, 7];
        let out = d.apply_edit(&EditSpec::new(EditOp::Regroup, targets)).unwrap();
        // Oracle: stable partition around the first target's slot.
        let mut expected: Vec<usize> = (0..1).collect();
        expected.extend(targets);
        expected.extend((2..9).filter(|i| !targets.contains(i)));
        let got: Vec<usize> = out
            .elements()
            .iter()
            .map(|e| d.elements().iter().position(|o| o.paint_eq(e)).unwrap())
            .collect();
        assert_eq!(got, expected);
        assert_eq!(&got[1..4], &targets);
    }

    #[test]
    fn scale_pivots_on_joint_center() {
        let d = doc(r#"<rect x="10" y="10" width="20" height="20"/><rect x="50" y="10" width="20" height="20"/>"#);
        let out = d
            .apply_edit(&EditSpec::new(EditOp::Scale { factor: 0.5 }, [0, 1]))
            .unwrap();
        let bb = out.bounding_box(&[0, 1]).unwrap().unwrap();
        assert!((bb.center().0 - 40.0).abs() < 1e-3);
        assert!((bb.center().1 - 20.0).abs() < 1e-3);
        assert!((bb.width - 30.0).abs() < 1e-3);
    }

    #[test]
    fn scale_factor_must_be_positive() {
        let d = nine();
        for factor in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                d.apply_edit(&EditSpec::new(EditOp::Scale { factor }, [0])),
                Err(Error::InvalidEdit(_))
            ));
        }
    }

    #[test]
    fn invalid_targets_rejected() {
        let d = nine();
        assert!(d.apply_edit(&EditSpec::new(EditOp::Delete, [9])).is_err());
        assert!(d.apply_edit(&EditSpec::new(EditOp::Delete, [1, 1])).is_err());
    }

    #[test]
    fn color_prefers_fill_then_stroke() {
        let d = doc(
            r#"<rect width="1" height="1" fill="red" stroke="blue"/><path d="M0 0h5" fill="none" stroke="blue"/><rect width="2" height="2"/>"#,
        );
        let out = d
            .apply_edit(&EditSpec::new(EditOp::Color { rgb: [1, 2, 255] }, [0, 1, 2]))
            .unwrap();
        assert_eq!(out.elements()[0].attr("fill"), Some("#0102ff"));
        assert_eq!(out.elements()[0].attr("stroke"), Some("blue"));
        assert_eq!(out.elements()[1].attr("fill"), Some("none"));
        assert_eq!(out.elements()[1].attr("stroke"), Some("#0102ff"));
        assert_eq!(out.elements()[2].attr("fill"), Some("#0102ff"));
    }
}
