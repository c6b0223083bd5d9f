//! Parsed SVG documents as ordered lists of paintable scoring units.
//!
//! Groups are flattened at parse time: inherited presentation attributes and
//! transforms are composed onto every leaf, so each [`VisualElement`] renders
//! on its own exactly as it does in context (occlusion aside). Element order is
//! paint order.

mod edit;
mod parse;
mod path;
mod write;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edit::{EditKind, EditOp, EditSpec};
pub use path::{count_movetos, split_path_data};

/// The `viewBox` of a document, in user units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl ViewBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        ViewBox { x, y, width, height }
    }

    pub fn is_empty(&self) -> bool {
        !(self.width > 0.0 && self.height > 0.0)
    }

    /// Uniform user-unit to pixel scale when fitted into a `size`×`size` canvas.
    pub fn fit_scale(&self, size: u32) -> f64 {
        size as f64 / self.width.max(self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    Path,
    Rect,
    Circle,
    Ellipse,
    Line,
    Polyline,
    Polygon,
    Text,
    Image,
    /// A group kept whole because its clip, mask or filter does not
    /// distribute over its children.
    GroupLeaf,
}

impl ElementKind {
    pub fn tag(self) -> &'static str {
        match self {
            ElementKind::Path => "path",
            ElementKind::Rect => "rect",
            ElementKind::Circle => "circle",
            ElementKind::Ellipse => "ellipse",
            ElementKind::Line => "line",
            ElementKind::Polyline => "polyline",
            ElementKind::Polygon => "polygon",
            ElementKind::Text => "text",
            ElementKind::Image => "image",
            ElementKind::GroupLeaf => "g",
        }
    }

    pub(crate) fn from_leaf_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "path" => ElementKind::Path,
            "rect" => ElementKind::Rect,
            "circle" => ElementKind::Circle,
            "ellipse" => ElementKind::Ellipse,
            "line" => ElementKind::Line,
            "polyline" => ElementKind::Polyline,
            "polygon" => ElementKind::Polygon,
            "text" => ElementKind::Text,
            "image" => ElementKind::Image,
            _ => return None,
        })
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Where an element came from in the source markup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    /// A source node; `span` is its byte range in the source text.
    Node { node: usize, span: Range<usize> },
    /// One fragment of a compound path.
    SubpathSplit {
        parent: usize,
        span: Range<usize>,
        ordinal: usize,
    },
    /// Created programmatically (injected artifacts, clones).
    Synthetic,
}

impl Origin {
    pub fn span(&self) -> Option<Range<usize>> {
        match self {
            Origin::Node { span, .. } | Origin::SubpathSplit { span, .. } => Some(span.clone()),
            Origin::Synthetic => None,
        }
    }
}

/// One paintable scoring unit.
#[derive(Debug, Clone)]
pub struct VisualElement {
    pub index: usize,
    pub kind: ElementKind,
    pub attributes: BTreeMap<String, String>,
    /// Serialized child markup for text and group leaves.
    pub content: Option<String>,
    pub origin: Origin,
}

impl VisualElement {
    pub fn new(kind: ElementKind, attributes: BTreeMap<String, String>) -> Self {
        VisualElement {
            index: 0,
            kind,
            attributes,
            content: None,
            origin: Origin::Synthetic,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    pub fn set_attr(&mut self, name: &str, value: impl Into<String>) {
        self.attributes.insert(name.to_string(), value.into());
    }

    /// Equality of everything that affects painting (ignores index and origin).
    pub fn paint_eq(&self, other: &VisualElement) -> bool {
        self.kind == other.kind && self.attributes == other.attributes && self.content == other.content
    }

    /// Prepends a transform so it applies after the element's own transform.
    pub fn prepend_transform(&mut self, transform: &str) {
        let composed = match self.attributes.get("transform") {
            Some(existing) if !existing.trim().is_empty() => format!("{transform} {existing}"),
            _ => transform.to_string(),
        };
        self.attributes.insert("transform".into(), composed);
    }
}

/// Axis-aligned bounding box in user units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }
}

/// An immutable parsed SVG. All operations return new documents.
#[derive(Debug, Clone)]
pub struct SvgDocument {
    source: Arc<str>,
    viewbox: ViewBox,
    /// Serialized non-element markup (defs, styles, scripts, animations).
    passthrough: Arc<[String]>,
    elements: Vec<VisualElement>,
}

impl SvgDocument {
    /// Parses SVG markup into a flattened, paint-ordered document.
    pub fn parse(text: &str) -> Result<Self> {
        parse::parse(text)
    }

    pub fn from_parts(viewbox: ViewBox, passthrough: Vec<String>, elements: Vec<VisualElement>) -> Self {
        let mut doc = SvgDocument {
            source: Arc::from(""),
            viewbox,
            passthrough: passthrough.into(),
            elements,
        };
        doc.reindex();
        doc
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn viewbox(&self) -> ViewBox {
        self.viewbox
    }

    pub fn passthrough(&self) -> &[String] {
        &self.passthrough
    }

    pub fn elements(&self) -> &[VisualElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, index: usize) -> Result<&VisualElement> {
        self.elements.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.elements.len(),
        })
    }

    fn reindex(&mut self) {
        for (i, el) in self.elements.iter_mut().enumerate() {
            el.index = i;
        }
    }

    /// Same document chrome with a different element list.
    pub fn with_elements(&self, elements: Vec<VisualElement>) -> SvgDocument {
        let mut doc = SvgDocument {
            source: self.source.clone(),
            viewbox: self.viewbox,
            passthrough: self.passthrough.clone(),
            elements,
        };
        doc.reindex();
        doc
    }

    /// Removes element `index`, leaving every other element untouched and in order.
    pub fn ablate(&self, index: usize) -> Result<SvgDocument> {
        self.element(index)?;
        Ok(self.without(&[index]))
    }

    /// Removes every listed element. Unknown indices are ignored.
    pub fn without(&self, indices: &[usize]) -> SvgDocument {
        let drop: BTreeSet<usize> = indices.iter().copied().collect();
        self.with_elements(
            self.elements
                .iter()
                .filter(|e| !drop.contains(&e.index))
                .cloned()
                .collect(),
        )
    }

    /// Keeps only the listed elements, in paint order.
    pub fn only(&self, indices: &[usize]) -> SvgDocument {
        let keep: BTreeSet<usize> = indices.iter().copied().collect();
        self.with_elements(
            self.elements
                .iter()
                .filter(|e| keep.contains(&e.index))
                .cloned()
                .collect(),
        )
    }

    /// The first `len` elements in paint order.
    pub fn prefix(&self, len: usize) -> SvgDocument {
        self.with_elements(self.elements[..len.min(self.elements.len())].to_vec())
    }

    /// Inserts an element at `position` (clamped to the end).
    pub fn insert(&self, position: usize, element: VisualElement) -> SvgDocument {
        let mut elements = self.elements.clone();
        elements.insert(position.min(elements.len()), element);
        self.with_elements(elements)
    }

    /// Standalone SVG markup with an explicit viewBox.
    pub fn to_svg_string(&self) -> String {
        write::write_document(self)
    }

    /// Splits compound paths at each moveto into consecutive elements.
    pub fn split_subpaths(&self) -> Result<SvgDocument> {
        path::split_document(self, |_| true)
    }

    /// Splits only the compound paths for which `accept` returns true.
    pub fn split_subpaths_where(&self, accept: impl FnMut(usize) -> bool) -> Result<SvgDocument> {
        path::split_document(self, accept)
    }

    pub fn apply_edit(&self, edit: &EditSpec) -> Result<SvgDocument> {
        edit::apply(self, edit)
    }

    /// Joint geometric bounding box of the listed elements in user units,
    /// or `None` when they paint no geometry.
    pub fn bounding_box(&self, indices: &[usize]) -> Result<Option<BBox>> {
        for &i in indices {
            self.element(i)?;
        }
        let sub = self.only(indices);
        let tree = crate::raster::parse_tree(&sub)?;
        let root = tree.root();
        if !root.has_children() {
            return Ok(None);
        }
        let rect = root.abs_bounding_box();
        // The tree is laid out with the viewBox origin moved to zero.
        Ok(Some(BBox {
            x: rect.x() as f64 + self.viewbox.x,
            y: rect.y() as f64 + self.viewbox.y,
            width: rect.width() as f64,
            height: rect.height() as f64,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_rects() -> SvgDocument {
        SvgDocument::parse(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10">
                <rect x="0" y="0" width="5" height="5" fill="red"/>
                <circle cx="7" cy="7" r="2" fill="blue"/>
            </svg>"#,
        )
        .unwrap()
    }

    #[test]
    fn ablate_keeps_remaining_order() {
        let doc = two_rects();
        let out = doc.ablate(0).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.elements()[0].paint_eq(&doc.elements()[1]));
        assert_eq!(out.elements()[0].index, 0);
    }

    #[test]
    fn ablate_out_of_range() {
        let doc = two_rects();
        assert!(matches!(
            doc.ablate(2),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }

    #[test]
    fn ablated_spans_stay_in_source_order() {
        let doc = SvgDocument::parse(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10">
                <rect width="1" height="1"/><rect x="2" width="1" height="1"/>
                <rect x="4" width="1" height="1"/><rect x="6" width="1" height="1"/>
            </svg>"#,
        )
        .unwrap();
        let out = doc.ablate(1).unwrap();
        let starts: Vec<usize> = out.elements().iter().map(|e| e.origin.span().unwrap().start).collect();
        assert!(starts.windows(2).all(|w| w[0] < w[1]));
        let text = out.to_svg_string();
        let a = text.find(r#"x="4""#).unwrap();
        let b = text.find(r#"x="6""#).unwrap();
        assert!(a < b);
        assert!(!text.contains(r#"x="2""#));
    }

    #[test]
    fn bounding_box_in_user_units() {
        let doc = SvgDocument::parse(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="10 20 100 100">
                <rect x="30" y="40" width="10" height="20"/>
                <rect x="50" y="40" width="10" height="20" transform="translate(5 0)"/>
            </svg>"#,
        )
        .unwrap();
        let bb = doc.bounding_box(&[0, 1]).unwrap().unwrap();
        assert!((bb.x - 30.0).abs() < 1e-4);
        assert!((bb.y - 40.0).abs() < 1e-4);
        assert!((bb.width - 35.0).abs() < 1e-4);
        assert!((bb.height - 20.0).abs() < 1e-4);
    }
}
