use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use roxmltree::Node;

use super::write::{attribute_key, is_svg_element, write_children, write_node, XLINK_NS};
use super::{ElementKind, Origin, SvgDocument, ViewBox, VisualElement};
use crate::error::{Error, Result};

/// Presentation properties that cascade from a group to its children.
const INHERITED: &[&str] = &[
    "clip-rule",
    "color",
    "color-interpolation",
    "color-interpolation-filters",
    "color-rendering",
    "direction",
    "dominant-baseline",
    "fill",
    "fill-opacity",
    "fill-rule",
    "font",
    "font-family",
    "font-feature-settings",
    "font-kerning",
    "font-size",
    "font-size-adjust",
    "font-stretch",
    "font-style",
    "font-variant",
    "font-weight",
    "image-rendering",
    "letter-spacing",
    "marker",
    "marker-end",
    "marker-mid",
    "marker-start",
    "paint-order",
    "shape-rendering",
    "stroke",
    "stroke-dasharray",
    "stroke-dashoffset",
    "stroke-linecap",
    "stroke-linejoin",
    "stroke-miterlimit",
    "stroke-opacity",
    "stroke-width",
    "text-anchor",
    "text-rendering",
    "visibility",
    "word-spacing",
    "writing-mode",
];

/// Group attributes that cannot be pushed down onto leaves.
const NON_DISTRIBUTIVE: &[&str] = &["clip-path", "mask", "filter"];

const MAX_USE_DEPTH: usize = 32;

pub(super) fn parse(text: &str) -> Result<SvgDocument> {
    let options = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let xml = roxmltree::Document::parse_with_options(text, options).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.pos()),
        message: e.to_string(),
    })?;
    let root = xml.root_element();
    if !is_svg_element(root) || root.tag_name().name() != "svg" {
        return Err(Error::Parse {
            offset: root.range().start,
            message: format!("root element is <{}>, expected <svg>", root.tag_name().name()),
        });
    }

    let viewbox = root_viewbox(root).ok_or_else(|| Error::Parse {
        offset: root.range().start,
        message: "invalid viewBox".into(),
    })?;

    let ids: HashMap<&str, Node> = xml
        .descendants()
        .filter(|n| n.is_element())
        .filter_map(|n| n.attribute("id").map(|id| (id, n)))
        .collect();

    let mut walker = Walker {
        ids,
        elements: Vec::new(),
        passthrough: Vec::new(),
        use_depth: 0,
    };
    walker.walk_children(root, &Context::default())?;

    if walker.elements.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut doc = SvgDocument {
        source: Arc::from(text),
        viewbox,
        passthrough: walker.passthrough.into(),
        elements: walker.elements,
    };
    doc.reindex();
    Ok(doc)
}

fn byte_offset(text: &str, pos: roxmltree::TextPos) -> usize {
    let mut offset = 0;
    for (row, line) in text.split_inclusive('\n').enumerate() {
        if row + 1 == pos.row as usize {
            let col = (pos.col as usize).saturating_sub(1);
            return offset + line.char_indices().nth(col).map(|(i, _)| i).unwrap_or(line.len());
        }
        offset += line.len();
    }
    text.len()
}

fn parse_number_list(s: &str) -> Vec<f64> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect()
}

fn parse_length(s: &str) -> Option<f64> {
    let t = s.trim();
    let t = t.strip_suffix("px").unwrap_or(t);
    t.trim().parse().ok().filter(|v: &f64| *v > 0.0)
}

fn root_viewbox(root: Node) -> Option<ViewBox> {
    if let Some(vb) = root.attribute("viewBox") {
        let nums = parse_number_list(vb);
        if nums.len() != 4 || nums[2] <= 0.0 || nums[3] <= 0.0 {
            return None;
        }
        return Some(ViewBox::new(nums[0], nums[1], nums[2], nums[3]));
    }
    // CSS default replaced-element size when nothing else is given.
    let w = root.attribute("width").and_then(parse_length).unwrap_or(300.0);
    let h = root.attribute("height").and_then(parse_length).unwrap_or(150.0);
    Some(ViewBox::new(0.0, 0.0, w, h))
}

pub(super) fn parse_opacity(s: &str) -> Option<f64> {
    let t = s.trim();
    let v = match t.strip_suffix('%') {
        Some(p) => p.trim().parse::<f64>().ok()? / 100.0,
        None => t.parse::<f64>().ok()?,
    };
    Some(v.clamp(0.0, 1.0))
}

/// Attributes of a node with inline `style` declarations expanded; style wins.
fn own_attributes(node: Node) -> BTreeMap<String, String> {
    let mut attrs = BTreeMap::new();
    for attr in node.attributes() {
        if let Some(key) = attribute_key(&attr) {
            attrs.insert(key, attr.value().to_string());
        }
    }
    if let Some(style) = attrs.remove("style") {
        for decl in style.split(';') {
            if let Some((k, v)) = decl.split_once(':') {
                let k = k.trim();
                let v = v.trim().trim_end_matches("!important").trim();
                if !k.is_empty() && !v.is_empty() {
                    attrs.insert(k.to_string(), v.to_string());
                }
            }
        }
    }
    attrs
}

#[derive(Debug, Clone)]
struct Context {
    inherited: BTreeMap<String, String>,
    transform: String,
    opacity: f64,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            inherited: BTreeMap::new(),
            transform: String::new(),
            opacity: 1.0,
        }
    }
}

impl Context {
    fn descend(&self, attrs: &BTreeMap<String, String>) -> Context {
        let mut next = self.clone();
        for (k, v) in attrs {
            if v != "inherit" && INHERITED.contains(&k.as_str()) {
                next.inherited.insert(k.clone(), v.clone());
            }
        }
        if let Some(t) = attrs.get("transform") {
            next.transform = join_transforms(&self.transform, t);
        }
        if let Some(o) = attrs.get("opacity").and_then(|o| parse_opacity(o)) {
            next.opacity *= o;
        }
        next
    }

    /// Resolves a leaf's final attributes against the inherited context.
    fn resolve(&self, own: BTreeMap<String, String>) -> BTreeMap<String, String> {
        let mut attrs = self.inherited.clone();
        for (k, v) in own {
            if v == "inherit" {
                continue;
            }
            attrs.insert(k, v);
        }
        let leaf_transform = attrs.remove("transform").unwrap_or_default();
        let transform = join_transforms(&self.transform, &leaf_transform);
        if !transform.is_empty() {
            attrs.insert("transform".into(), transform);
        }
        if self.opacity != 1.0 {
            let own = attrs.get("opacity").and_then(|o| parse_opacity(o)).unwrap_or(1.0);
            attrs.insert("opacity".into(), format!("{}", self.opacity * own));
        }
        attrs
    }
}

fn join_transforms(outer: &str, inner: &str) -> String {
    match (outer.trim().is_empty(), inner.trim().is_empty()) {
        (true, _) => inner.trim().to_string(),
        (false, true) => outer.trim().to_string(),
        (false, false) => format!("{} {}", outer.trim(), inner.trim()),
    }
}

fn is_hidden(attrs: &BTreeMap<String, String>) -> bool {
    attrs.get("display").map(|d| d.trim() == "none").unwrap_or(false)
}

struct Walker<'a, 'input> {
    ids: HashMap<&'a str, Node<'a, 'input>>,
    elements: Vec<VisualElement>,
    passthrough: Vec<String>,
    use_depth: usize,
}

impl<'a, 'input> Walker<'a, 'input> {
    fn walk_children(&mut self, node: Node<'a, 'input>, ctx: &Context) -> Result<()> {
        for child in node.children().filter(|n| n.is_element()) {
            self.visit(child, ctx)?;
        }
        Ok(())
    }

    fn visit(&mut self, node: Node<'a, 'input>, ctx: &Context) -> Result<()> {
        if !is_svg_element(node) {
            return Ok(());
        }
        let tag = node.tag_name().name();
        match tag {
            "title" | "desc" | "metadata" => Ok(()),
            "g" | "a" => self.visit_group(node, ctx),
            "svg" | "switch" => {
                let attrs = own_attributes(node);
                if !is_hidden(&attrs) {
                    self.push_group_leaf(node, ctx, attrs);
                }
                Ok(())
            }
            "use" => self.visit_use(node, ctx),
            _ => {
                if let Some(kind) = ElementKind::from_leaf_tag(tag) {
                    let attrs = own_attributes(node);
                    if !is_hidden(&attrs) {
                        self.push_leaf(node, kind, ctx, attrs);
                    }
                } else {
                    let mut out = String::new();
                    write_node(&mut out, node);
                    self.passthrough.push(out);
                }
                Ok(())
            }
        }
    }

    fn visit_group(&mut self, node: Node<'a, 'input>, ctx: &Context) -> Result<()> {
        let attrs = own_attributes(node);
        if is_hidden(&attrs) {
            return Ok(());
        }
        if NON_DISTRIBUTIVE.iter().any(|k| attrs.contains_key(*k)) {
            self.push_group_leaf(node, ctx, attrs);
            return Ok(());
        }
        self.walk_children(node, &ctx.descend(&attrs))
    }

    fn visit_use(&mut self, node: Node<'a, 'input>, ctx: &Context) -> Result<()> {
        let href = node
            .attribute((XLINK_NS, "href"))
            .or_else(|| node.attribute("href"))
            .unwrap_or("");
        let target = href
            .strip_prefix('#')
            .and_then(|id| self.ids.get(id).copied())
            .ok_or_else(|| Error::UnresolvedReference(href.to_string()))?;
        if self.use_depth >= MAX_USE_DEPTH {
            return Err(Error::UnresolvedReference(format!("{href} (reference cycle)")));
        }

        let mut attrs = own_attributes(node);
        if is_hidden(&attrs) {
            return Ok(());
        }
        let x = attrs.remove("x").and_then(|v| v.trim().parse::<f64>().ok());
        let y = attrs.remove("y").and_then(|v| v.trim().parse::<f64>().ok());
        for k in ["width", "height", "href", "xlink:href", "id"] {
            attrs.remove(k);
        }
        let offset = match (x.unwrap_or(0.0), y.unwrap_or(0.0)) {
            (dx, dy) if dx != 0.0 || dy != 0.0 => format!("translate({dx} {dy})"),
            _ => String::new(),
        };
        let transform = join_transforms(attrs.get("transform").map_or("", String::as_str), &offset);
        if transform.is_empty() {
            attrs.remove("transform");
        } else {
            attrs.insert("transform".into(), transform);
        }
        let inner = ctx.descend(&attrs);

        self.use_depth += 1;
        let result = if target.tag_name().name() == "symbol" {
            let symbol_attrs = own_attributes(target);
            self.walk_children(target, &inner.descend(&symbol_attrs))
        } else {
            self.visit(target, &inner)
        };
        self.use_depth -= 1;
        result
    }

    fn origin(node: Node) -> Origin {
        Origin::Node {
            node: node.id().get_usize(),
            span: node.range(),
        }
    }

    fn finish(&mut self, mut attrs: BTreeMap<String, String>) -> BTreeMap<String, String> {
        if self.use_depth > 0 {
            attrs.remove("id");
        }
        attrs
    }

    fn push_leaf(&mut self, node: Node<'a, 'input>, kind: ElementKind, ctx: &Context, attrs: BTreeMap<String, String>) {
        let attrs = self.finish(ctx.resolve(attrs));
        let content = match kind {
            ElementKind::Text => {
                let mut out = String::new();
                write_children(&mut out, node);
                Some(out)
            }
            _ => None,
        };
        self.elements.push(VisualElement {
            index: 0,
            kind,
            attributes: attrs,
            content,
            origin: Self::origin(node),
        });
    }

    fn push_group_leaf(&mut self, node: Node<'a, 'input>, ctx: &Context, attrs: BTreeMap<String, String>) {
        let mut attrs = self.finish(ctx.resolve(attrs));
        // Nested viewports are kept as a group wrapping the original element.
        let content = if node.tag_name().name() == "g" {
            let mut out = String::new();
            write_children(&mut out, node);
            out
        } else {
            attrs.retain(|k, _| k == "transform" || k == "opacity" || INHERITED.contains(&k.as_str()));
            let mut out = String::new();
            write_node(&mut out, node);
            out
        };
        self.elements.push(VisualElement {
            index: 0,
            kind: ElementKind::GroupLeaf,
            attributes: attrs,
            content: Some(content),
            origin: Self::origin(node),
        });
    }
}
