use std::fmt::Write as _;

use super::{SvgDocument, VisualElement};

pub(super) const SVG_NS: &str = "http://www.w3.org/2000/svg";
pub(super) const XLINK_NS: &str = "http://www.w3.org/1999/xlink";
pub(super) const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

pub(super) fn write_document(doc: &SvgDocument) -> String {
    let vb = doc.viewbox();
    let mut out = String::with_capacity(256 + doc.len() * 96);
    let _ = writeln!(
        out,
        r#"<svg xmlns="{SVG_NS}" xmlns:xlink="{XLINK_NS}" viewBox="{} {} {} {}" width="{}" height="{}">"#,
        vb.x, vb.y, vb.width, vb.height, vb.width, vb.height
    );
    for fragment in doc.passthrough() {
        out.push_str(fragment);
        out.push('\n');
    }
    for el in doc.elements() {
        write_element(&mut out, el);
        out.push('\n');
    }
    out.push_str("</svg>\n");
    out
}

pub(super) fn write_element(out: &mut String, el: &VisualElement) {
    let tag = el.kind.tag();
    out.push('<');
    out.push_str(tag);
    for (k, v) in &el.attributes {
        write_attr(out, k, v);
    }
    match &el.content {
        Some(content) if !content.is_empty() => {
            out.push('>');
            out.push_str(content);
            let _ = write!(out, "</{tag}>");
        }
        _ => out.push_str("/>"),
    }
}

fn write_attr(out: &mut String, name: &str, value: &str) {
    out.push(' ');
    out.push_str(name);
    out.push_str("=\"");
    escape_into(out, value, true);
    out.push('"');
}

fn escape_into(out: &mut String, text: &str, attr: bool) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

/// Maps an attribute onto the name it is stored under, dropping foreign namespaces.
pub(super) fn attribute_key(attr: &roxmltree::Attribute) -> Option<String> {
    match attr.namespace() {
        None => Some(attr.name().to_string()),
        Some(XLINK_NS) => Some(format!("xlink:{}", attr.name())),
        Some(XML_NS) => Some(format!("xml:{}", attr.name())),
        Some(_) => None,
    }
}

pub(super) fn is_svg_element(node: roxmltree::Node) -> bool {
    node.is_element() && matches!(node.tag_name().namespace(), None | Some(SVG_NS))
}

/// Serializes a subtree, keeping only SVG-namespace elements and known attribute namespaces.
pub(super) fn write_node(out: &mut String, node: roxmltree::Node) {
    if node.is_text() {
        escape_into(out, node.text().unwrap_or(""), false);
        return;
    }
    if !is_svg_element(node) {
        return;
    }
    let tag = node.tag_name().name();
    out.push('<');
    out.push_str(tag);
    for attr in node.attributes() {
        if let Some(key) = attribute_key(&attr) {
            write_attr(out, &key, attr.value());
        }
    }
    if node.has_children() {
        out.push('>');
        write_children(out, node);
        let _ = write!(out, "</{tag}>");
    } else {
        out.push_str("/>");
    }
}

pub(super) fn write_children(out: &mut String, node: roxmltree::Node) {
    for child in node.children() {
        write_node(out, child);
    }
}
