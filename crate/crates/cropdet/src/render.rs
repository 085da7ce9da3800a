//! SVG overlays: the source image as an `<image>` reference plus one
//! outlined `<rect>` and caption per box. SVG keeps the output diffable
//! and dependency-free; nothing is rasterized.

use std::collections::BTreeMap;

use crate::geometry::ImageSize;
use crate::io::fmt_f64;
use crate::proposals::ScoredBox;

/// Outline colors cycle through this palette by label, in first-seen
/// order. Unlabeled boxes share the last entry.
const PALETTE: [&str; 6] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#808080",
];

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Builds the overlay document. `image_ref` lands in the `<image href>`
/// attribute untouched apart from XML escaping, so relative paths stay
/// relative. An empty box list yields just the image reference.
pub fn render_svg(image_ref: &str, size: ImageSize, boxes: &[ScoredBox]) -> String {
    let (w, h) = (size.width(), size.height());
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <image href=\"{}\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\"/>\n",
        xml_escape(image_ref)
    ));

    let mut colors: BTreeMap<&str, &str> = BTreeMap::new();
    let mut next = 0usize;
    for b in boxes {
        if let Some(label) = b.label.as_deref() {
            colors.entry(label).or_insert_with(|| {
                let c = PALETTE[next.min(PALETTE.len() - 2)];
                next += 1;
                c
            });
        }
    }

    for b in boxes {
        let color = b
            .label
            .as_deref()
            .and_then(|l| colors.get(l).copied())
            .unwrap_or(PALETTE[PALETTE.len() - 1]);
        let (x, y) = (b.bbox.x1(), b.bbox.y1());
        svg.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            fmt_f64(x),
            fmt_f64(y),
            fmt_f64(b.bbox.width()),
            fmt_f64(b.bbox.height())
        ));
        let caption = match b.label.as_deref() {
            Some(label) => format!("{label} {}", fmt_f64(b.score)),
            None => fmt_f64(b.score),
        };
        // Caption sits just above the box, or just inside when the box
        // touches the top edge.
        let ty = if y >= 6.0 { y - 4.0 } else { y + 12.0 };
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            fmt_f64(x),
            fmt_f64(ty),
            xml_escape(&caption)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}
