//! JSON-lines annotation/detection files and the `classes.json` sidecar.
//!
//! One record per line. Annotation lines look like
//! `{"image":"a.ppm","width":640,"height":480,"objects":[{"label":"weed","box":[10,20,42,63.5]}]}`
//! and detection lines like
//! `{"image":"a.ppm","detections":[{"label":"weed","score":0.9,"box":[10,20,42,63.5]}]}`.
//! Readers reject anything malformed with the 1-based line number;
//! writers emit the canonical form (fixed key order, trimmed 6-decimal
//! numbers), so round-tripping a canonical file is byte-exact.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::GroundTruthObject;
use crate::geometry::{BBox, ImageSize};
use crate::proposals::ScoredBox;

use super::{fmt_f64, write_atomic};

/// One annotated image: identifier, pixel size, and its labeled boxes.
/// Every box lies inside the image bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image: String,
    pub size: ImageSize,
    pub objects: Vec<GroundTruthObject>,
}

/// One image's detections. Each entry carries a label and a score.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image: String,
    pub detections: Vec<ScoredBox>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    image: String,
    width: u32,
    height: u32,
    objects: Vec<RawObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    label: String,
    #[serde(rename = "box")]
    rect: [f64; 4],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetections {
    image: String,
    detections: Vec<RawDetection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    label: String,
    score: f64,
    #[serde(rename = "box")]
    rect: [f64; 4],
}

/// Non-blank lines of a text file with their 1-based numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

/// serde_json's own messages end in " at line 1 column C" relative to the
/// single line it saw; strip that so the real file line can be appended.
fn json_msg(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(idx) => format!("invalid JSON: {}", &s[..idx]),
        None => format!("invalid JSON: {s}"),
    }
}

fn parse_box(path: &str, line: usize, rect: [f64; 4]) -> Result<BBox> {
    BBox::new(rect[0], rect[1], rect[2], rect[3])
        .map_err(|e| Error::parse(path, line, e.to_string()))
}

/// Reads an annotation file. Boxes are checked against the declared
/// image size; any malformed line fails with its line number.
pub fn read_annotations(path: &Path) -> Result<Vec<AnnotatedImage>> {
    let path_str = path.display().to_string();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in read_lines(path)? {
        let raw: RawAnnotation = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path_str, n, json_msg(&e)))?;
        let size = ImageSize::new(raw.width, raw.height)
            .map_err(|e| Error::parse(&path_str, n, e.to_string()))?;
        if !seen.insert(raw.image.clone()) {
            return Err(Error::parse(
                &path_str,
                n,
                format!("duplicate image \"{}\"", raw.image),
            ));
        }
        let mut objects = Vec::with_capacity(raw.objects.len());
        for o in raw.objects {
            let bbox = parse_box(&path_str, n, o.rect)?;
            if bbox.x1() < 0.0
                || bbox.y1() < 0.0
                || bbox.x2() > size.width() as f64
                || bbox.y2() > size.height() as f64
            {
                return Err(Error::parse(
                    &path_str,
                    n,
                    format!(
                        "box [{}, {}, {}, {}] exceeds image bounds {size}",
                        bbox.x1(),
                        bbox.y1(),
                        bbox.x2(),
                        bbox.y2()
                    ),
                ));
            }
            objects.push(GroundTruthObject {
                bbox,
                label: o.label,
            });
        }
        out.push(AnnotatedImage {
            image: raw.image,
            size,
            objects,
        });
    }
    Ok(out)
}

/// Reads a detection file. Scores outside `[0, 1]` and degenerate boxes
/// fail with their line number.
pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let path_str = path.display().to_string();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in read_lines(path)? {
        let raw: RawDetections = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&path_str, n, json_msg(&e)))?;
        if !seen.insert(raw.image.clone()) {
            return Err(Error::parse(
                &path_str,
                n,
                format!("duplicate image \"{}\"", raw.image),
            ));
        }
        let mut detections = Vec::with_capacity(raw.detections.len());
        for d in raw.detections {
            let bbox = parse_box(&path_str, n, d.rect)?;
            if !(d.score.is_finite() && (0.0..=1.0).contains(&d.score)) {
                return Err(Error::parse(
                    &path_str,
                    n,
                    format!("score {} out of range [0, 1]", d.score),
                ));
            }
            detections.push(ScoredBox {
                bbox,
                score: d.score,
                label: Some(d.label),
            });
        }
        out.push(DetectionRecord {
            image: raw.image,
            detections,
        });
    }
    Ok(out)
}

fn fmt_rect(b: &BBox) -> String {
    let c = b.coords();
    format!(
        "[{},{},{},{}]",
        fmt_f64(c[0]),
        fmt_f64(c[1]),
        fmt_f64(c[2]),
        fmt_f64(c[3])
    )
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Writes annotations in canonical form. The in-memory invariants are
/// re-checked so an invalid model can never produce a file the reader
/// would reject.
pub fn write_annotations(items: &[AnnotatedImage], path: &Path) -> Result<()> {
    let mut text = String::new();
    for item in items {
        for o in &item.objects {
            if o.bbox.x1() < 0.0
                || o.bbox.y1() < 0.0
                || o.bbox.x2() > item.size.width() as f64
                || o.bbox.y2() > item.size.height() as f64
            {
                return Err(Error::validation(format!(
                    "annotation for \"{}\": box exceeds image bounds {}",
                    item.image, item.size
                )));
            }
        }
        let objects: Vec<String> = item
            .objects
            .iter()
            .map(|o| format!("{{\"label\":{},\"box\":{}}}", json_str(&o.label), fmt_rect(&o.bbox)))
            .collect();
        text.push_str(&format!(
            "{{\"image\":{},\"width\":{},\"height\":{},\"objects\":[{}]}}\n",
            json_str(&item.image),
            item.size.width(),
            item.size.height(),
            objects.join(",")
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// Writes detections in canonical form. Every detection must carry a
/// label and an in-range score.
pub fn write_detections(items: &[DetectionRecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for item in items {
        let mut parts = Vec::with_capacity(item.detections.len());
        for d in &item.detections {
            let label = d.label.as_deref().ok_or_else(|| {
                Error::validation(format!(
                    "detection for image \"{}\" is missing a class label",
                    item.image
                ))
            })?;
            if !(d.score.is_finite() && (0.0..=1.0).contains(&d.score)) {
                return Err(Error::validation(format!(
                    "detection for image \"{}\" has score {} out of range [0, 1]",
                    item.image, d.score
                )));
            }
            parts.push(format!(
                "{{\"label\":{},\"score\":{},\"box\":{}}}",
                json_str(label),
                fmt_f64(d.score),
                fmt_rect(&d.bbox)
            ));
        }
        text.push_str(&format!(
            "{{\"image\":{},\"detections\":[{}]}}\n",
            json_str(&item.image),
            parts.join(",")
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// Reads the class sidecar: a bare JSON array of distinct labels whose
/// order fixes evaluation ordering.
pub fn read_classes(path: &Path) -> Result<Vec<String>> {
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let classes: Vec<String> =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path_str, 1, json_msg(&e)))?;
    if classes.is_empty() {
        return Err(Error::parse(&path_str, 1, "class list is empty"));
    }
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(Error::parse(
                &path_str,
                1,
                format!("duplicate class \"{c}\""),
            ));
        }
    }
    Ok(classes)
}

pub fn write_classes(classes: &[String], path: &Path) -> Result<()> {
    let text = serde_json::to_string(classes).expect("string arrays always serialize");
    write_atomic(path, format!("{text}\n").as_bytes())
}
