//! Detection quality metrics: greedy matching against ground truth,
//! precision-recall curves, average precision, and the mean over classes.
//!
//! The matching protocol, spelled out once so every consumer agrees:
//! detections of one class are ranked globally by descending score (ties
//! keep their input order, images visited in sorted key order). Each
//! detection is offered the not-yet-matched ground-truth box of the same
//! class in the same image with the highest overlap. It counts as a true
//! positive only if that overlap strictly exceeds the threshold; the
//! ground-truth box is then consumed, so any later detection of it is a
//! false positive. Overlap at exactly the threshold is negative.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::proposals::ScoredBox;

/// A labeled annotation box.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub bbox: BBox,
    pub label: String,
}

/// Annotations keyed by image identifier. An image with no objects still
/// gets an entry, so the key set defines which images exist.
pub type GroundTruthMap = BTreeMap<String, Vec<GroundTruthObject>>;

/// Detections keyed by image identifier.
pub type DetectionMap = BTreeMap<String, Vec<ScoredBox>>;

fn check_threshold(iou_threshold: f64) -> Result<()> {
    if iou_threshold > 0.0 && iou_threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "matching iou threshold must lie strictly inside (0, 1), got {iou_threshold}"
        )))
    }
}

/// Runs the matching protocol for one class and returns the
/// true/false-positive flag of every detection of that class, ordered by
/// descending score.
pub fn match_detections(
    gts: &GroundTruthMap,
    dets: &DetectionMap,
    iou_threshold: f64,
    label: &str,
) -> Result<Vec<bool>> {
    check_threshold(iou_threshold)?;
    for image in dets.keys() {
        if !gts.contains_key(image) {
            return Err(Error::validation(format!(
                "detections reference unknown image \"{image}\""
            )));
        }
    }

    struct Candidate<'a> {
        image: &'a str,
        score: f64,
        bbox: BBox,
    }
    let mut ranked: Vec<Candidate> = Vec::new();
    for (image, boxes) in dets {
        for sb in boxes {
            if sb.label.as_deref() == Some(label) {
                ranked.push(Candidate {
                    image,
                    score: sb.score,
                    bbox: sb.bbox,
                });
            }
        }
    }
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));

    // Per image: this class's ground-truth boxes and a consumed flag each.
    let mut pools: BTreeMap<&str, (Vec<&BBox>, Vec<bool>)> = BTreeMap::new();
    for (image, objs) in gts {
        let boxes: Vec<&BBox> = objs
            .iter()
            .filter(|o| o.label == label)
            .map(|o| &o.bbox)
            .collect();
        let n = boxes.len();
        pools.insert(image.as_str(), (boxes, vec![false; n]));
    }

    let mut flags = Vec::with_capacity(ranked.len());
    for det in &ranked {
        let (boxes, consumed) = pools.get_mut(det.image).expect("key checked above");
        let mut best: Option<(usize, f64)> = None;
        for (idx, gt) in boxes.iter().enumerate() {
            if consumed[idx] {
                continue;
            }
            let overlap = det.bbox.iou(gt);
            let better = match best {
                None => true,
                Some((_, b)) => overlap > b,
            };
            if better {
                best = Some((idx, overlap));
            }
        }
        match best {
            Some((idx, overlap)) if overlap > iou_threshold => {
                consumed[idx] = true;
                flags.push(true);
            }
            _ => flags.push(false),
        }
    }
    Ok(flags)
}

/// How the area under the precision-recall curve is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApRule {
    /// Area under the monotone (right-to-left running max) precision
    /// envelope, summed exactly over every recall step.
    #[default]
    Envelope,
    /// Mean of the envelope precision sampled at the 11 recall levels
    /// 0.0, 0.1, ..., 1.0; kept for comparison with older protocols.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub recall: f64,
    pub precision: f64,
}

/// One class's precision-recall sweep and its area.
#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    pub label: String,
    /// One point per detection, in rank order. Recall is non-decreasing.
    pub points: Vec<PRPoint>,
    pub ap: f64,
    /// Set when the class has no ground-truth objects; `ap` is then
    /// defined as 0 and the class is excluded from any mean.
    pub zero_gt: bool,
}

impl PRCurve {
    /// CSV rendering: `recall,precision` header, one point per line,
    /// fixed six decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("recall,precision\n");
        for p in &self.points {
            out.push_str(&format!("{:.6},{:.6}\n", p.recall, p.precision));
        }
        out
    }
}

/// Builds the cumulative precision-recall curve for one class from rank
/// flags, using the envelope area rule.
pub fn pr_curve(label: &str, flags: &[bool], total_gt: usize) -> PRCurve {
    pr_curve_with_rule(label, flags, total_gt, ApRule::Envelope)
}

pub fn pr_curve_with_rule(label: &str, flags: &[bool], total_gt: usize, rule: ApRule) -> PRCurve {
    let mut points = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &flag in flags {
        if flag {
            tp += 1;
        } else {
            fp += 1;
        }
        let recall = if total_gt == 0 {
            0.0
        } else {
            tp as f64 / total_gt as f64
        };
        points.push(PRPoint {
            recall,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    let zero_gt = total_gt == 0;
    let ap = if zero_gt { 0.0 } else { area_under(&points, flags, rule) };
    PRCurve {
        label: label.to_string(),
        points,
        ap,
        zero_gt,
    }
}

fn area_under(points: &[PRPoint], flags: &[bool], rule: ApRule) -> f64 {
    // Envelope: precision at rank i replaced by the max precision at any
    // rank >= i, so the curve is non-increasing in recall.
    let mut envelope = vec![0.0; points.len()];
    let mut running = 0.0f64;
    for i in (0..points.len()).rev() {
        running = running.max(points[i].precision);
        envelope[i] = running;
    }
    match rule {
        ApRule::Envelope => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (i, p) in points.iter().enumerate() {
                if flags[i] {
                    ap += (p.recall - prev_recall) * envelope[i];
                    prev_recall = p.recall;
                }
            }
            ap
        }
        ApRule::ElevenPoint => {
            let mut sum = 0.0;
            for level in 0..=10 {
                let r = level as f64 / 10.0;
                let best = points
                    .iter()
                    .zip(&envelope)
                    .find(|(p, _)| p.recall >= r)
                    .map(|(_, &e)| e)
                    .unwrap_or(0.0);
                sum += best;
            }
            sum / 11.0
        }
    }
}

/// Per-class tallies in a finished evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: String,
    pub gt_count: usize,
    pub detection_count: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub ap: f64,
    /// False for classes with zero ground-truth objects, which the mean
    /// skips.
    pub included_in_map: bool,
}

/// Evaluation summary across all classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub classes: Vec<ClassStats>,
    /// Unweighted mean of per-class AP over classes with ground truth.
    #[serde(rename = "mAP")]
    pub map: f64,
    /// Classes excluded from the mean for having no ground-truth objects.
    pub zero_gt_classes: Vec<String>,
}

/// Full evaluation: report plus the per-class curves (for CSV export).
pub fn evaluate_full(
    gts: &GroundTruthMap,
    dets: &DetectionMap,
    classes: &[String],
    iou_threshold: f64,
    rule: ApRule,
) -> Result<(EvalReport, Vec<PRCurve>)> {
    check_threshold(iou_threshold)?;
    if classes.is_empty() {
        return Err(Error::validation("class list must not be empty"));
    }
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].contains(c) {
            return Err(Error::validation(format!("duplicate class \"{c}\"")));
        }
    }
    for objs in gts.values() {
        for o in objs {
            if !classes.contains(&o.label) {
                return Err(Error::validation(format!(
                    "ground truth uses unknown class \"{}\"",
                    o.label
                )));
            }
        }
    }
    for (image, boxes) in dets {
        for sb in boxes {
            match &sb.label {
                Some(l) if classes.contains(l) => {}
                Some(l) => {
                    return Err(Error::validation(format!(
                        "detection in image \"{image}\" uses unknown class \"{l}\""
                    )));
                }
                None => {
                    return Err(Error::validation(format!(
                        "detection in image \"{image}\" is missing a class label"
                    )));
                }
            }
        }
    }

    let per_class: Vec<(Vec<bool>, usize, PRCurve)> = classes
        .par_iter()
        .map(|label| -> Result<(Vec<bool>, usize, PRCurve)> {
            let flags = match_detections(gts, dets, iou_threshold, label)?;
            let total_gt = gts
                .values()
                .flat_map(|objs| objs.iter())
                .filter(|o| &o.label == label)
                .count();
            let curve = pr_curve_with_rule(label, &flags, total_gt, rule);
            Ok((flags, total_gt, curve))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stats = Vec::with_capacity(classes.len());
    let mut curves = Vec::with_capacity(classes.len());
    let mut zero_gt_classes = Vec::new();
    let (mut ap_sum, mut counted) = (0.0, 0usize);
    for (flags, gt_count, curve) in per_class {
        let tp = flags.iter().filter(|&&f| f).count();
        if curve.zero_gt {
            zero_gt_classes.push(curve.label.clone());
        } else {
            ap_sum += curve.ap;
            counted += 1;
        }
        stats.push(ClassStats {
            label: curve.label.clone(),
            gt_count,
            detection_count: flags.len(),
            true_positives: tp,
            false_positives: flags.len() - tp,
            ap: curve.ap,
            included_in_map: !curve.zero_gt,
        });
        curves.push(curve);
    }
    let map = if counted == 0 { 0.0 } else { ap_sum / counted as f64 };
    let report = EvalReport {
        iou_threshold,
        classes: stats,
        map,
        zero_gt_classes,
    };
    Ok((report, curves))
}

/// Evaluation with the default envelope rule, returning the report only.
pub fn evaluate(
    gts: &GroundTruthMap,
    dets: &DetectionMap,
    classes: &[String],
    iou_threshold: f64,
) -> Result<EvalReport> {
    evaluate_full(gts, dets, classes, iou_threshold, ApRule::Envelope).map(|(r, _)| r)
}
