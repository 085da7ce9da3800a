//! Scoring detections against ground truth: greedy matching at an IoU
//! threshold, per-class precision-recall curves, and the mean AP.
//!
//! Run with `cargo run --example evaluate_map`.

use cropdet::eval::{evaluate_full, ApRule, DetectionMap, GroundTruthMap, GroundTruthObject};
use cropdet::geometry::BBox;
use cropdet::proposals::ScoredBox;

fn gt(label: &str, b: [f64; 4]) -> cropdet::Result<GroundTruthObject> {
    Ok(GroundTruthObject {
        label: label.to_string(),
        bbox: BBox::new(b[0], b[1], b[2], b[3])?,
    })
}

fn det(label: &str, score: f64, b: [f64; 4]) -> cropdet::Result<ScoredBox> {
    Ok(ScoredBox::new(BBox::new(b[0], b[1], b[2], b[3])?, score)?.with_label(label))
}

fn main() -> cropdet::Result<()> {
    // Two images, two classes. "weed" gets one perfect hit, one near miss,
    // and one stray box; "corn_leaf" is found everywhere it exists.
    let mut gts = GroundTruthMap::new();
    gts.insert(
        "plot_a.ppm".into(),
        vec![
            gt("weed", [10.0, 10.0, 40.0, 40.0])?,
            gt("corn_leaf", [60.0, 15.0, 90.0, 70.0])?,
        ],
    );
    gts.insert(
        "plot_b.ppm".into(),
        vec![
            gt("weed", [20.0, 30.0, 55.0, 65.0])?,
            gt("corn_leaf", [5.0, 5.0, 25.0, 45.0])?,
        ],
    );

    let mut dets = DetectionMap::new();
    dets.insert(
        "plot_a.ppm".into(),
        vec![
            det("weed", 0.95, [10.0, 10.0, 40.0, 40.0])?,
            det("corn_leaf", 0.90, [61.0, 16.0, 89.0, 69.0])?,
            det("weed", 0.40, [70.0, 70.0, 95.0, 95.0])?,
        ],
    );
    dets.insert(
        "plot_b.ppm".into(),
        vec![
            det("weed", 0.70, [30.0, 40.0, 62.0, 72.0])?,
            det("corn_leaf", 0.85, [6.0, 5.0, 26.0, 44.0])?,
        ],
    );

    let classes = vec!["weed".to_string(), "corn_leaf".to_string()];
    let (report, curves) = evaluate_full(&gts, &dets, &classes, 0.5, ApRule::Envelope)?;

    println!("iou threshold {}\n", report.iou_threshold);
    for c in &report.classes {
        println!(
            "{:10}  gt {}  det {}  tp {}  fp {}  ap {:.4}",
            c.label, c.gt_count, c.detection_count, c.true_positives, c.false_positives, c.ap
        );
    }
    println!("\nmAP: {:.4}", report.map);

    // The curve behind each AP, rank by rank.
    for curve in &curves {
        println!("\n{} curve (recall, precision):", curve.label);
        for p in &curve.points {
            println!("  {:.3}, {:.3}", p.recall, p.precision);
        }
    }

    // The weed box in plot_b overlaps its ground truth at roughly 0.38,
    // below the threshold, so it counts against precision instead.
    let (_, eleven) = evaluate_full(&gts, &dets, &classes, 0.5, ApRule::ElevenPoint)?;
    println!("\nequivalent 11-point APs:");
    for curve in &eleven {
        println!("  {:10}  ap {:.4}", curve.label, curve.ap);
    }
    Ok(())
}
