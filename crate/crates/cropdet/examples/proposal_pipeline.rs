//! From head outputs to a ranked proposal list: decode every anchor's
//! offsets, clip to the image, drop slivers, suppress overlaps, keep the
//! best.
//!
//! Run with `cargo run --example proposal_pipeline`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use cropdet::anchors::{tile, AnchorConfig};
use cropdet::geometry::{BBox, ImageSize};
use cropdet::net::{rpn_forward, ConvLayer, FeatureMap};
use cropdet::proposals::{generate_proposals, nms, ProposalParams, ScoredBox};

fn main() -> cropdet::Result<()> {
    // Suppression on its own: three boxes, two of them near-duplicates.
    let crowd = vec![
        ScoredBox::new(BBox::new(10.0, 10.0, 50.0, 50.0)?, 0.9)?,
        ScoredBox::new(BBox::new(12.0, 12.0, 52.0, 52.0)?, 0.8)?,
        ScoredBox::new(BBox::new(60.0, 60.0, 90.0, 90.0)?, 0.7)?,
    ];
    let kept = nms(&crowd, 0.5)?;
    println!("nms keeps {} of {} (the duplicate loses to its higher twin)", kept.len(), crowd.len());

    // The full pipeline over an untrained head.
    let cfg = AnchorConfig::default();
    let (channels, hf, wf) = (8, 4, 5);
    let image = ImageSize::new(wf as u32 * 16, hf as u32 * 16)?;

    let features = FeatureMap::from_fn(channels, hf, wf, |c, i, j| {
        ((c + 2 * i + 3 * j) as f64 * 0.37).sin()
    })?;
    let mut rng = ChaCha12Rng::seed_from_u64(21);
    let shared = ConvLayer::seeded(3, channels, channels, &mut rng)?;
    let cls = ConvLayer::seeded(1, channels, 2 * cfg.k(), &mut rng)?;
    let reg = ConvLayer::seeded(1, channels, 4 * cfg.k(), &mut rng)?;
    let rpn = rpn_forward(&features, &shared, &cls, &reg)?;
    let anchors = tile(&cfg, hf, wf)?;

    let params = ProposalParams {
        post_nms_top_n: 8,
        ..ProposalParams::default()
    };
    let proposals = generate_proposals(&rpn, &anchors, image, &params)?;

    println!(
        "\n{} anchors over a {image} image -> {} proposals (pre {} / post {} / iou {} / min {} px):",
        anchors.len(),
        proposals.len(),
        params.pre_nms_top_n,
        params.post_nms_top_n,
        params.nms_iou_threshold,
        params.min_box_size,
    );
    for p in &proposals {
        let c = p.bbox.coords();
        println!(
            "  score {:.4}  [{:6.1}, {:6.1}, {:6.1}, {:6.1}]  {:4.0} x {:3.0}",
            p.score, c[0], c[1], c[2], c[3], p.bbox.width(), p.bbox.height()
        );
    }

    // Survivors are mutually spread out by construction.
    for (i, a) in proposals.iter().enumerate() {
        for b in &proposals[i + 1..] {
            assert!(a.bbox.iou(&b.bbox) <= params.nms_iou_threshold);
        }
    }
    println!("\nevery surviving pair overlaps at or below the threshold");
    Ok(())
}
