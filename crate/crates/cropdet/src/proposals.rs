//! From raw proposal-head outputs to a ranked, de-duplicated box list:
//! decode against the anchors, clip to the image, drop slivers, keep the
//! best by objectness, suppress near-duplicates, truncate.

use crate::anchors::AnchorSet;
use crate::coding::decode;
use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};
use crate::net::RpnOutput;

/// A box with a confidence in `[0, 1]` and an optional class label.
/// Proposal-stage boxes are unlabeled; labels appear once a detection
/// head has classified the region.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
    pub label: Option<String>,
}

impl ScoredBox {
    pub fn new(bbox: BBox, score: f64) -> Result<Self> {
        if !(score.is_finite() && (0.0..=1.0).contains(&score)) {
            return Err(Error::validation(format!(
                "score must lie in [0, 1], got {score}"
            )));
        }
        Ok(ScoredBox {
            bbox,
            score,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Proposal filtering knobs. Defaults: keep the top 6000 by score before
/// suppression, 300 after, suppress above iou 0.7, drop boxes under 2 px
/// on either side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalParams {
    pub pre_nms_top_n: usize,
    pub post_nms_top_n: usize,
    pub nms_iou_threshold: f64,
    pub min_box_size: f64,
}

impl Default for ProposalParams {
    fn default() -> Self {
        ProposalParams {
            pre_nms_top_n: 6000,
            post_nms_top_n: 300,
            nms_iou_threshold: 0.7,
            min_box_size: 2.0,
        }
    }
}

impl ProposalParams {
    pub fn validate(&self) -> Result<()> {
        if self.pre_nms_top_n == 0 || self.post_nms_top_n == 0 {
            return Err(Error::validation(
                "pre/post suppression keep counts must be positive",
            ));
        }
        if self.post_nms_top_n > self.pre_nms_top_n {
            return Err(Error::validation(format!(
                "post-suppression keep count {} exceeds pre-suppression count {}",
                self.post_nms_top_n, self.pre_nms_top_n
            )));
        }
        if !(self.nms_iou_threshold > 0.0 && self.nms_iou_threshold < 1.0) {
            return Err(Error::validation(format!(
                "suppression iou threshold must lie strictly inside (0, 1), got {}",
                self.nms_iou_threshold
            )));
        }
        if !(self.min_box_size.is_finite() && self.min_box_size >= 0.0) {
            return Err(Error::validation(format!(
                "minimum box size must be non-negative, got {}",
                self.min_box_size
            )));
        }
        Ok(())
    }
}

/// Greedy non-maximum suppression.
///
/// Repeatedly keeps the highest-scoring remaining box and discards every
/// remaining box whose iou with it exceeds `iou_threshold`. Output is
/// score-descending; equal scores keep their input order, so the result
/// is deterministic.
pub fn nms(boxes: &[ScoredBox], iou_threshold: f64) -> Result<Vec<ScoredBox>> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::validation(format!(
            "suppression iou threshold must lie strictly inside (0, 1), got {iou_threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    // Stable sort: equal scores stay in input order.
    order.sort_by(|&a, &b| {
        boxes[b]
            .score
            .partial_cmp(&boxes[a].score)
            .expect("scores are finite")
    });
    let mut suppressed = vec![false; boxes.len()];
    let mut kept = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(boxes[i].clone());
        for &j in &order[rank + 1..] {
            if !suppressed[j] && boxes[i].bbox.iou(&boxes[j].bbox) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    Ok(kept)
}

/// Full proposal pipeline for one image.
///
/// Every anchor contributes a candidate: its softmax objectness as the
/// score and its regression offsets decoded into a box. Candidates are
/// clipped to the image, dropped if either side falls under
/// `min_box_size`, ranked by score (ties in anchor-index order), cut to
/// `pre_nms_top_n`, suppressed, and cut to `post_nms_top_n`.
pub fn generate_proposals(
    rpn: &RpnOutput,
    anchors: &AnchorSet,
    image: ImageSize,
    params: &ProposalParams,
) -> Result<Vec<ScoredBox>> {
    params.validate()?;
    if rpn.height() != anchors.hf() || rpn.width() != anchors.wf() || rpn.k() != anchors.k() {
        return Err(Error::validation(format!(
            "proposal head output ({}x{}, k = {}) does not match the anchor grid ({}x{}, k = {})",
            rpn.height(),
            rpn.width(),
            rpn.k(),
            anchors.hf(),
            anchors.wf(),
            anchors.k()
        )));
    }
    let mut candidates = Vec::new();
    for i in 0..anchors.hf() {
        for j in 0..anchors.wf() {
            for a in 0..anchors.k() {
                let decoded = decode(&rpn.delta(i, j, a), &anchors.get(i, j, a))?;
                let Some(clipped) = decoded.clip(image) else {
                    continue;
                };
                if clipped.width() < params.min_box_size
                    || clipped.height() < params.min_box_size
                {
                    continue;
                }
                candidates.push(ScoredBox {
                    bbox: clipped,
                    score: rpn.objectness(i, j, a),
                    label: None,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .score
            .partial_cmp(&candidates[a].score)
            .expect("softmax scores are finite")
    });
    order.truncate(params.pre_nms_top_n);
    let ranked: Vec<ScoredBox> = order.into_iter().map(|i| candidates[i].clone()).collect();
    let mut kept = nms(&ranked, params.nms_iou_threshold)?;
    kept.truncate(params.post_nms_top_n);
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::{tile, AnchorConfig};
    use crate::net::{rpn_forward, ConvLayer, FeatureMap};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn b(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn sb(x1: f64, y1: f64, x2: f64, y2: f64, score: f64) -> ScoredBox {
        ScoredBox::new(b(x1, y1, x2, y2), score).unwrap()
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Literal restatement of the greedy rule: pick the max-score box
    /// (first on ties), discard overlapping survivors, repeat.
    fn nms_by_definition(boxes: &[ScoredBox], thr: f64) -> Vec<ScoredBox> {
        let mut remaining: Vec<usize> = (0..boxes.len()).collect();
        let mut kept = Vec::new();
        while !remaining.is_empty() {
            let best_pos = remaining
                .iter()
                .enumerate()
                .max_by(|(pa, &ia), (pb, &ib)| {
                    boxes[ia]
                        .score
                        .partial_cmp(&boxes[ib].score)
                        .unwrap()
                        .then(pb.cmp(pa))
                })
                .map(|(p, _)| p)
                .unwrap();
            let best = remaining.remove(best_pos);
            kept.push(boxes[best].clone());
            remaining.retain(|&j| boxes[best].bbox.iou(&boxes[j].bbox) <= thr);
        }
        kept
    }

    #[test]
    fn single_box_survives() {
        let input = vec![sb(0.0, 0.0, 10.0, 10.0, 0.4)];
        assert_eq!(nms(&input, 0.5).unwrap(), input);
    }

    #[test]
    fn duplicate_suppressed() {
        let hi = sb(0.0, 0.0, 10.0, 10.0, 0.9);
        let lo = sb(0.0, 0.0, 10.0, 10.0, 0.8);
        assert_eq!(nms(&[lo, hi.clone()], 0.5).unwrap(), vec![hi]);
    }

    #[test]
    fn equal_scores_keep_input_order() {
        let first = sb(0.0, 0.0, 10.0, 10.0, 0.7);
        let second = sb(1.0, 0.0, 11.0, 10.0, 0.7);
        let out = nms(&[first.clone(), second], 0.5).unwrap();
        assert_eq!(out, vec![first]);
    }

    #[test]
    fn bad_threshold_rejected() {
        let input = vec![sb(0.0, 0.0, 1.0, 1.0, 0.5)];
        assert!(nms(&input, 0.0).is_err());
        assert!(nms(&input, 1.0).is_err());
    }

    #[test]
    fn score_outside_unit_interval_rejected() {
        assert!(ScoredBox::new(b(0.0, 0.0, 1.0, 1.0), 1.5).is_err());
        assert!(ScoredBox::new(b(0.0, 0.0, 1.0, 1.0), -0.1).is_err());
        assert!(ScoredBox::new(b(0.0, 0.0, 1.0, 1.0), f64::NAN).is_err());
    }

    fn arb_scored_boxes() -> impl Strategy<Value = Vec<ScoredBox>> {
        proptest::collection::vec(
            (0.0f64..30.0, 0.0f64..30.0, 1.0f64..20.0, 1.0f64..20.0, 0.0f64..1.0)
                .prop_map(|(x, y, w, h, s)| sb(x, y, x + w, y + h, s)),
            0..10,
        )
    }

    proptest! {
        #[test]
        fn matches_definitional_oracle(boxes in arb_scored_boxes()) {
            for thr in [0.3, 0.5, 0.7] {
                prop_assert_eq!(nms(&boxes, thr).unwrap(), nms_by_definition(&boxes, thr));
            }
        }

        #[test]
        fn idempotent(boxes in arb_scored_boxes()) {
            let once = nms(&boxes, 0.5).unwrap();
            prop_assert_eq!(nms(&once, 0.5).unwrap(), once);
        }

        #[test]
        fn survivors_pairwise_below_threshold(boxes in arb_scored_boxes()) {
            let kept = nms(&boxes, 0.5).unwrap();
            for i in 0..kept.len() {
                for j in i + 1..kept.len() {
                    prop_assert!(kept[i].bbox.iou(&kept[j].bbox) <= 0.5);
                }
            }
        }
    }

    fn grid_2x2_k1() -> (AnchorConfig, AnchorSet) {
        let cfg = AnchorConfig {
            base_size: 16.0,
            scales: vec![1.0],
            ratios: vec![1.0],
            stride: 16.0,
        };
        let set = tile(&cfg, 2, 2).unwrap();
        (cfg, set)
    }

    fn rpn_from_planes(k: usize, h: usize, w: usize, cls: Vec<f64>, reg: Vec<f64>) -> RpnOutput {
        RpnOutput::from_maps(
            FeatureMap::new(2 * k, h, w, cls).unwrap(),
            FeatureMap::new(4 * k, h, w, reg).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hand_traced_pipeline() {
        let (_, set) = grid_2x2_k1();
        // Object logits per position: (0,0)=2, (0,1)=1, (1,0)=3, (1,1)=0;
        // not-object logits all zero. Only anchor (1,1) moves: tx = 0.25
        // shifts it right by 4 px, and the image edge clips it back.
        let cls = vec![0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 3.0, 0.0];
        let mut reg = vec![0.0; 16];
        reg[3] = 0.25;
        let rpn = rpn_from_planes(1, 2, 2, cls, reg);
        let params = ProposalParams {
            pre_nms_top_n: 4,
            post_nms_top_n: 3,
            nms_iou_threshold: 0.5,
            min_box_size: 2.0,
        };
        let out =
            generate_proposals(&rpn, &set, ImageSize::new(32, 32).unwrap(), &params).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].bbox, b(0.0, 16.0, 16.0, 32.0));
        assert!((out[0].score - sigmoid(3.0)).abs() <= 1e-12);
        assert_eq!(out[1].bbox, b(0.0, 0.0, 16.0, 16.0));
        assert!((out[1].score - sigmoid(2.0)).abs() <= 1e-12);
        assert_eq!(out[2].bbox, b(16.0, 0.0, 32.0, 16.0));
        assert!((out[2].score - sigmoid(1.0)).abs() <= 1e-12);
    }

    #[test]
    fn zero_regression_returns_ranked_anchors() {
        let (_, set) = grid_2x2_k1();
        // Object logit grows with anchor index, so ranking must reverse it.
        let cls = vec![0.0, 0.0, 0.0, 0.0, 0.1, 0.2, 0.3, 0.4];
        let rpn = rpn_from_planes(1, 2, 2, cls, vec![0.0; 16]);
        let params = ProposalParams {
            nms_iou_threshold: 0.5,
            ..ProposalParams::default()
        };
        let out =
            generate_proposals(&rpn, &set, ImageSize::new(32, 32).unwrap(), &params).unwrap();
        let want: Vec<BBox> = [3, 2, 1, 0]
            .iter()
            .map(|&idx| set.anchors()[idx])
            .collect();
        let got: Vec<BBox> = out.iter().map(|s| s.bbox).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn uniform_logits_tie_break_by_anchor_index() {
        let cfg = AnchorConfig::default();
        let set = tile(&cfg, 1, 1).unwrap();
        let rpn = rpn_from_planes(9, 1, 1, vec![0.0; 18], vec![0.0; 36]);
        let image = ImageSize::new(48, 48).unwrap();
        let params = ProposalParams::default();
        let out = generate_proposals(&rpn, &set, image, &params).unwrap();
        // Same pipeline by hand: clipped anchors in index order, all at
        // score 0.5, through plain suppression.
        let ranked: Vec<ScoredBox> = set
            .anchors()
            .iter()
            .filter_map(|a| a.clip(image))
            .map(|bb| ScoredBox::new(bb, 0.5).unwrap())
            .collect();
        let want = nms(&ranked, params.nms_iou_threshold).unwrap();
        assert_eq!(out, want);
        assert!(out.iter().all(|s| s.score == 0.5));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (_, set) = grid_2x2_k1();
        let rpn = rpn_from_planes(1, 3, 2, vec![0.0; 12], vec![0.0; 24]);
        let err = generate_proposals(
            &rpn,
            &set,
            ImageSize::new(32, 32).unwrap(),
            &ProposalParams::default(),
        );
        assert!(err.is_err());
    }

    proptest! {
        #[test]
        fn pipeline_invariants_hold(seed in 0u64..500) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let cfg = AnchorConfig {
                stride: 16.0,
                ..AnchorConfig::default()
            };
            let set = tile(&cfg, 4, 4).unwrap();
            let features = {
                use rand_distr::{Distribution, Normal};
                let n = Normal::new(0.0, 1.0).unwrap();
                FeatureMap::from_fn(4, 4, 4, |_, _, _| n.sample(&mut rng)).unwrap()
            };
            let shared = ConvLayer::seeded(3, 4, 4, &mut rng).unwrap();
            let cls = ConvLayer::seeded(1, 4, 18, &mut rng).unwrap();
            let reg = ConvLayer::seeded(1, 4, 36, &mut rng).unwrap();
            let rpn = rpn_forward(&features, &shared, &cls, &reg).unwrap();
            let image = ImageSize::new(64, 64).unwrap();
            let params = ProposalParams {
                pre_nms_top_n: 100,
                post_nms_top_n: 20,
                nms_iou_threshold: 0.7,
                min_box_size: 2.0,
            };
            let out = generate_proposals(&rpn, &set, image, &params).unwrap();
            prop_assert!(out.len() <= params.post_nms_top_n);
            for w in out.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            for s in &out {
                prop_assert!(s.bbox.x1() >= 0.0 && s.bbox.y1() >= 0.0);
                prop_assert!(s.bbox.x2() <= 64.0 && s.bbox.y2() <= 64.0);
                prop_assert!(s.bbox.area() > 0.0);
            }
            for i in 0..out.len() {
                for j in i + 1..out.len() {
                    prop_assert!(out[i].bbox.iou(&out[j].bbox) <= params.nms_iou_threshold);
                }
            }
        }
    }
}
