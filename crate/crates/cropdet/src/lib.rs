//! Desk-scale building blocks for two-stage object detection on crop
//! imagery: anchor grids, a small region-proposal head, RoI pooling,
//! greedy overlap suppression, average-precision evaluation, and
//! box-aware image augmentation, plus the file formats that tie them
//! into a command-line workflow.
//!
//! Everything runs on the CPU in f64 and is deterministic given its
//! inputs and seeds. None of it is trained; the point is exact,
//! testable mechanics of the boxes-and-scores plumbing around a
//! detector, at sizes where oracles can check every answer.
//!
//! The `examples/` directory is the guided tour, one runnable program
//! per capability:
//!
//! - `box_geometry`: boxes, overlap, clipping.
//! - `anchor_grid`: reference boxes tiled over a feature grid.
//! - `encode_decode`: the offset parameterization between anchors and
//!   targets.
//! - `rpn_forward`: the conv head that scores and regresses anchors.
//! - `roi_pooling`: fixed-size pooling of arbitrary regions.
//! - `proposal_pipeline`: decode, clip, filter, suppress, rank.
//! - `evaluate_map`: matching, PR curves, mean average precision.
//! - `augment_boxes`: rotations, crops, warps with box bookkeeping.
//! - `render_svg`: overlay output for eyeballing results.
//!
//! The `cropdet` binary wraps the same pieces as subcommands (`eval`,
//! `augment`, `anchors`, `propose`, `render`); see [`cli`].

pub mod anchors;
pub mod augment;
pub mod cli;
pub mod coding;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod net;
pub mod proposals;
pub mod render;
pub mod roi;

pub use error::{Error, Result};
pub use geometry::{BBox, ImageSize};
