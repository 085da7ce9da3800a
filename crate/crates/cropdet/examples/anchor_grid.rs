//! Anchor grids: k reference boxes stamped at every feature-map
//! position, all translations of one base set.
//!
//! Run with `cargo run --example anchor_grid`.

use cropdet::anchors::{base_anchors, tile, AnchorConfig};

fn main() -> cropdet::Result<()> {
    let cfg = AnchorConfig::default();
    println!(
        "base {} px, scales {:?}, ratios {:?}, stride {} -> k = {}",
        cfg.base_size, cfg.scales, cfg.ratios, cfg.stride, cfg.k()
    );

    // The base set sits centered on the first grid cell. Scaling the
    // base side and splitting it by sqrt(ratio) keeps the area fixed
    // per scale while the shape changes.
    println!("\nbase anchors (centered on ({}, {})):", cfg.stride / 2.0, cfg.stride / 2.0);
    for (a, anchor) in base_anchors(&cfg)?.iter().enumerate() {
        println!(
            "  a={a}  {:7.1} x {:7.1}  area {:9.1}  {:?}",
            anchor.width(),
            anchor.height(),
            anchor.area(),
            anchor.coords()
        );
    }

    // Tiling a 3x4 grid gives 3 * 4 * 9 boxes, indexed (row, col, a).
    let set = tile(&cfg, 3, 4)?;
    println!("\n3x4 grid -> {} anchors", set.len());

    // Moving one grid step moves every anchor by exactly one stride;
    // nothing else about it changes.
    let here = set.get(1, 2, 4);
    let right = set.get(1, 3, 4);
    println!("anchor (1,2,4): {:?}", here.coords());
    println!("anchor (1,3,4): {:?}", right.coords());
    assert_eq!(right.coords(), here.translate(cfg.stride, 0.0).coords());
    println!("one column over = same box shifted {} px", cfg.stride);
    Ok(())
}
