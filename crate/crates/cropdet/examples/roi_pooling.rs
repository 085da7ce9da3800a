//! RoI pooling: any rectangle of a feature map becomes a fixed 7x7 grid
//! by max-pooling quantized cells, ready for a fixed-width head.
//!
//! Run with `cargo run --example roi_pooling`.

use cropdet::geometry::BBox;
use cropdet::net::FeatureMap;
use cropdet::roi::{image_to_feature, roi_pool, RoiPoolConfig};

fn main() -> cropdet::Result<()> {
    // One channel, values equal to their column index, so pooled maxima
    // are easy to follow by eye.
    let map = FeatureMap::from_fn(1, 12, 12, |_, _, j| j as f64)?;
    let cfg = RoiPoolConfig::default();

    // A box in image coordinates lands on the feature grid via the
    // stride, rounded outward so nothing is cut off.
    let image_roi = BBox::new(37.0, 21.0, 155.0, 169.0)?;
    let feat_roi = image_to_feature(&image_roi, 16.0)?;
    println!("image roi {:?} / stride 16 -> feature roi {:?}", image_roi.coords(), feat_roi.coords());

    let pooled = roi_pool(&map, &feat_roi, &cfg)?;
    println!("\npooled {}x{} (channel 0):", cfg.height, cfg.width);
    for gy in 0..cfg.height {
        let row: Vec<String> = (0..cfg.width)
            .map(|gx| format!("{:4.1}", pooled[gy * cfg.width + gx]))
            .collect();
        println!("  {}", row.join(" "));
    }

    // A roi smaller than one output cell still fills all 49 slots: every
    // cell clamps onto at least one feature cell.
    let tiny = roi_pool(&map, &BBox::new(4.2, 6.1, 4.9, 6.8)?, &cfg)?;
    assert!(tiny.iter().all(|&v| v == 4.0));
    println!("\nsub-cell roi -> all 49 outputs read the one covered cell (4.0)");

    // Output is channel-major: c * 49 values for channel c.
    let three = FeatureMap::from_fn(3, 8, 8, |c, i, j| (c * 100 + i * 8 + j) as f64)?;
    let out = roi_pool(&three, &BBox::new(0.0, 0.0, 8.0, 8.0)?, &cfg)?;
    println!("3 channels -> {} values, one 7x7 block per channel", out.len());
    Ok(())
}
