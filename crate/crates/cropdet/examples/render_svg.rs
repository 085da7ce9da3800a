//! Overlaying detections on an image as an SVG document.
//!
//! The output references the raster by path and draws one rectangle plus
//! caption per box, colored by label. Run with
//! `cargo run --example render_svg`, or pipe the output into a file and
//! open it next to the image it names.

use cropdet::geometry::{BBox, ImageSize};
use cropdet::proposals::ScoredBox;
use cropdet::render::render_svg;

fn main() -> cropdet::Result<()> {
    let size = ImageSize::new(320, 240)?;
    let boxes = vec![
        ScoredBox::new(BBox::new(24.0, 30.0, 120.0, 150.0)?, 0.92)?.with_label("weed"),
        ScoredBox::new(BBox::new(150.0, 40.0, 280.0, 110.0)?, 0.81)?.with_label("corn_leaf"),
        ScoredBox::new(BBox::new(180.0, 2.0, 260.0, 60.0)?, 0.33)?.with_label("weed"),
        ScoredBox::new(BBox::new(10.0, 180.0, 90.0, 230.0)?, 0.5)?,
    ];

    let svg = render_svg("plot_a.ppm", size, &boxes);
    print!("{svg}");

    // Same label, same stroke; the caption hugs the top edge when the box
    // starts too high for text above it.
    assert_eq!(svg.matches("stroke=\"").count(), boxes.len());
    Ok(())
}
