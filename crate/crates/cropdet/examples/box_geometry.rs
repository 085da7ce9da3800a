//! Boxes, overlap, and clipping: the vocabulary everything else speaks.
//!
//! Run with `cargo run --example box_geometry`.

use cropdet::geometry::{BBox, ImageSize};

fn main() -> cropdet::Result<()> {
    // Corner convention: (x1, y1) top-left, (x2, y2) bottom-right,
    // x right, y down, strictly positive extent.
    let a = BBox::new(10.0, 10.0, 50.0, 40.0)?;
    let b = BBox::new(30.0, 20.0, 70.0, 60.0)?;
    println!("a = {:?}  area {}", a.coords(), a.area());
    println!("b = {:?}  area {}", b.coords(), b.area());

    // IoU is the matching currency of detection: overlap / union.
    println!("intersection = {}", a.intersection_area(&b));
    println!("iou          = {:.4}", a.iou(&b));
    println!("iou(a, a)    = {}", a.iou(&a));

    // Touching edges share no area.
    let right_neighbor = BBox::new(50.0, 10.0, 90.0, 40.0)?;
    println!("touching iou = {}", a.iou(&right_neighbor));

    // Clipping keeps the part inside an image, or nothing at all.
    let image = ImageSize::new(64, 64)?;
    let wild = BBox::new(-20.0, 30.0, 40.0, 100.0)?;
    match wild.clip(image) {
        Some(inside) => println!("{:?} clipped to {image} -> {:?}", wild.coords(), inside.coords()),
        None => println!("{:?} lies fully outside {image}", wild.coords()),
    }
    let far = BBox::new(100.0, 100.0, 120.0, 130.0)?;
    println!("far box clipped -> {:?}", far.clip(image).map(|c| c.coords()));

    // Construction rejects degenerate boxes instead of carrying them.
    let err = BBox::new(50.0, 10.0, 10.0, 40.0).unwrap_err();
    println!("inverted box: {err}");
    Ok(())
}
