//! Geometric augmentation that keeps labels honest: every op transforms
//! the raster and its boxes together, dropping boxes that fall outside.
//!
//! Run with `cargo run --example augment_boxes`.

use cropdet::augment::{apply, pipeline, resize_to_limit, AugmentOp, CropRegion, Raster};
use cropdet::eval::GroundTruthObject;
use cropdet::geometry::BBox;

/// Gray canvas with a white block wherever a box claims an object is.
fn scene(w: usize, h: usize, objects: &[GroundTruthObject]) -> cropdet::Result<Raster> {
    let mut img = Raster::filled(w, h, 1, 64)?;
    for o in objects {
        let c = o.bbox.coords();
        for y in c[1] as usize..(c[3] as usize).min(h) {
            for x in c[0] as usize..(c[2] as usize).min(w) {
                img.set(x, y, 0, 255);
            }
        }
    }
    Ok(img)
}

fn show(tag: &str, img: &Raster, objects: &[GroundTruthObject]) {
    println!("{tag}: {}x{} px, {} boxes", img.width(), img.height(), objects.len());
    for o in objects {
        let c = o.bbox.coords();
        println!(
            "  {:10} [{:6.1}, {:6.1}, {:6.1}, {:6.1}]",
            o.label, c[0], c[1], c[2], c[3]
        );
    }
}

fn main() -> cropdet::Result<()> {
    let objects = vec![
        GroundTruthObject {
            label: "weed".to_string(),
            bbox: BBox::new(6.0, 8.0, 22.0, 30.0)?,
        },
        GroundTruthObject {
            label: "corn_leaf".to_string(),
            bbox: BBox::new(40.0, 4.0, 58.0, 18.0)?,
        },
    ];
    let img = scene(64, 40, &objects)?;
    show("input", &img, &objects);

    // A quarter turn is exact: pixels move, nothing is resampled.
    let (rot, rot_boxes) = apply(&img, &objects, &AugmentOp::RotateRight)?;
    show("\nrot90r", &rot, &rot_boxes);

    // Zoom scales boxes with the raster.
    let (big, big_boxes) = apply(&img, &objects, &AugmentOp::Zoom { factor: 1.5 })?;
    show("\nzoom 1.5", &big, &big_boxes);

    // A crop around the weed keeps it and discards the leaf entirely.
    let crop = AugmentOp::Crop {
        region: CropRegion {
            x: 0,
            y: 0,
            width: 32,
            height: 36,
        },
        min_visibility: 0.25,
    };
    let (cut, cut_boxes) = apply(&img, &objects, &crop)?;
    show("\ncrop 32x36 at origin", &cut, &cut_boxes);
    assert_eq!(cut_boxes.len(), 1);

    // Chained ops, with the elastic warp drawing its noise from the seed.
    let ops = [
        AugmentOp::RotateLeft,
        AugmentOp::Stretch { sx: 1.2, sy: 0.9 },
        AugmentOp::Elastic {
            alpha: 2.0,
            sigma: 4.0,
            seed: 17,
        },
    ];
    let (warped, warped_boxes) = pipeline(&img, &objects, &ops, 99)?;
    show("\nrot90l + stretch + elastic (seed 99)", &warped, &warped_boxes);

    let (again, again_boxes) = pipeline(&img, &objects, &ops, 99)?;
    assert_eq!(warped.samples(), again.samples());
    assert_eq!(warped_boxes, again_boxes);
    println!("\nsame seed, same bytes: the pipeline is reproducible");

    // Oversized frames shrink to fit a bound, aspect preserved.
    let boxes: Vec<BBox> = big_boxes.iter().map(|o| o.bbox).collect();
    let (fit, fit_boxes) = resize_to_limit(&big, &boxes, 48, 48)?;
    println!(
        "\nresize limit 48x48: {}x{} -> {}x{}, first box [{:.1}, {:.1}, {:.1}, {:.1}]",
        big.width(),
        big.height(),
        fit.width(),
        fit.height(),
        fit_boxes[0].x1(),
        fit_boxes[0].y1(),
        fit_boxes[0].x2(),
        fit_boxes[0].y2(),
    );
    Ok(())
}
