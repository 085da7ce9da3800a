//! The offset parameterization tying a target box to an anchor: center
//! shifts measured in anchor sides, sizes as log ratios.
//!
//! Run with `cargo run --example encode_decode`.

use cropdet::coding::{decode, encode, BoxDelta, MAX_SIZE_RATIO};
use cropdet::geometry::BBox;

fn main() -> cropdet::Result<()> {
    let anchor = BBox::new(0.0, 0.0, 16.0, 16.0)?;
    let target = BBox::new(6.0, 2.0, 30.0, 20.0)?;

    let d = encode(&target, &anchor);
    println!("anchor {:?}", anchor.coords());
    println!("target {:?}", target.coords());
    println!("delta  tx={:+.4} ty={:+.4} tw={:+.4} th={:+.4}", d.tx, d.ty, d.tw, d.th);

    let back = decode(&d, &anchor)?;
    println!("decode(encode(target)) = {:?}", back.coords());

    // The zero delta is the anchor itself: what an untrained regression
    // head should reproduce.
    let zero = BoxDelta::new(0.0, 0.0, 0.0, 0.0)?;
    assert_eq!(decode(&zero, &anchor)?.coords(), anchor.coords());
    println!("zero delta -> the anchor, exactly");

    // tw = ln 2 doubles the width; the log scale makes growth and
    // shrinkage symmetric around zero.
    let wider = decode(&BoxDelta::new(0.0, 0.0, 2.0f64.ln(), 0.0)?, &anchor)?;
    println!("tw = ln 2  -> width {} (from {})", wider.width(), anchor.width());

    // Decoding clamps runaway sizes: no prediction may blow a box up by
    // more than a factor of {MAX_SIZE_RATIO} per side.
    let absurd = decode(&BoxDelta::new(0.0, 0.0, 50.0, 0.0)?, &anchor)?;
    println!(
        "tw = 50 clamps to width {} = {} * {}",
        absurd.width(),
        anchor.width(),
        MAX_SIZE_RATIO
    );
    Ok(())
}
