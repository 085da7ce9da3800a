//! The proposal head: one shared 3x3 conv, then sibling 1x1 convs that
//! emit 2k objectness logits and 4k box offsets per grid position.
//!
//! Run with `cargo run --example rpn_forward`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use cropdet::net::{rpn_forward, ConvLayer, FeatureMap};

fn main() -> cropdet::Result<()> {
    let (channels, height, width, k) = (8, 5, 6, 9);

    // A stand-in for a backbone's output: smooth bumps, no learning.
    let features = FeatureMap::from_fn(channels, height, width, |c, i, j| {
        ((i as f64 * 0.9 + c as f64) * 0.7).sin() * ((j as f64 * 1.3 - c as f64) * 0.5).cos()
    })?;

    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let shared = ConvLayer::seeded(3, channels, channels, &mut rng)?;
    let cls = ConvLayer::seeded(1, channels, 2 * k, &mut rng)?;
    let reg = ConvLayer::seeded(1, channels, 4 * k, &mut rng)?;

    let out = rpn_forward(&features, &shared, &cls, &reg)?;
    println!(
        "features {}x{}x{} -> cls {}x{}x{}, reg {}x{}x{}",
        channels, height, width,
        out.cls_map().channels(), out.height(), out.width(),
        out.reg_map().channels(), out.height(), out.width(),
    );

    // Each anchor slot holds a softmax pair; the object probability is
    // the second half of it.
    let mut scored: Vec<(f64, usize, usize, usize)> = Vec::new();
    for i in 0..out.height() {
        for j in 0..out.width() {
            for a in 0..out.k() {
                scored.push((out.objectness(i, j, a), i, j, a));
            }
        }
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));

    println!("\ntop 5 anchor slots by objectness:");
    for &(p, i, j, a) in scored.iter().take(5) {
        let d = out.delta(i, j, a);
        println!(
            "  ({i},{j},a={a})  p={p:.4}  delta = ({:+.3}, {:+.3}, {:+.3}, {:+.3})",
            d.tx, d.ty, d.tw, d.th
        );
    }

    // Untrained weights hover near indifference; the point here is the
    // contract (shapes, normalization), not the scores.
    let mean: f64 = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
    println!("\nmean objectness over {} slots: {mean:.4}", scored.len());
    Ok(())
}
