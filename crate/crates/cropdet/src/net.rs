//! Desk-scale forward passes: dense feature maps, small convolutions, the
//! region-proposal head, and the per-region classification head.
//!
//! Everything here runs inference only. Weights are supplied by the caller
//! (loaded from a tensor file or drawn from a seeded initializer); nothing
//! is ever trained. All arithmetic is f64 so results sit well inside the
//! tolerances the reference oracles are checked against, and forward
//! passes are pure: same weights and input give bit-identical output on a
//! given platform.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::coding::BoxDelta;
use crate::error::{Error, Result};

/// Dense `channels x height x width` grid of finite values.
///
/// Storage is row-major with channel outermost: value `(c, i, j)` lives at
/// `(c * height + i) * width + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::validation(format!(
                "feature map dimensions must be >= 1, got {channels}x{height}x{width}"
            )));
        }
        let expect = channels
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::validation("feature map size overflows index range"))?;
        if data.len() != expect {
            return Err(Error::validation(format!(
                "feature map {channels}x{height}x{width} needs {expect} values, got {}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "feature map contains non-finite value {bad}"
            )));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    /// Map filled by evaluating `f(c, i, j)` at every cell.
    pub fn from_fn<F>(channels: usize, height: usize, width: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data.push(f(c, i, j));
                }
            }
        }
        FeatureMap::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.height + i) * self.width + j]
    }
}

/// Square convolution kernel, 3x3 (zero padding 1, spatial size kept) or
/// 1x1 (no padding).
///
/// Weight layout is row-major `[out_channels, in_channels, ky, kx]`; this
/// is also the order the tensor file format stores.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if kernel != 1 && kernel != 3 {
            return Err(Error::validation(format!(
                "conv kernel must be 1x1 or 3x3, got {kernel}x{kernel}"
            )));
        }
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::validation(
                "conv layer must have at least one input and one output channel",
            ));
        }
        let expect = out_channels * in_channels * kernel * kernel;
        if weights.len() != expect {
            return Err(Error::validation(format!(
                "conv weights for {out_channels}x{in_channels}x{kernel}x{kernel} need {expect} values, got {}",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::validation(format!(
                "conv bias needs {out_channels} values, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("conv layer contains non-finite values"));
        }
        Ok(ConvLayer {
            kernel,
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    /// Gaussian(0, 0.01) weights, zero bias, drawn in layout order.
    pub fn seeded<R: Rng + ?Sized>(
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, 0.01).expect("fixed stddev is valid");
        let n = out_channels * in_channels * kernel * kernel;
        let weights = (0..n).map(|_| normal.sample(rng)).collect();
        ConvLayer::new(kernel, in_channels, out_channels, weights, vec![0.0; out_channels])
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn weight(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + c) * self.kernel + ky) * self.kernel + kx]
    }
}

/// Cross-correlation plus bias. 3x3 kernels use zero padding 1, so the
/// output keeps the input's spatial size; 1x1 kernels are unpadded and
/// keep it trivially.
pub fn conv_forward(input: &FeatureMap, layer: &ConvLayer) -> Result<FeatureMap> {
    if layer.in_channels != input.channels {
        return Err(Error::validation(format!(
            "conv layer expects {} input channels, feature map has {}",
            layer.in_channels, input.channels
        )));
    }
    let (h, w) = (input.height, input.width);
    let k = layer.kernel;
    let pad = (k - 1) / 2;
    // Output channels are independent; compute each plane in parallel and
    // splice them together in channel order so the result stays
    // deterministic.
    let planes: Vec<Vec<f64>> = (0..layer.out_channels)
        .into_par_iter()
        .map(|o| {
            let mut plane = vec![0.0; h * w];
            for i in 0..h {
                for j in 0..w {
                    let mut acc = layer.bias[o];
                    for c in 0..input.channels {
                        for ky in 0..k {
                            let ii = i + ky;
                            if ii < pad || ii - pad >= h {
                                continue;
                            }
                            for kx in 0..k {
                                let jj = j + kx;
                                if jj < pad || jj - pad >= w {
                                    continue;
                                }
                                acc += input.get(c, ii - pad, jj - pad)
                                    * layer.weight(o, c, ky, kx);
                            }
                        }
                    }
                    plane[i * w + j] = acc;
                }
            }
            plane
        })
        .collect();
    let mut data = Vec::with_capacity(layer.out_channels * h * w);
    for plane in planes {
        data.extend_from_slice(&plane);
    }
    FeatureMap::new(layer.out_channels, h, w, data)
}

fn relu(map: FeatureMap) -> FeatureMap {
    let (c, h, w) = (map.channels, map.height, map.width);
    let data = map.data.into_iter().map(|v| v.max(0.0)).collect();
    FeatureMap::new(c, h, w, data).expect("rectifier preserves validity")
}

/// Two-way softmax of `(not_object, object)` logits; returns the object
/// probability. Shift by the max first so large logits cannot overflow.
fn softmax_pair(not_obj: f64, obj: f64) -> f64 {
    let m = not_obj.max(obj);
    let e0 = (not_obj - m).exp();
    let e1 = (obj - m).exp();
    e1 / (e0 + e1)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Raw sibling outputs of the proposal head for one feature map.
///
/// `cls_map` holds 2k objectness logits per position, paired per anchor:
/// channel `2a` is the not-object logit and `2a + 1` the object logit of
/// anchor `a`. `reg_map` holds 4k values per position, `(tx, ty, tw, th)`
/// of anchor `a` in channels `4a .. 4a + 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct RpnOutput {
    k: usize,
    cls_map: FeatureMap,
    reg_map: FeatureMap,
}

impl RpnOutput {
    /// Assembles an output from precomputed sibling maps, checking the
    /// 2k/4k channel pairing and matching spatial sizes.
    pub fn from_maps(cls_map: FeatureMap, reg_map: FeatureMap) -> Result<Self> {
        if reg_map.channels() % 4 != 0 {
            return Err(Error::validation(format!(
                "reg map must carry 4k channels, got {} (not divisible by 4)",
                reg_map.channels()
            )));
        }
        let k = reg_map.channels() / 4;
        if cls_map.channels() != 2 * k {
            return Err(Error::validation(format!(
                "sibling map widths disagree: reg carries 4k = {} (k = {k}), so cls must carry 2k = {}, got {}",
                reg_map.channels(),
                2 * k,
                cls_map.channels()
            )));
        }
        if cls_map.height() != reg_map.height() || cls_map.width() != reg_map.width() {
            return Err(Error::validation(format!(
                "sibling maps must share spatial size, got {}x{} vs {}x{}",
                cls_map.height(),
                cls_map.width(),
                reg_map.height(),
                reg_map.width()
            )));
        }
        Ok(RpnOutput { k, cls_map, reg_map })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cls_map(&self) -> &FeatureMap {
        &self.cls_map
    }

    pub fn reg_map(&self) -> &FeatureMap {
        &self.reg_map
    }

    pub fn height(&self) -> usize {
        self.cls_map.height()
    }

    pub fn width(&self) -> usize {
        self.cls_map.width()
    }

    /// Softmax-normalized object probability of anchor `a` at `(i, j)`.
    pub fn objectness(&self, i: usize, j: usize, a: usize) -> f64 {
        softmax_pair(self.cls_map.get(2 * a, i, j), self.cls_map.get(2 * a + 1, i, j))
    }

    /// Regression offsets of anchor `a` at `(i, j)`.
    pub fn delta(&self, i: usize, j: usize, a: usize) -> BoxDelta {
        BoxDelta {
            tx: self.reg_map.get(4 * a, i, j),
            ty: self.reg_map.get(4 * a + 1, i, j),
            tw: self.reg_map.get(4 * a + 2, i, j),
            th: self.reg_map.get(4 * a + 3, i, j),
        }
    }
}

/// Shared 3x3 conv, rectifier, then the two sibling 1x1 convs.
///
/// k is read off the sibling shapes: reg must output 4k channels and cls
/// exactly 2k for the same k. Spatial size is preserved end to end.
pub fn rpn_forward(
    features: &FeatureMap,
    shared: &ConvLayer,
    cls: &ConvLayer,
    reg: &ConvLayer,
) -> Result<RpnOutput> {
    if shared.kernel() != 3 {
        return Err(Error::validation(format!(
            "shared RPN layer must be a 3x3 conv, got {0}x{0}",
            shared.kernel()
        )));
    }
    if cls.kernel() != 1 || reg.kernel() != 1 {
        return Err(Error::validation("sibling RPN layers must be 1x1 convs"));
    }
    if reg.out_channels() % 4 != 0 {
        return Err(Error::validation(format!(
            "reg layer must output 4k channels, got {} (not divisible by 4)",
            reg.out_channels()
        )));
    }
    let k = reg.out_channels() / 4;
    if cls.out_channels() != 2 * k {
        return Err(Error::validation(format!(
            "sibling layer widths disagree: reg outputs 4k = {} (k = {k}), so cls must output 2k = {}, got {}",
            reg.out_channels(),
            2 * k,
            cls.out_channels()
        )));
    }
    let trunk = relu(conv_forward(features, shared)?);
    let cls_map = conv_forward(&trunk, cls)?;
    let reg_map = conv_forward(&trunk, reg)?;
    Ok(RpnOutput { k, cls_map, reg_map })
}

/// Fully connected layer; weight layout row-major `[out_dim, in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::validation(
                "dense layer must have at least one input and one output",
            ));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::validation(format!(
                "dense weights for {out_dim}x{in_dim} need {} values, got {}",
                in_dim * out_dim,
                weights.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::validation(format!(
                "dense bias needs {out_dim} values, got {}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("dense layer contains non-finite values"));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    /// Gaussian(0, 0.01) weights, zero bias.
    pub fn seeded<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, 0.01).expect("fixed stddev is valid");
        let weights = (0..in_dim * out_dim).map(|_| normal.sample(rng)).collect();
        DenseLayer::new(in_dim, out_dim, weights, vec![0.0; out_dim])
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim {
            return Err(Error::validation(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok((0..self.out_dim)
            .map(|o| {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                self.bias[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect())
    }
}

/// Classification head result for one pooled region.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    /// Probabilities over C foreground classes followed by background;
    /// length C + 1, nonnegative, unit sum.
    pub class_probs: Vec<f64>,
    /// Raw regression offsets, 4 per foreground class: length 4C, class
    /// `c` in positions `4c .. 4c + 4` as `(tx, ty, tw, th)`.
    pub box_deltas: Vec<f64>,
}

impl HeadOutput {
    /// Number of foreground classes.
    pub fn num_classes(&self) -> usize {
        self.box_deltas.len() / 4
    }

    pub fn delta(&self, class: usize) -> BoxDelta {
        BoxDelta {
            tx: self.box_deltas[4 * class],
            ty: self.box_deltas[4 * class + 1],
            tw: self.box_deltas[4 * class + 2],
            th: self.box_deltas[4 * class + 3],
        }
    }

    /// Index of the most probable entry; `num_classes()` means background.
    pub fn argmax(&self) -> usize {
        self.class_probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("probs are finite"))
            .map(|(i, _)| i)
            .expect("C + 1 >= 2 entries")
    }
}

/// Runs a pooled region vector through dense layers into class
/// probabilities and per-class box offsets.
///
/// Every layer but the last is a hidden layer followed by a rectifier.
/// The last layer's width must be `(C + 1) + 4C`: the first C + 1 outputs
/// are class logits (softmaxed here), the remaining 4C are raw offsets.
pub fn head_forward(
    roi_vector: &[f64],
    fc_layers: &[DenseLayer],
    num_classes: usize,
) -> Result<HeadOutput> {
    if num_classes == 0 {
        return Err(Error::validation("detection head needs at least one class"));
    }
    if fc_layers.is_empty() {
        return Err(Error::validation("detection head needs at least one dense layer"));
    }
    let want_out = (num_classes + 1) + 4 * num_classes;
    let last = fc_layers.len() - 1;
    if fc_layers[last].out_dim() != want_out {
        return Err(Error::validation(format!(
            "final dense layer must output (C+1) + 4C = {want_out} values for C = {num_classes}, got {}",
            fc_layers[last].out_dim()
        )));
    }
    let mut x = roi_vector.to_vec();
    for (idx, layer) in fc_layers.iter().enumerate() {
        x = layer.forward(&x)?;
        if idx != last {
            for v in &mut x {
                *v = v.max(0.0);
            }
        }
    }
    let class_probs = softmax(&x[..num_classes + 1]);
    let box_deltas = x[num_classes + 1..].to_vec();
    Ok(HeadOutput {
        class_probs,
        box_deltas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn random_map(c: usize, h: usize, w: usize, seed: u64) -> FeatureMap {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut r = rng(seed);
        FeatureMap::from_fn(c, h, w, |_, _, _| normal.sample(&mut r)).unwrap()
    }

    /// Direct definition of padded cross-correlation, written without any
    /// shared code with `conv_forward`.
    fn conv_by_definition(input: &FeatureMap, layer: &ConvLayer) -> Vec<f64> {
        let k = layer.kernel() as isize;
        let pad = (k - 1) / 2;
        let (h, w) = (input.height() as isize, input.width() as isize);
        let mut out = Vec::new();
        for o in 0..layer.out_channels() {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = layer.bias()[o];
                    for c in 0..input.channels() {
                        for ky in 0..k {
                            for kx in 0..k {
                                let ii = i + ky - pad;
                                let jj = j + kx - pad;
                                if ii >= 0 && ii < h && jj >= 0 && jj < w {
                                    let wv = layer.weights()[((o * input.channels() + c)
                                        * layer.kernel()
                                        + ky as usize)
                                        * layer.kernel()
                                        + kx as usize];
                                    acc += input.get(c, ii as usize, jj as usize) * wv;
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let input = random_map(3, 5, 4, 7);
        // Weight 1 where out channel == in channel, else 0.
        let mut weights = vec![0.0; 9];
        for c in 0..3 {
            weights[c * 3 + c] = 1.0;
        }
        let layer = ConvLayer::new(1, 3, 3, weights, vec![0.0; 3]).unwrap();
        let out = conv_forward(&input, &layer).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn zero_weights_give_constant_bias() {
        let input = random_map(2, 4, 4, 8);
        let layer = ConvLayer::new(3, 2, 3, vec![0.0; 3 * 2 * 9], vec![1.5, -2.0, 0.25]).unwrap();
        let out = conv_forward(&input, &layer).unwrap();
        for o in 0..3 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(out.get(o, i, j), layer.bias()[o]);
                }
            }
        }
    }

    #[test]
    fn conv_matches_definition() {
        let input = random_map(3, 5, 5, 9);
        let layer = ConvLayer::seeded(3, 3, 4, &mut rng(10)).unwrap();
        let got = conv_forward(&input, &layer).unwrap();
        let want = conv_by_definition(&input, &layer);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9, "{g} vs {w}");
        }
    }

    #[test]
    fn conv_is_linear_with_zero_bias() {
        let x = random_map(2, 6, 5, 11);
        let y = random_map(2, 6, 5, 12);
        let layer = ConvLayer::new(
            3,
            2,
            2,
            ConvLayer::seeded(3, 2, 2, &mut rng(13)).unwrap().weights().to_vec(),
            vec![0.0; 2],
        )
        .unwrap();
        let (alpha, beta) = (2.5, -0.75);
        let mix = FeatureMap::from_fn(2, 6, 5, |c, i, j| {
            alpha * x.get(c, i, j) + beta * y.get(c, i, j)
        })
        .unwrap();
        let lhs = conv_forward(&mix, &layer).unwrap();
        let fx = conv_forward(&x, &layer).unwrap();
        let fy = conv_forward(&y, &layer).unwrap();
        for idx in 0..lhs.data().len() {
            let want = alpha * fx.data()[idx] + beta * fy.data()[idx];
            assert!((lhs.data()[idx] - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn conv_channel_mismatch_rejected() {
        let input = random_map(2, 3, 3, 14);
        let layer = ConvLayer::seeded(3, 3, 2, &mut rng(15)).unwrap();
        assert!(conv_forward(&input, &layer).is_err());
    }

    fn rpn_layers(c_in: usize, k: usize, seed: u64) -> (ConvLayer, ConvLayer, ConvLayer) {
        let mut r = rng(seed);
        let shared = ConvLayer::seeded(3, c_in, c_in, &mut r).unwrap();
        let cls = ConvLayer::seeded(1, c_in, 2 * k, &mut r).unwrap();
        let reg = ConvLayer::seeded(1, c_in, 4 * k, &mut r).unwrap();
        (shared, cls, reg)
    }

    #[test]
    fn rpn_shapes_for_nine_anchors() {
        let features = random_map(4, 6, 9, 16);
        let (shared, cls, reg) = rpn_layers(4, 9, 17);
        let out = rpn_forward(&features, &shared, &cls, &reg).unwrap();
        assert_eq!(out.k(), 9);
        assert_eq!(out.cls_map().channels(), 18);
        assert_eq!(out.reg_map().channels(), 36);
        assert_eq!((out.height(), out.width()), (6, 9));
    }

    #[test]
    fn rpn_preserves_tiny_spatial_sizes() {
        for (h, w) in [(1, 1), (1, 5), (3, 2)] {
            let features = random_map(2, h, w, 18);
            let (shared, cls, reg) = rpn_layers(2, 3, 19);
            let out = rpn_forward(&features, &shared, &cls, &reg).unwrap();
            assert_eq!((out.height(), out.width()), (h, w));
        }
    }

    #[test]
    fn objectness_is_normalized() {
        let features = random_map(3, 4, 4, 20);
        let (shared, cls, reg) = rpn_layers(3, 9, 21);
        let out = rpn_forward(&features, &shared, &cls, &reg).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for a in 0..9 {
                    let p_obj = out.objectness(i, j, a);
                    let p_not = softmax_pair(
                        out.cls_map().get(2 * a + 1, i, j),
                        out.cls_map().get(2 * a, i, j),
                    );
                    assert!((0.0..=1.0).contains(&p_obj));
                    assert!((p_obj + p_not - 1.0).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn mismatched_siblings_name_expected_widths() {
        let features = random_map(3, 4, 4, 22);
        let mut r = rng(23);
        let shared = ConvLayer::seeded(3, 3, 3, &mut r).unwrap();
        let cls = ConvLayer::seeded(1, 3, 20, &mut r).unwrap();
        let reg = ConvLayer::seeded(1, 3, 36, &mut r).unwrap();
        let err = rpn_forward(&features, &shared, &cls, &reg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2k = 18"), "message was: {msg}");
        assert!(msg.contains("4k = 36"), "message was: {msg}");
    }

    #[test]
    fn rpn_deterministic() {
        let features = random_map(3, 5, 5, 24);
        let (shared, cls, reg) = rpn_layers(3, 9, 25);
        let a = rpn_forward(&features, &shared, &cls, &reg).unwrap();
        let b = rpn_forward(&features, &shared, &cls, &reg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn head_counts_for_two_classes() {
        let mut r = rng(26);
        let layer = DenseLayer::seeded(10, 3 + 8, &mut r).unwrap();
        let input: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let out = head_forward(&input, &[layer], 2).unwrap();
        assert_eq!(out.class_probs.len(), 3);
        assert_eq!(out.box_deltas.len(), 8);
        assert_eq!(out.num_classes(), 2);
        let sum: f64 = out.class_probs.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-6);
        assert!(out.class_probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let c = 4;
        let layer = DenseLayer::new(6, (c + 1) + 4 * c, vec![0.0; 6 * 21], vec![0.0; 21]).unwrap();
        let out = head_forward(&[1.0, -2.0, 3.0, 0.5, -0.25, 2.0], &[layer], c).unwrap();
        for &p in &out.class_probs {
            assert!((p - 1.0 / 5.0).abs() <= 1e-12);
        }
        assert!(out.box_deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn head_matches_matmul_softmax_oracle() {
        let c = 2;
        let mut r = rng(27);
        let hidden = DenseLayer::seeded(8, 6, &mut r).unwrap();
        let output = DenseLayer::seeded(6, (c + 1) + 4 * c, &mut r).unwrap();
        let input: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) / 2.0).collect();

        let got = head_forward(&input, &[hidden.clone(), output.clone()], c).unwrap();

        // Recompute by hand: matmul, rectifier, matmul, softmax.
        let mut mid = vec![0.0; 6];
        for (o, m) in mid.iter_mut().enumerate() {
            let mut acc = hidden.bias()[o];
            for (idx, x) in input.iter().enumerate() {
                acc += hidden.weights()[o * 8 + idx] * x;
            }
            *m = acc.max(0.0);
        }
        let mut fin = vec![0.0; 11];
        for (o, f) in fin.iter_mut().enumerate() {
            let mut acc = output.bias()[o];
            for (idx, x) in mid.iter().enumerate() {
                acc += output.weights()[o * 6 + idx] * x;
            }
            *f = acc;
        }
        let denom: f64 = fin[..3].iter().map(|v| v.exp()).sum();
        for i in 0..3 {
            assert!((got.class_probs[i] - fin[i].exp() / denom).abs() <= 1e-9);
        }
        for i in 0..8 {
            assert!((got.box_deltas[i] - fin[3 + i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn head_rejects_wrong_shapes() {
        let layer = DenseLayer::new(4, 11, vec![0.0; 44], vec![0.0; 11]).unwrap();
        // Wrong input length.
        assert!(head_forward(&[0.0; 3], &[layer.clone()], 2).is_err());
        // Wrong final width for C = 3 (needs 16).
        assert!(head_forward(&[0.0; 4], &[layer], 3).is_err());
    }
}
