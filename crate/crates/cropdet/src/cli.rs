//! Command-line surface. Five subcommands bind the library into a
//! detection workflow:
//!
//! - `eval`: score a detection file against annotations, print the mean
//!   average precision, optionally dump a JSON report and per-class
//!   precision/recall CSVs.
//! - `augment`: apply an op chain to every annotated image and write the
//!   transformed rasters plus a rewritten annotation file.
//! - `anchors`: dump a tiled anchor grid as JSON-lines.
//! - `propose`: run the proposal head over a stored feature map and emit
//!   scored boxes as a detection file.
//! - `render`: draw boxes over an image as an SVG overlay.
//!
//! Every command is deterministic given its flags and seed. Exit codes:
//! 0 success, 1 validation or usage failure, 2 I/O failure. Output files
//! are written atomically, so runs into distinct directories can share
//! nothing but the inputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::anchors::{tile, AnchorConfig};
use crate::augment::{apply, pipeline, AugmentOp};
use crate::error::{Error, Result};
use crate::eval::{evaluate_full, ApRule, DetectionMap, GroundTruthMap};
use crate::geometry::{BBox, ImageSize};
use crate::io::{
    fmt_f64, read_annotations, read_classes, read_detections, read_raster, read_tensors,
    write_annotations, write_atomic, write_detections, write_raster, AnnotatedImage,
    DetectionRecord, Tensor,
};
use crate::net::{rpn_forward, ConvLayer, FeatureMap};
use crate::proposals::{generate_proposals, ProposalParams, ScoredBox};
use crate::render::render_svg;

/// Fraction of a box's area that must stay visible through a random
/// crop for the box to survive into the output annotations.
const CROP_MIN_VISIBILITY: f64 = 0.25;

#[derive(Parser)]
#[command(
    name = "cropdet",
    version,
    about = "Detection toolkit: evaluate, augment, and inspect box pipelines"
)]
struct Cli {
    /// Worker threads (overrides the CROPDET_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections against ground truth and print the mAP.
    Eval(EvalArgs),
    /// Transform annotated images and rewrite their annotations.
    Augment(AugmentArgs),
    /// Dump a tiled anchor grid as JSON-lines.
    Anchors(AnchorsArgs),
    /// Run the proposal head over a stored feature map.
    Propose(ProposeArgs),
    /// Draw boxes over an image as an SVG overlay.
    Render(RenderArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth annotation file (JSON-lines).
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Detection file (JSON-lines).
    #[arg(long, value_name = "FILE")]
    det: PathBuf,
    /// Ordered class list (JSON array).
    #[arg(long, value_name = "FILE")]
    classes: PathBuf,
    /// Overlap threshold: a detection matches only above this IoU.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Write the full per-class report as JSON.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write one precision/recall CSV per class into this directory.
    #[arg(long, value_name = "DIR")]
    pr_dir: Option<PathBuf>,
    /// Average precision over 11 fixed recall levels instead of the
    /// exact envelope area.
    #[arg(long)]
    eleven_point: bool,
}

#[derive(Args)]
struct AugmentArgs {
    /// Annotation file naming the images to transform.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Directory holding the source images.
    #[arg(long, value_name = "DIR")]
    img_dir: PathBuf,
    /// Directory for transformed images and the rewritten annotations.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Comma-separated op chain, applied left to right. Tokens:
    /// rot90r, rot90l, zoom:F, stretch:SX:SY, crop:FRAC, elastic:ALPHA:SIGMA.
    #[arg(long)]
    ops: String,
    /// Base seed; image index and op position are folded in so every
    /// image draws independent randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Downscale any result exceeding WxH, preserving aspect ratio.
    #[arg(long, value_name = "WxH", default_value = "1200x1100", value_parser = parse_size)]
    resize_limit: (u32, u32),
}

#[derive(Args)]
struct AnchorsArgs {
    /// Feature-grid size as WxH (positions, not pixels).
    #[arg(long, value_name = "WxH", value_parser = parse_size)]
    grid: (u32, u32),
    /// Image pixels between adjacent grid positions.
    #[arg(long, default_value_t = 16.0)]
    stride: f64,
    /// Side of the reference box before scaling.
    #[arg(long, default_value_t = 16.0)]
    base_size: f64,
    /// Comma-separated multipliers applied to the base side.
    #[arg(long, default_value = "8,16,32")]
    scales: String,
    /// Comma-separated height/width aspect ratios.
    #[arg(long, default_value = "0.5,1,2")]
    ratios: String,
    /// Output file; prints to standard output when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("init").required(true)))]
struct ProposeArgs {
    /// Tensor manifest holding the input feature map (tensor named
    /// "features", shape [channels, height, width]).
    #[arg(long, value_name = "FILE")]
    features: PathBuf,
    /// Tensor manifest holding the head weights.
    #[arg(long, value_name = "FILE", group = "init")]
    weights: Option<PathBuf>,
    /// Draw random head weights from this seed instead of a file.
    #[arg(long, group = "init")]
    seed: Option<u64>,
    /// Image pixels between adjacent grid positions.
    #[arg(long, default_value_t = 16.0)]
    stride: f64,
    /// Side of the reference box before scaling.
    #[arg(long, default_value_t = 16.0)]
    base_size: f64,
    /// Comma-separated multipliers applied to the base side.
    #[arg(long, default_value = "8,16,32")]
    scales: String,
    /// Comma-separated height/width aspect ratios.
    #[arg(long, default_value = "0.5,1,2")]
    ratios: String,
    /// Pixel size of the source image; defaults to grid * stride.
    #[arg(long, value_name = "WxH", value_parser = parse_size)]
    image_size: Option<(u32, u32)>,
    /// Candidates kept per image before overlap suppression.
    #[arg(long, default_value_t = 6000)]
    pre_nms: usize,
    /// Proposals kept per image after overlap suppression.
    #[arg(long, default_value_t = 300)]
    post_nms: usize,
    /// Overlap above which a lower-scoring candidate is suppressed.
    #[arg(long, default_value_t = 0.7)]
    nms_iou: f64,
    /// Minimum proposal side length in pixels.
    #[arg(long, default_value_t = 2.0)]
    min_size: f64,
    /// Image key written into the detection record.
    #[arg(long, default_value = "image")]
    image_id: String,
    /// Label stamped on every proposal.
    #[arg(long, default_value = "proposal")]
    label: String,
    /// Output detection file (JSON-lines).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Image to draw over (P6/P5; referenced from the SVG, not embedded).
    #[arg(long, value_name = "FILE")]
    image: PathBuf,
    /// Detection file to pull boxes from; omit for a bare overlay.
    #[arg(long, value_name = "FILE")]
    boxes: Option<PathBuf>,
    /// Record to select from the detection file; defaults to the image
    /// file name.
    #[arg(long)]
    image_id: Option<String>,
    /// Output SVG file.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// Entry point for the binary: parses, runs, maps errors to exit codes.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage failures exit 1 (2 is reserved for I/O); --help and
            // --version are not failures at all.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            i32::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Eval(args) => cmd_eval(&args),
        Command::Augment(args) => cmd_augment(&args),
        Command::Anchors(args) => cmd_anchors(&args),
        Command::Propose(args) => cmd_propose(&args),
        Command::Render(args) => cmd_render(&args),
    }
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CROPDET_THREADS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                Error::validation(format!("CROPDET_THREADS must be a number, got \"{v}\""))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::validation("thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

/// Parses "WxH" into (width, height), both at least 1.
fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let err = || format!("invalid size \"{s}\": expected WIDTHxHEIGHT, like 1200x1100");
    let (w, h) = s.split_once('x').ok_or_else(err)?;
    let w: u32 = w.parse().map_err(|_| err())?;
    let h: u32 = h.parse().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(err());
    }
    Ok((w, h))
}

fn parse_f64_list(flag: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| {
                Error::validation(format!("--{flag}: invalid number \"{tok}\""))
            })
        })
        .collect()
}

fn anchor_config(stride: f64, base_size: f64, scales: &str, ratios: &str) -> Result<AnchorConfig> {
    let cfg = AnchorConfig {
        base_size,
        scales: parse_f64_list("scales", scales)?,
        ratios: parse_f64_list("ratios", ratios)?,
        stride,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn box_json(b: &BBox) -> String {
    let c = b.coords();
    format!(
        "[{},{},{},{}]",
        fmt_f64(c[0]),
        fmt_f64(c[1]),
        fmt_f64(c[2]),
        fmt_f64(c[3])
    )
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

// ---- eval ----------------------------------------------------------------

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let gts: GroundTruthMap = read_annotations(&args.gt)?
        .into_iter()
        .map(|a| (a.image, a.objects))
        .collect();
    let dets: DetectionMap = read_detections(&args.det)?
        .into_iter()
        .map(|d| (d.image, d.detections))
        .collect();
    let classes = read_classes(&args.classes)?;
    let rule = if args.eleven_point {
        ApRule::ElevenPoint
    } else {
        ApRule::Envelope
    };

    let (report, curves) = evaluate_full(&gts, &dets, &classes, args.iou, rule)?;

    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).expect("report always serializes");
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    if let Some(dir) = &args.pr_dir {
        create_dir(dir)?;
        for curve in &curves {
            let name: String = curve
                .label
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
                .collect();
            write_atomic(&dir.join(format!("{name}.csv")), curve.to_csv().as_bytes())?;
        }
    }

    println!("mAP: {:.4}", report.map);
    Ok(())
}

// ---- augment ---------------------------------------------------------------

/// A parsed op token. Elastic warps get their seed assigned per image,
/// so the template holds everything but the seed.
#[derive(Debug)]
enum OpTemplate {
    Fixed(AugmentOp),
    Elastic { alpha: f64, sigma: f64 },
}

impl OpTemplate {
    fn materialize(&self, image_seed: u64, position: usize) -> AugmentOp {
        match self {
            OpTemplate::Fixed(op) => op.clone(),
            // Distinct elastic ops in one chain must not share noise, so
            // the op position lands in the high bits.
            OpTemplate::Elastic { alpha, sigma } => AugmentOp::Elastic {
                alpha: *alpha,
                sigma: *sigma,
                seed: image_seed ^ (((position + 1) as u64) << 32),
            },
        }
    }
}

fn parse_ops(chain: &str) -> Result<Vec<OpTemplate>> {
    let mut out = Vec::new();
    for token in chain.split(',').map(str::trim) {
        let parts: Vec<&str> = token.split(':').collect();
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                Error::validation(format!("op \"{token}\": invalid number \"{s}\""))
            })
        };
        let template = match (parts[0], parts.len() - 1) {
            ("rot90r", 0) => OpTemplate::Fixed(AugmentOp::RotateRight),
            ("rot90l", 0) => OpTemplate::Fixed(AugmentOp::RotateLeft),
            ("zoom", 1) => OpTemplate::Fixed(AugmentOp::Zoom {
                factor: number(parts[1])?,
            }),
            ("stretch", 2) => OpTemplate::Fixed(AugmentOp::Stretch {
                sx: number(parts[1])?,
                sy: number(parts[2])?,
            }),
            ("crop", 1) => OpTemplate::Fixed(AugmentOp::RandomCrop {
                fraction: number(parts[1])?,
                min_visibility: CROP_MIN_VISIBILITY,
            }),
            ("elastic", 2) => OpTemplate::Elastic {
                alpha: number(parts[1])?,
                sigma: number(parts[2])?,
            },
            ("rot90r" | "rot90l" | "zoom" | "stretch" | "crop" | "elastic", n) => {
                return Err(Error::validation(format!(
                    "op \"{token}\": wrong number of parameters ({n})"
                )));
            }
            _ => {
                return Err(Error::validation(format!("unknown op token \"{token}\"")));
            }
        };
        // Catch bad ranges before any image is touched; elastic templates
        // validate with a placeholder seed, which takes no part in range
        // checks.
        template.materialize(0, 0).validate()?;
        out.push(template);
    }
    Ok(out)
}

fn cmd_augment(args: &AugmentArgs) -> Result<()> {
    let templates = parse_ops(&args.ops)?;
    let annotations = read_annotations(&args.input)?;
    create_dir(&args.out_dir)?;
    let (limit_w, limit_h) = args.resize_limit;

    let results: Vec<Result<AnnotatedImage>> = annotations
        .par_iter()
        .enumerate()
        .map(|(idx, ann)| -> Result<AnnotatedImage> {
            let src = args.img_dir.join(&ann.image);
            let img = read_raster(&src)?;
            if img.size() != ann.size {
                return Err(Error::validation(format!(
                    "{}: annotation declares {} but the image is {}",
                    src.display(),
                    ann.size,
                    img.size()
                )));
            }

            let image_seed = args.seed ^ (idx as u64);
            let ops: Vec<AugmentOp> = templates
                .iter()
                .enumerate()
                .map(|(pos, t)| t.materialize(image_seed, pos))
                .collect();
            let (mut out_img, mut objects) = pipeline(&img, &ann.objects, &ops, image_seed)?;

            if out_img.width() > limit_w as usize || out_img.height() > limit_h as usize {
                let s = (limit_w as f64 / out_img.width() as f64)
                    .min(limit_h as f64 / out_img.height() as f64);
                (out_img, objects) = apply(&out_img, &objects, &AugmentOp::Zoom { factor: s })?;
            }

            let dst = args.out_dir.join(&ann.image);
            if let Some(parent) = dst.parent() {
                create_dir(parent)?;
            }
            write_raster(&out_img, &dst)?;
            Ok(AnnotatedImage {
                image: ann.image.clone(),
                size: out_img.size(),
                objects,
            })
        })
        .collect();

    let outputs: Vec<AnnotatedImage> = results.into_iter().collect::<Result<_>>()?;
    write_annotations(&outputs, &args.out_dir.join("annotations.jsonl"))
}

// ---- anchors ---------------------------------------------------------------

fn cmd_anchors(args: &AnchorsArgs) -> Result<()> {
    let cfg = anchor_config(args.stride, args.base_size, &args.scales, &args.ratios)?;
    let (grid_w, grid_h) = args.grid;
    let set = tile(&cfg, grid_h as usize, grid_w as usize)?;

    let mut text = String::new();
    for i in 0..set.hf() {
        for j in 0..set.wf() {
            for a in 0..set.k() {
                text.push_str(&format!(
                    "{{\"i\":{i},\"j\":{j},\"a\":{a},\"box\":{}}}\n",
                    box_json(&set.get(i, j, a))
                ));
            }
        }
    }
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---- propose ---------------------------------------------------------------

fn find_tensor<'a>(tensors: &'a [Tensor], name: &str, path: &Path) -> Result<&'a Tensor> {
    tensors.iter().find(|t| t.name() == name).ok_or_else(|| {
        let names: Vec<&str> = tensors.iter().map(Tensor::name).collect();
        Error::validation(format!(
            "{}: no tensor named \"{name}\" (found: {})",
            path.display(),
            names.join(", ")
        ))
    })
}

/// Builds a conv layer from `<name>.weight` [out, in, kh, kw] and
/// `<name>.bias` [out] tensors.
fn conv_from_tensors(tensors: &[Tensor], name: &str, path: &Path) -> Result<ConvLayer> {
    let weight = find_tensor(tensors, &format!("{name}.weight"), path)?;
    let bias = find_tensor(tensors, &format!("{name}.bias"), path)?;
    let shape = weight.shape();
    if shape.len() != 4 || shape[2] != shape[3] {
        return Err(Error::validation(format!(
            "{}: tensor \"{name}.weight\" must have shape [out, in, k, k], got {shape:?}",
            path.display()
        )));
    }
    if bias.shape() != [shape[0]] {
        return Err(Error::validation(format!(
            "{}: tensor \"{name}.bias\" must have shape [{}], got {:?}",
            path.display(),
            shape[0],
            bias.shape()
        )));
    }
    ConvLayer::new(
        shape[2],
        shape[1],
        shape[0],
        weight.data().to_vec(),
        bias.data().to_vec(),
    )
}

fn cmd_propose(args: &ProposeArgs) -> Result<()> {
    let feature_tensors = read_tensors(&args.features)?;
    let feat = if feature_tensors.len() == 1 {
        &feature_tensors[0]
    } else {
        find_tensor(&feature_tensors, "features", &args.features)?
    };
    let shape = feat.shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::validation(format!(
            "{}: feature tensor must have shape [channels, height, width], got {shape:?}",
            args.features.display()
        )));
    }
    let features = FeatureMap::new(shape[0], shape[1], shape[2], feat.data().to_vec())?;
    let channels = features.channels();

    let cfg = anchor_config(args.stride, args.base_size, &args.scales, &args.ratios)?;
    let k = cfg.k();

    let (shared, cls, reg) = match (&args.weights, args.seed) {
        (Some(path), None) => {
            let tensors = read_tensors(path)?;
            let shared = conv_from_tensors(&tensors, "rpn.shared", path)?;
            if shared.in_channels() != channels {
                return Err(Error::validation(format!(
                    "rpn.shared.weight expects {} input channels but the feature map has {}",
                    shared.in_channels(),
                    channels
                )));
            }
            let cls = conv_from_tensors(&tensors, "rpn.cls", path)?;
            let reg = conv_from_tensors(&tensors, "rpn.reg", path)?;
            (shared, cls, reg)
        }
        (None, Some(seed)) => {
            // One generator feeds all three layers in a fixed order, so a
            // seed pins the whole head.
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (
                ConvLayer::seeded(3, channels, channels, &mut rng)?,
                ConvLayer::seeded(1, channels, 2 * k, &mut rng)?,
                ConvLayer::seeded(1, channels, 4 * k, &mut rng)?,
            )
        }
        _ => unreachable!("clap enforces exactly one of --weights/--seed"),
    };

    let rpn = rpn_forward(&features, &shared, &cls, &reg)?;
    let anchors = tile(&cfg, features.height(), features.width())?;
    let image = match args.image_size {
        Some((w, h)) => ImageSize::new(w, h)?,
        None => ImageSize::new(
            (features.width() as f64 * cfg.stride).ceil() as u32,
            (features.height() as f64 * cfg.stride).ceil() as u32,
        )?,
    };
    let params = ProposalParams {
        pre_nms_top_n: args.pre_nms,
        post_nms_top_n: args.post_nms,
        nms_iou_threshold: args.nms_iou,
        min_box_size: args.min_size,
    };

    let proposals = generate_proposals(&rpn, &anchors, image, &params)?;
    let detections: Vec<ScoredBox> = proposals
        .into_iter()
        .map(|p| p.with_label(args.label.as_str()))
        .collect();
    write_detections(
        &[DetectionRecord {
            image: args.image_id.clone(),
            detections,
        }],
        &args.out,
    )
}

// ---- render ----------------------------------------------------------------

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let raster = read_raster(&args.image)?;
    let image_id = match &args.image_id {
        Some(id) => id.clone(),
        None => args
            .image
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let boxes = match &args.boxes {
        Some(path) => read_detections(path)?
            .into_iter()
            .find(|r| r.image == image_id)
            .map(|r| r.detections)
            .ok_or_else(|| {
                Error::validation(format!(
                    "{} has no record for image \"{image_id}\"",
                    path.display()
                ))
            })?,
        None => Vec::new(),
    };
    let svg = render_svg(&args.image.to_string_lossy(), raster.size(), &boxes);
    write_atomic(&args.out, svg.as_bytes())
}
