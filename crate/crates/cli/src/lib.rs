//! `depthedge` command-line front end. All file I/O lives here; the numeric
//! work is delegated to `depthedge-core`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use depthedge_core::bokeh::{self, BokehParams};
use depthedge_core::graph::{count_macs, count_params, preprocess, pydnet_preset, random_weights};
use depthedge_core::metrics::{self, MetricsReport};
use depthedge_core::scale_align::{self, AlignMode, RansacConfig};
use depthedge_core::timing::{self, LatencyStats};
use depthedge_core::{DepthMap, Network, WeightStore};

pub mod io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "depthedge", version, about = "Single-image depth estimation on the CPU")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict relative inverse depth for one image.
    Infer(InferArgs),
    /// Score predictions against ground-truth depth.
    Eval(EvalArgs),
    /// Blur the near part of an image.
    Bokeh(BokehArgs),
    /// Recover metric scale from sparse anchors.
    Align(AlignArgs),
    /// Time repeated inference.
    Bench(BenchArgs),
    /// Report parameter and multiply-accumulate counts.
    Macs(SizeArgs),
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 384)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// 16-bit PNG of round(d * 65535).
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the lossless LDRF map.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[command(flatten)]
    pub size: SizeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Align {
    Median,
    Lsq,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredKind {
    /// Relative inverse depth, as written by `infer`.
    Inverse,
    /// Depth in scene units.
    Depth,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predictions (`.ldrf` or 16-bit `.png`).
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of 16-bit ground-truth PNGs with matching file stems.
    #[arg(long)]
    pub gt: PathBuf,
    /// Defaults to `lsq` for inverse predictions and `median` for depth.
    #[arg(long, value_enum)]
    pub align: Option<Align>,
    #[arg(long, value_enum, default_value_t = PredKind::Inverse)]
    pub pred_kind: PredKind,
    #[arg(long, default_value_t = metrics::DEFAULT_CAP_OUTDOOR)]
    pub cap: f64,
    /// Ground-truth depth is `value / gt_scale`.
    #[arg(long, default_value_t = 256.0)]
    pub gt_scale: f64,
}

#[derive(Debug, Args)]
pub struct BokehArgs {
    #[arg(long, required_unless_present = "depth", conflicts_with = "depth")]
    pub weights: Option<PathBuf>,
    /// Use a precomputed inverse-depth map instead of running the network.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = bokeh::DEFAULT_TAU)]
    pub tau: f32,
    #[arg(long, default_value_t = bokeh::DEFAULT_KERNEL)]
    pub kernel: usize,
    #[arg(long, default_value_t = bokeh::DEFAULT_SIGMA)]
    pub sigma: f32,
    /// Blur pixels at or below tau instead of above it.
    #[arg(long)]
    pub invert_selection: bool,
    #[command(flatten)]
    pub size: SizeArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Scale,
    ScaleShift,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub anchors: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Scale)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Without a bundle, seeded random weights are used.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = timing::DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long, default_value_t = timing::DEFAULT_WARMUP)]
    pub warmup: usize,
    #[command(flatten)]
    pub size: SizeArgs,
    /// Time decode and resize along with the network.
    #[arg(long, requires = "input")]
    pub include_preprocess: bool,
    /// Image to run; a synthetic frame is used otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs one subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            let _ = if help { write!(out, "{text}") } else { write!(err, "{text}") };
            return if help { EXIT_OK } else { EXIT_USAGE };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FAILURE
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Infer(a) => infer(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Bokeh(a) => run_bokeh(a, out),
        Command::Align(a) => align(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Macs(a) => macs(a, out),
    }
}

pub fn load_weights(path: &Path) -> Result<WeightStore> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    WeightStore::load(BufReader::new(file)).with_context(|| format!("cannot load weights from {}", path.display()))
}

fn build_network(store: &WeightStore, size: SizeArgs) -> Result<Network> {
    let spec = pydnet_preset((size.height, size.width))?;
    Ok(Network::build(spec, store)?)
}

fn predict(weights: &Path, input: &Path, size: SizeArgs) -> Result<DepthMap> {
    let net = build_network(&load_weights(weights)?, size)?;
    let image = io::read_rgb(input)?;
    Ok(net.infer(&preprocess(&image, size.width, size.height)?)?)
}

fn infer(a: InferArgs, out: &mut dyn Write) -> Result<()> {
    let depth = predict(&a.weights, &a.input, a.size)?;
    io::write_depth_png(&a.output, &depth)?;
    if let Some(raw) = &a.raw {
        io::write_ldrf(raw, &depth)?;
    }
    writeln!(out, "wrote {}x{} depth to {}", depth.width(), depth.height(), a.output.display())?;
    Ok(())
}

/// Files in `dir` keyed by stem, sorted.
fn files_by_stem(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_owned(), path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Converts one prediction to metric depth for scoring.
fn aligned_depth(pred: &[f32], gt: &[f32], valid: &[bool], kind: PredKind, align: Align, cap: f64) -> Result<Vec<f32>> {
    let floor = (1.0 / cap) as f32;
    let invert = |v: &[f32]| -> Vec<f32> { v.iter().map(|&d| 1.0 / d.max(floor)).collect() };
    Ok(match (kind, align) {
        (PredKind::Inverse, Align::Lsq) => {
            let (s, b) = metrics::lsq_align_inverse(pred, gt, valid)?;
            pred.iter().map(|&d| (1.0 / (s * d as f64 + b).max(1.0 / cap)) as f32).collect()
        }
        (PredKind::Depth, Align::Lsq) => {
            let inv = invert(pred);
            let (s, b) = metrics::lsq_align_inverse(&inv, gt, valid)?;
            inv.iter().map(|&d| (1.0 / (s * d as f64 + b).max(1.0 / cap)) as f32).collect()
        }
        (PredKind::Inverse, Align::Median) => metrics::median_align(&invert(pred), gt, valid)?,
        (PredKind::Depth, Align::Median) => metrics::median_align(pred, gt, valid)?,
        (PredKind::Inverse, Align::None) => invert(pred),
        (PredKind::Depth, Align::None) => pred.to_vec(),
    })
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.gt_scale > 0.0) {
        bail!("--gt-scale must be positive");
    }
    let align = a.align.unwrap_or(match a.pred_kind {
        PredKind::Inverse => Align::Lsq,
        PredKind::Depth => Align::Median,
    });
    let gts = files_by_stem(&a.gt)?;
    let preds = files_by_stem(&a.pred)?;
    let mut reports = Vec::new();
    for (stem, gt_path) in &gts {
        let Some((_, pred_path)) = preds.iter().find(|(s, _)| s == stem) else {
            bail!("no prediction for ground truth {}", gt_path.display());
        };
        let (w, h, gt, valid) = io::read_ground_truth(gt_path, a.gt_scale)?;
        let mut pred = io::read_prediction(pred_path)?;
        if (pred.width(), pred.height()) != (w, h) {
            pred = pred.resized(w, h)?;
        }
        let depth = aligned_depth(pred.values(), &gt, &valid, a.pred_kind, align, a.cap)
            .with_context(|| format!("aligning {}", pred_path.display()))?;
        reports.push(
            metrics::compute_metrics(&depth, &gt, &valid, a.cap)
                .with_context(|| format!("scoring {}", pred_path.display()))?,
        );
    }
    let Some(mean) = MetricsReport::mean(&reports) else {
        bail!("no ground-truth files in {}", a.gt.display());
    };
    writeln!(out, "{}", MetricsReport::CSV_HEADER)?;
    writeln!(out, "{}", mean.to_csv_row())?;
    Ok(())
}

fn run_bokeh(a: BokehArgs, out: &mut dyn Write) -> Result<()> {
    let image = io::read_rgb(&a.input)?;
    let depth = match (&a.depth, &a.weights) {
        (Some(d), _) => io::read_prediction(d)?,
        (None, Some(w)) => {
            let net = build_network(&load_weights(w)?, a.size)?;
            net.infer(&preprocess(&image, a.size.width, a.size.height)?)?
        }
        (None, None) => bail!("either --weights or --depth is required"),
    };
    let params = BokehParams {
        tau: a.tau,
        kernel_size: a.kernel,
        sigma: a.sigma,
        invert_selection: a.invert_selection,
    };
    let result = bokeh::apply_bokeh(&image, &depth, &params)?;
    io::write_rgb_png(&a.output, &result)?;
    writeln!(out, "wrote {}", a.output.display())?;
    Ok(())
}

fn align(a: AlignArgs, out: &mut dyn Write) -> Result<()> {
    let depth = io::read_prediction(&a.depth)?;
    let file = File::open(&a.anchors).with_context(|| format!("cannot open {}", a.anchors.display()))?;
    let anchors = scale_align::parse_anchors(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", a.anchors.display()))?;
    let config = RansacConfig {
        iterations: a.iters,
        inlier_tol: a.tol,
        mode: match a.mode {
            ModeArg::Scale => AlignMode::ScaleOnly,
            ModeArg::ScaleShift => AlignMode::ScaleShift,
        },
        seed: a.seed,
    };
    let model = scale_align::ransac_scale(&depth, &anchors, &config)?;
    writeln!(out, "scale,shift,inliers")?;
    writeln!(out, "{},{},{}", model.scale, model.shift, model.inlier_count)?;
    Ok(())
}

/// Times the network alone, or decode + resize + network with
/// `include_preprocess`.
pub fn bench_stats(a: &BenchArgs) -> Result<LatencyStats> {
    let spec = pydnet_preset((a.size.height, a.size.width))?;
    let store = match &a.weights {
        Some(path) => load_weights(path)?,
        None => random_weights(&spec, a.seed),
    };
    let net = Network::build(spec, &store)?;
    let (w, h) = (a.size.width, a.size.height);
    if a.include_preprocess {
        let path = a.input.clone().context("--include-preprocess needs --input")?;
        return Ok(timing::measure(a.warmup, a.iters, || {
            let image = io::read_rgb(&path).map_err(|e| depthedge_core::Error::Format(format!("{e:#}")))?;
            net.infer(&preprocess(&image, w, h)?).map(drop)
        })?);
    }
    let input = match &a.input {
        Some(path) => preprocess(&io::read_rgb(path)?, w, h)?,
        None => preprocess(&synthetic_frame(w, h), w, h)?,
    };
    Ok(timing::measure(a.warmup, a.iters, || net.infer(&input).map(drop))?)
}

/// Deterministic stand-in image for timing runs.
pub fn synthetic_frame(width: usize, height: usize) -> depthedge_core::RgbImage {
    depthedge_core::RgbImage::from_fn(width, height, |x, y| {
        [(x * 255 / width.max(1)) as u8, (y * 255 / height.max(1)) as u8, ((x ^ y) & 0xff) as u8]
    })
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<()> {
    let stats = bench_stats(&a)?;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    writeln!(out, "width,height,iterations,mean_ms,min_ms,max_ms,fps")?;
    writeln!(
        out,
        "{},{},{},{:.3},{:.3},{:.3},{:.2}",
        a.size.width,
        a.size.height,
        stats.iterations,
        ms(stats.mean),
        ms(stats.min),
        ms(stats.max),
        stats.fps()
    )?;
    Ok(())
}

fn macs(a: SizeArgs, out: &mut dyn Write) -> Result<()> {
    let spec = pydnet_preset((a.height, a.width))?;
    let macs = count_macs(&spec, (a.height, a.width))?;
    writeln!(out, "width,height,params,macs,gmac")?;
    writeln!(out, "{},{},{},{},{:.3}", a.width, a.height, count_params(&spec), macs, macs as f64 / 1e9)?;
    Ok(())
}
