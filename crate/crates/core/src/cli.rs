//! The `patchmask` command line.
//!
//! Every command takes an optional `--config` JSON file whose keys mirror
//! [`RunConfig`]; flags given on the command line override file values.
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 calibration
//! did not converge.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::batch::shape_batch;
use crate::calibration::{self, calibrate_threshold, reevaluate_threshold};
use crate::contrastive::{train, Sample, StepOptions, TrainConfig};
use crate::error::{Error, Result};
use crate::io::{self, load_image, render_mask, save_image, stats_report};
use crate::masker::{MaskerConfig, Strategy};
use crate::patch_grid::{patchify, pixel_normalize};
use crate::rng::{self, stream};
use crate::synth;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

pub const MASKS_FILE: &str = "masks.txt";
pub const SHAPED_FILE: &str = "shaped.txt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

const DEFAULT_PATCH_SIZE: usize = 16;
const DEFAULT_TRAIN_SAMPLES: usize = 16;
const DEFAULT_TARGET_RATIO: f64 = 0.5;
const DEFAULT_MASK_ALPHA: f64 = 0.5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) | Error::Json(_) | Error::UnreachableTarget { .. } => {
            EXIT_CONFIG
        }
        Error::Convergence(_) => EXIT_CONVERGENCE,
        _ => EXIT_DATA,
    }
}

/// Settings shared by all commands, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Option<String>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub masker: MaskerConfig,
    pub beta: Option<f64>,
    pub render: bool,
    pub patch_size: Option<usize>,
    /// Blend weight on pixel similarity for `cluster-embedding` outside training.
    pub alpha: f64,
    pub target_ratio: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub sample_size: usize,
    pub dataset_size: usize,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            input: None,
            output: None,
            masker: MaskerConfig::default(),
            beta: None,
            render: false,
            patch_size: None,
            alpha: DEFAULT_MASK_ALPHA,
            target_ratio: DEFAULT_TARGET_RATIO,
            tolerance: calibration::DEFAULT_TOLERANCE,
            max_iters: calibration::DEFAULT_MAX_ITERS,
            sample_size: calibration::DEFAULT_SAMPLE_SIZE,
            dataset_size: DEFAULT_TRAIN_SAMPLES,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn input_dir(&self) -> Result<&Path> {
        let dir = self
            .input
            .as_deref()
            .ok_or_else(|| Error::Config("missing input path (--in)".into()))?;
        if !dir.exists() {
            return Err(Error::Config(format!("input {} does not exist", dir.display())));
        }
        Ok(dir)
    }

    fn output_dir(&self) -> Result<&Path> {
        let dir = self
            .output
            .as_deref()
            .ok_or_else(|| Error::Config("missing output path (--out)".into()))?;
        fs::create_dir_all(dir)?;
        Ok(dir)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "patchmask",
    version,
    about = "Cluster-based patch masking for image-text pre-training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mask every image in a directory.
    Mask(MaskArgs),
    /// Search the similarity threshold that hits a target mean mask ratio.
    Calibrate(CalibrateArgs),
    /// Train the toy contrastive model and log the loss per step.
    Train(TrainArgs),
    /// Summarize a mask file.
    Stats(StatsArgs),
    /// Write synthetic images (and captions) to a directory.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub anchor_ratio: Option<f64>,
    #[arg(long)]
    pub patch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Minimum mask ratio; when set, the shaped batch is written too.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub render: bool,
    /// Also write each similarity matrix as TSV.
    #[arg(long)]
    pub dump_sim: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub calibration_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Synthetic samples to generate when no input directory is given.
    #[arg(long)]
    pub dataset_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Patch-grid width used for counting masked regions; defaults to sqrt(L).
    #[arg(long)]
    pub cols: Option<usize>,
    /// Also write the summary as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthKind {
    /// Smoothed multi-octave noise.
    Noise,
    /// Four-quadrant color images with color-name captions.
    Color,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SynthKind::Noise)]
    pub kind: SynthKind,
}

impl clap::builder::ValueParserFactory for Strategy {
    type Parser = clap::builder::ValueParser;

    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Strategy>().map_err(|e| e.to_string()))
    }
}

fn resolve(common: &Common, command: &str) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(command.to_string());
    if let Some(v) = &common.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = common.seed {
        cfg.masker.seed = v;
    }
    if let Some(v) = common.strategy {
        cfg.masker.strategy = v;
    }
    if let Some(v) = common.anchor_ratio {
        cfg.masker.anchor_ratio = v;
    }
    if let Some(v) = common.patch_size {
        cfg.patch_size = Some(v);
    }
    Ok(cfg)
}

const IMAGE_EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];

/// Portable-pixmap files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .ppm/.pgm images in {}", dir.display())));
    }
    Ok(paths)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run_mask(args: MaskArgs) -> Result<String> {
    let mut cfg = resolve(&args.common, "mask")?;
    if let Some(v) = args.out {
        cfg.output = Some(v);
    }
    if let Some(v) = args.threshold {
        cfg.masker.threshold_r = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = Some(v);
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    cfg.render |= args.render;
    cfg.masker.validate()?;
    let patch_size = cfg.patch_size.unwrap_or(DEFAULT_PATCH_SIZE);
    let paths = list_images(cfg.input_dir()?)?;
    let out = cfg.output_dir()?.to_path_buf();

    let mut masks = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let image = load_image(path)?;
        let grid = pixel_normalize(&patchify(&image, patch_size)?);
        let mut rng = rng::derived(cfg.masker.seed, stream::MASK, i as u64);
        let mask = cfg.masker.mask_grid(&grid, cfg.alpha, &mut rng)?;
        if args.dump_sim {
            let sim = cfg.masker.similarity(&grid, cfg.alpha)?;
            fs::write(out.join(format!("{}.sim.tsv", stem(path))), sim.to_tsv())?;
        }
        if cfg.render {
            save_image(
                &out.join(format!("{}.mask.ppm", stem(path))),
                &render_mask(&image, &mask, patch_size)?,
            )?;
        }
        masks.push(mask);
    }
    io::write_masks(&out.join(MASKS_FILE), &masks)?;
    if let Some(beta) = cfg.beta {
        let shaped = shape_batch(&masks, beta, &mut rng::derived(cfg.masker.seed, stream::SHAPE, 0))?;
        fs::write(out.join(SHAPED_FILE), shaped.dump())?;
    }
    let stats = stats_report(&masks, None)?;
    Ok(format!(
        "masked {} images with {}: mean ratio {:.6}\n",
        masks.len(),
        cfg.masker.strategy,
        stats.mean
    ))
}

fn run_calibrate(args: CalibrateArgs) -> Result<String> {
    let mut cfg = resolve(&args.common, "calibrate")?;
    if let Some(v) = args.target {
        cfg.target_ratio = v;
    }
    if let Some(v) = args.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = args.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = args.sample_size {
        cfg.sample_size = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    cfg.masker.validate()?;
    if !cfg.masker.strategy.is_cluster() {
        return Err(Error::invalid(
            "strategy",
            "calibration applies to cluster strategies only",
        ));
    }
    if cfg.sample_size == 0 {
        return Err(Error::invalid("sample_size", "must be positive"));
    }
    let patch_size = cfg.patch_size.unwrap_or(DEFAULT_PATCH_SIZE);
    let paths = list_images(cfg.input_dir()?)?;
    let sample = paths
        .iter()
        .take(cfg.sample_size)
        .map(|p| {
            let grid = pixel_normalize(&patchify(&load_image(p)?, patch_size)?);
            cfg.masker.similarity(&grid, cfg.alpha)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = rng::derived(cfg.masker.seed, stream::CALIBRATION, u64::MAX);
    let report = calibrate_threshold(
        &sample,
        cfg.masker.anchor_ratio,
        cfg.target_ratio,
        cfg.tolerance,
        cfg.max_iters,
        &mut rng,
    )?;
    if let Some(path) = &args.calibration_out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    let fresh = reevaluate_threshold(&sample, cfg.masker.anchor_ratio, report.found_r, cfg.masker.seed)?;
    let summary = format!(
        "threshold r = {:.6}: mean ratio {:.6} (frozen anchors), {:.6} (fresh anchors) over {} images in {} steps\n",
        report.found_r, report.achieved_ratio, fresh, report.sample_size, report.iterations
    );
    if !report.converged {
        return Err(Error::Convergence(format!(
            "achieved ratio {:.6} is not within {} of {}",
            report.achieved_ratio, cfg.tolerance, cfg.target_ratio
        )));
    }
    Ok(summary)
}

/// Loads images with `<stem>.txt` captions; the vocabulary is every distinct
/// lower-cased whitespace token, in sorted order.
pub fn load_captioned(dir: &Path) -> Result<(Vec<Sample>, usize)> {
    let paths = list_images(dir)?;
    let mut captions = Vec::with_capacity(paths.len());
    for path in &paths {
        let caption_path = path.with_extension("txt");
        let text = fs::read_to_string(&caption_path)
            .map_err(|e| Error::Config(format!("caption {}: {e}", caption_path.display())))?;
        captions.push(text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>());
    }
    let vocab: Vec<&String> = captions.iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let samples = paths
        .iter()
        .zip(&captions)
        .map(|(path, words)| {
            Ok(Sample {
                image: load_image(path)?,
                tokens: words.iter().map(|w| vocab.binary_search(&w).unwrap_or(0)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, vocab.len().max(1)))
}

fn run_train(args: TrainArgs) -> Result<String> {
    let mut cfg = resolve(&args.common, "train")?;
    if let Some(v) = args.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = args.out {
        cfg.output = Some(v);
    }
    if let Some(v) = args.threshold {
        cfg.masker.threshold_r = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = Some(v);
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.dataset_size {
        cfg.dataset_size = v;
    }
    cfg.masker.validate()?;
    if cfg.train.epochs == 0 {
        return Err(Error::invalid("epochs", "must be positive"));
    }
    let (dataset, vocab, default_patch) = match &cfg.input {
        Some(_) => {
            let (samples, vocab) = load_captioned(cfg.input_dir()?)?;
            (samples, vocab, DEFAULT_PATCH_SIZE)
        }
        None => (
            synth::color_caption_dataset(cfg.dataset_size, cfg.masker.seed)?,
            synth::COLOR_CAPTION_VOCAB,
            synth::COLOR_CAPTION_PATCH,
        ),
    };
    let options = StepOptions {
        patch_size: cfg.patch_size.unwrap_or(default_patch),
        beta: cfg.beta.unwrap_or(0.5),
        seed: cfg.masker.seed,
    };
    let out = cfg.output_dir()?.to_path_buf();
    let (_, log) = train(&dataset, vocab, &cfg.masker, &cfg.train, &options)?;

    let mut csv = String::from("step,loss,alpha,mean_mask_ratio\n");
    for entry in &log {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            entry.step, entry.loss, entry.alpha, entry.mean_mask_ratio
        );
    }
    fs::write(out.join(TRAIN_LOG_FILE), csv)?;
    let (first, last) = (
        log.first().map_or(f64::NAN, |e| e.loss),
        log.last().map_or(f64::NAN, |e| e.loss),
    );
    Ok(format!("trained {} steps: loss {first:.6} -> {last:.6}\n", log.len()))
}

fn run_stats(args: StatsArgs) -> Result<String> {
    if !args.input.exists() {
        return Err(Error::Config(format!("input {} does not exist", args.input.display())));
    }
    let masks = io::read_masks(&args.input)?;
    let stats = stats_report(&masks, args.cols)?;
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&stats)? + "\n")?;
    }
    Ok(stats.to_text())
}

const COLOR_NAMES: [&str; synth::COLOR_CAPTION_VOCAB] =
    ["red", "green", "blue", "yellow", "magenta", "cyan", "orange", "purple"];

fn run_synth(args: SynthArgs) -> Result<String> {
    fs::create_dir_all(&args.out)?;
    let width = args.count.max(1).to_string().len();
    match args.kind {
        SynthKind::Noise => {
            for (i, image) in synth::smooth_noise_dataset(args.count, args.size, args.seed)?
                .iter()
                .enumerate()
            {
                save_image(&args.out.join(format!("img{i:0width$}.ppm")), image)?;
            }
        }
        SynthKind::Color => {
            for (i, sample) in synth::color_caption_dataset(args.count, args.seed)?.iter().enumerate() {
                let name = format!("img{i:0width$}");
                save_image(&args.out.join(format!("{name}.ppm")), &sample.image)?;
                let caption: Vec<&str> = sample.tokens.iter().map(|&t| COLOR_NAMES[t]).collect();
                fs::write(args.out.join(format!("{name}.txt")), caption.join(" ") + "\n")?;
            }
        }
    }
    Ok(format!("wrote {} images to {}\n", args.count, args.out.display()))
}

/// Runs one parsed command and returns its stdout text.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Mask(args) => run_mask(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::Train(args) => run_train(args),
        Command::Stats(args) => run_stats(args),
        Command::Synth(args) => run_synth(args),
    }
}
