use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use puiq::display::PeakSampling;
use puiq::encoding::normalize;
use puiq::eval::{evaluate, split_folds, EvalConfig, EvalReport, Split};
use puiq::experiment::{run_experiment, ExperimentConfig};
use puiq::io::manifest::read_manifest;
use puiq::io::{read_image, to_luminance, write_pfm, ColorspaceTag};
use puiq::metrics::{psnr, pu_metric, ssim, BaseMetric, MetricKind};
use puiq::nn::checkpoint;
use puiq::synth::{build_manifest, BuildOptions, DistortionType, MAX_LEVEL};
use puiq::train::data::Preprocess;
use puiq::train::{init_params, train, TrainConfig};
use puiq::{DisplayModel, Domain, Encoder, Scheme};

use crate::Command;

/// What a finished subcommand reports to the run log.
pub struct Done {
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HEIGHTxWIDTH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(h)?, parse(w)?))
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    /// Output directory; receives manifest.csv, ref/ and dist/
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of reference images
    #[arg(long, default_value_t = 24)]
    pub refs: usize,
    /// Comma-separated distortion types
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "gauss-noise,gauss-blur,quantize,contrast,brightness"
    )]
    pub dtypes: Vec<DistortionType>,
    /// Distortion levels per type (1 to 5)
    #[arg(long, default_value_t = MAX_LEVEL)]
    pub levels: u32,
    /// sdr writes 8-bit PNG; hdr writes PFM luminance on a sampled peak
    #[arg(long, default_value = "sdr")]
    pub domain: Domain,
    /// Image size as HEIGHTxWIDTH (each at least 64)
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),
    /// Mean of the sampled display peak in cd/m² [default: 100 for sdr, 5000 for hdr]
    #[arg(long)]
    pub lmax_mean: Option<f64>,
    /// Standard deviation of the sampled display peak [default: 10 for sdr, 500 for hdr]
    #[arg(long)]
    pub lmax_std: Option<f64>,
    /// Leave the label column empty
    #[arg(long, default_value_t = false)]
    pub unlabeled: bool,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Input image (.png display-encoded or .pfm luminance)
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Display preset (sdr, hdr) or JSON file, used for PNG input
    #[arg(long, default_value = "sdr")]
    pub display: String,
    /// Luminance encoding: pu21, pq or pq255
    #[arg(long, default_value = "pu21")]
    pub encoder: Encoder,
    /// Normalization: pmax, 255 or none
    #[arg(long, default_value = "none")]
    pub scheme: Scheme,
    /// Output PFM file
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Reference image
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,
    /// Distorted image
    #[arg(long, value_name = "FILE")]
    pub dist: PathBuf,
    /// Display preset (sdr, hdr) or JSON file, used for PNG input
    #[arg(long, default_value = "sdr")]
    pub display: String,
    /// pu-psnr, pu-ssim, psnr or ssim
    #[arg(long, default_value = "pu-psnr")]
    pub metric: MetricKind,
    /// Also append ref,dist,metric,score,peak to this CSV [default: none]
    #[arg(long, value_name = "CSV")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training configuration; omitted keys keep their defaults [default: all defaults]
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Labeled SDR source manifest
    #[arg(long, value_name = "CSV")]
    pub source: PathBuf,
    /// HDR target manifest, required when da_mode is not none [default: none]
    #[arg(long, value_name = "CSV")]
    pub target: Option<PathBuf>,
    /// Checkpoint file to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-epoch loss history CSV [default: next to the checkpoint with a .history.csv suffix]
    #[arg(long, value_name = "CSV")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    /// Labeled manifest to evaluate on
    #[arg(long, value_name = "CSV")]
    pub manifest: PathBuf,
    /// Display preset or JSON file for PNG records [default: each record's domain preset]
    #[arg(long)]
    pub display: Option<String>,
    /// Luminance encoding used in training
    #[arg(long, default_value = "pu21")]
    pub encoder: Encoder,
    /// Normalization used in training
    #[arg(long, default_value = "pmax")]
    pub scheme: Scheme,
    /// Patches per image
    #[arg(long, default_value_t = 1024)]
    pub patches: usize,
    /// Evaluate only the test references of this fold [default: every record]
    #[arg(long)]
    pub fold: Option<usize>,
    /// Number of folds when --fold is given
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Report CSV: subset,fold,n,srocc,plcc,fit_flag [default: stdout only]
    #[arg(long, value_name = "CSV")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Working directory for the generated datasets
    #[arg(long, value_name = "DIR", default_value = "puiq-experiment")]
    pub out: PathBuf,
    /// Also write the comparison table to this CSV [default: stdout only]
    #[arg(long, value_name = "CSV")]
    pub table: Option<PathBuf>,
    /// Training runs per arm
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// SDR source references
    #[arg(long, default_value_t = 24)]
    pub source_refs: usize,
    /// Simulated-HDR target references
    #[arg(long, default_value_t = 25)]
    pub target_refs: usize,
    /// Distortion levels per type
    #[arg(long, default_value_t = MAX_LEVEL)]
    pub levels: u32,
    /// Image size as HEIGHTxWIDTH
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),
    /// Training epochs
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    /// Images per batch and domain
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    /// Training patches per image
    #[arg(long, default_value_t = 16)]
    pub patches: usize,
    /// Evaluation patches per image
    #[arg(long, default_value_t = 256)]
    pub eval_patches: usize,
    /// CORAL weight of the λ>0 arm
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    /// Initial learning rate
    #[arg(long, default_value_t = 3e-3)]
    pub lr_initial: f64,
    /// Final learning rate
    #[arg(long, default_value_t = 1e-4)]
    pub lr_final: f64,
}

pub fn run(command: &Command, seed: u64, explicit_seed: bool) -> Result<Done> {
    match command {
        Command::MakeDataset(a) => make_dataset(a, seed),
        Command::Encode(a) => encode(a, seed),
        Command::Score(a) => score(a, seed),
        Command::Train(a) => train_cmd(a, seed, explicit_seed),
        Command::Eval(a) => eval_cmd(a, seed),
        Command::Experiment(a) => experiment(a, seed),
    }
}

fn make_dataset(a: &MakeDatasetArgs, seed: u64) -> Result<Done> {
    let mut opts = BuildOptions::new(a.refs, a.domain, seed);
    opts.dtypes = a.dtypes.clone();
    opts.levels = a.levels;
    opts.size = a.size;
    let preset = PeakSampling::for_domain(a.domain);
    opts.peaks = PeakSampling {
        mean: a.lmax_mean.unwrap_or(preset.mean),
        std_dev: a.lmax_std.unwrap_or(preset.std_dev),
    };
    opts.labeled = !a.unlabeled;
    let generated = build_manifest(&opts, &a.out)?;
    println!(
        "{} records written to {}",
        generated.manifest.len(),
        generated.manifest_path.display()
    );
    Ok(Done {
        seed,
        artifacts: vec![generated.manifest_path],
    })
}

fn encode(a: &EncodeArgs, seed: u64) -> Result<Done> {
    let display = DisplayModel::load(&a.display)?;
    let image = read_image(&a.input)?;
    let luminance = to_luminance(&image, &display)?;
    let encoded = normalize(&a.encoder.encode(&luminance), a.scheme)?;
    if encoded.clamped > 0 {
        log::warn!("{} pixels outside the encoder's input range were clamped", encoded.clamped);
    }
    write_pfm(&a.out, &encoded.values)?;
    Ok(Done {
        seed,
        artifacts: vec![a.out.clone()],
    })
}

fn score(a: &ScoreArgs, seed: u64) -> Result<Done> {
    let display = DisplayModel::load(&a.display)?;
    let r = read_image(&a.reference)?;
    let d = read_image(&a.dist)?;
    if r.colorspace != d.colorspace {
        bail!("reference and distorted images must both be PNG or both be PFM");
    }
    let result = match a.metric {
        MetricKind::PuPsnr | MetricKind::PuSsim => {
            let base = if a.metric == MetricKind::PuPsnr {
                BaseMetric::Psnr
            } else {
                BaseMetric::Ssim
            };
            pu_metric(&to_luminance(&r, &display)?, &to_luminance(&d, &display)?, base)?
        }
        MetricKind::Psnr | MetricKind::Ssim => {
            // PNG: 8-bit code values against 255; PFM: luminance against the display peak.
            let (rv, dv, peak) = match r.colorspace {
                ColorspaceTag::DisplayEncodedSdr => (r.pixels.map(|v| v * 255.0), d.pixels.map(|v| v * 255.0), 255.0),
                ColorspaceTag::LinearLuminance => (r.pixels.clone(), d.pixels.clone(), display.l_max),
            };
            if a.metric == MetricKind::Psnr {
                psnr(&rv, &dv, peak)?
            } else {
                ssim(&rv, &dv, peak)?
            }
        }
    };
    println!("{} {}", result.metric, result.score);
    let mut artifacts = Vec::new();
    if let Some(path) = &a.csv {
        append_score(path, a, result.score, result.peak)?;
        artifacts.push(path.clone());
    }
    Ok(Done { seed, artifacts })
}

fn append_score(path: &Path, a: &ScoreArgs, score: f64, peak: f64) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("{}: cannot open", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(["ref", "dist", "metric", "score", "peak"])?;
    }
    w.write_record([
        a.reference.display().to_string(),
        a.dist.display().to_string(),
        a.metric.to_string(),
        score.to_string(),
        peak.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn train_cmd(a: &TrainArgs, seed: u64, explicit_seed: bool) -> Result<Done> {
    let mut config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
            TrainConfig::from_json(&text).with_context(|| format!("{}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    if explicit_seed || a.config.is_none() {
        config.seed = seed;
    }
    config.validate()?;
    let source = read_manifest(&a.source)?;
    let target = a.target.as_deref().map(read_manifest).transpose()?;
    let outcome = train(&config, &source, target.as_ref(), init_params(&config)?)?;
    checkpoint::save(&a.out, &outcome.params)?;
    let history = a.history.clone().unwrap_or_else(|| {
        let mut name = a.out.file_name().unwrap_or_default().to_os_string();
        name.push(".history.csv");
        a.out.with_file_name(name)
    });
    outcome.history.save(&history)?;
    if let Some(last) = outcome.history.last() {
        println!(
            "epoch {} total {:.6} cov_distance {:.6}",
            last.epoch, last.total, last.cov_distance
        );
    }
    Ok(Done {
        seed: config.seed,
        artifacts: vec![a.out.clone(), history],
    })
}

fn eval_cmd(a: &EvalArgs, seed: u64) -> Result<Done> {
    let params = checkpoint::load(&a.checkpoint)?;
    let mut manifest = read_manifest(&a.manifest)?;
    if let Some(fold) = a.fold {
        if fold >= a.folds {
            bail!("--fold {fold} is out of range for --folds {}", a.folds);
        }
        let splits = split_folds(&manifest, a.folds, (0.6, 0.2, 0.2), seed, None)?;
        manifest = splits[fold].subset(&manifest, Split::Test);
    }
    let display = a.display.as_deref().map(DisplayModel::load).transpose()?;
    let config = EvalConfig {
        patches_per_image: a.patches,
        preprocess: Preprocess {
            encoder: a.encoder,
            scheme: a.scheme,
            display,
        },
        seed,
    };
    let mut reports = evaluate(&params, &manifest, &config)?;
    for r in &mut reports {
        r.fold_id = a.fold;
    }
    let table = report_csv(&reports)?;
    print!("{table}");
    let mut artifacts = Vec::new();
    if let Some(path) = &a.report {
        std::fs::write(path, &table).with_context(|| format!("{}", path.display()))?;
        artifacts.push(path.clone());
    }
    Ok(Done { seed, artifacts })
}

fn report_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EvalReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn experiment(a: &ExperimentArgs, seed: u64) -> Result<Done> {
    let mut config = ExperimentConfig {
        seed,
        runs: a.runs,
        source_refs: a.source_refs,
        target_refs: a.target_refs,
        size: a.size,
        levels: a.levels,
        eval_patches: a.eval_patches,
        ..ExperimentConfig::default()
    };
    config.train.epochs = a.epochs;
    config.train.batch_images = a.batch;
    config.train.patches_per_image = a.patches;
    config.train.lambda = a.lambda;
    config.train.lr_initial = a.lr_initial;
    config.train.lr_final = a.lr_final;
    let report = run_experiment(&config, &a.out)?;
    let table = report.to_table();
    print!("{table}");
    let mut artifacts = vec![a.out.clone()];
    if let Some(path) = &a.table {
        std::fs::write(path, &table).with_context(|| format!("{}", path.display()))?;
        artifacts.push(path.clone());
    }
    Ok(Done { seed, artifacts })
}
