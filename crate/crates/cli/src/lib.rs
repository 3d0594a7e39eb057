//! `pam` subcommands: synth, run, bench, ablate.

pub mod bench;
pub mod clipdir;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pam_core::encoder::{EncoderWeights, DEFAULT_KEY_GAIN};
use pam_core::evalkit::{generate_clip, ClipSpec, SynthClip, DEFAULT_CLIP_LEN};
use pam_core::pam::TriggerThresholds;
use pam_core::pipeline::{ablate, AblationPoint, RunReport, SequenceConfig, SequenceRunner};
use pam_core::StrategyRegistry;

use crate::clipdir::{load_clip, ClipManifest, LoadedClip};

pub const BENCH_HEADER: [&str; 5] = ["memory_size", "match_ms", "encode_ms", "decode_ms", "fps"];
pub const ABLATE_HEADER: [&str; 7] = [
    "config",
    "mean_J",
    "mean_F",
    "JF",
    "fps",
    "final_memory",
    "triggers",
];

#[derive(Debug, Parser)]
#[command(
    name = "pam",
    version,
    about = "Pixel-adaptive memory video object segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic clip as numbered PPM/PGM files.
    Synth(SynthArgs),
    /// Segment a clip from its first-frame mask.
    Run(RunArgs),
    /// Time match/encode/decode against injected memories of given sizes.
    Bench(BenchArgs),
    /// Sweep trigger strategies × update ratios on a clip.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_CLIP_LEN)]
    pub frames: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    /// JSON sprite/motion spec; the default is a red 64 px square moving
    /// 4 px right per frame.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

/// Sequence settings shared by run, bench and ablate.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Update ratio: fraction of query pixels appended per trigger.
    #[arg(long, default_value_t = 0.10)]
    pub beta: f64,
    /// var | every | periodic=N | never
    #[arg(long, default_value = "var")]
    pub trigger: String,
    #[arg(long, default_value_t = 1.0)]
    pub thf: f32,
    #[arg(long, default_value_t = 0.0)]
    pub thm: f32,
    #[arg(long, default_value_t = 200)]
    pub pth: usize,
    /// seeded | handcrafted
    #[arg(long, default_value = "handcrafted")]
    pub mode: String,
    /// refine | propagate
    #[arg(long, default_value = "propagate")]
    pub decode: String,
    #[arg(long, default_value_t = DEFAULT_KEY_GAIN)]
    pub key_gain: f32,
    #[arg(long)]
    pub memory_cap: Option<usize>,
    /// Load encoder weights from a snapshot instead of generating them.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn to_config(&self) -> Result<SequenceConfig> {
        let weights = match &self.weights {
            Some(p) => {
                let f =
                    File::open(p).with_context(|| format!("opening weights {}", p.display()))?;
                let w = EncoderWeights::load(std::io::BufReader::new(f))
                    .with_context(|| format!("reading weights {}", p.display()))?;
                Some(Arc::new(w))
            }
            None => None,
        };
        let cfg = SequenceConfig {
            beta: self.beta,
            thresholds: TriggerThresholds {
                image: self.thf,
                mask: self.thm,
                count: self.pth,
            },
            trigger: self.trigger.clone(),
            encoder: self.mode.clone(),
            decoder: self.decode.clone(),
            seed: self.seed,
            key_gain: self.key_gain,
            memory_cap: self.memory_cap,
            weights,
            ..SequenceConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub clip_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write the encoder weights used to this file.
    #[arg(long)]
    pub dump_weights: Option<PathBuf>,
    /// Write the final memory to this file.
    #[arg(long)]
    pub dump_memory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub clip_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Injected memory sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "10000,20000")]
    pub sizes: Vec<usize>,
    /// Passes over the clip per size; medians are reported.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    pub clip_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "var,periodic=5")]
    pub triggers: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1.0,0.10")]
    pub betas: Vec<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Run(a) => cmd_run(&a).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    }
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_file(path)?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading spec {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing spec {}", p.display()))?
        }
        None => ClipSpec::default(),
    };
    // generate fully before touching the output directory
    let clip = generate_clip(a.seed, a.frames, a.height, a.width, &spec)?;
    create_dir(&a.out)?;
    clipdir::write_clip(&a.out, &clip)?;
    log::info!("wrote {} frames to {}", clip.len(), a.out.display());
    Ok(())
}

pub fn cmd_run(a: &RunArgs) -> Result<RunReport> {
    let cfg = a.config.to_config()?;
    let clip = load_clip(&a.clip_dir)?;
    let registry = StrategyRegistry::builtin();
    let mut runner = SequenceRunner::start(&registry, cfg, &clip.frames[0], &clip.first_mask)?;
    for frame in &clip.frames[1..] {
        runner.step(frame)?;
    }
    let weights = runner.encoder().weights().clone();
    let (mut report, memory) = runner.finish_with_memory();
    if let Some(gts) = &clip.gt_masks {
        report.attach_metrics(gts)?;
    }

    create_dir(&a.out)?;
    for (t, f) in report.frames.iter().enumerate() {
        let mut w = create_file(&a.out.join(format!("pred_{t:04}.pgm")))?;
        f.mask.write_pgm(&mut w)?;
        w.flush()?;
    }
    write_json(&a.out.join("report.json"), &report)?;
    let mut csv = csv_writer(&a.out.join("summary.csv"))?;
    csv.serialize(report.summary())?;
    csv.flush()?;
    if let Some(p) = &a.dump_weights {
        let mut w = create_file(p)?;
        weights.save(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.dump_memory {
        let mut w = create_file(p)?;
        memory.write_snapshot(&mut w)?;
        w.flush()?;
    }
    log::info!(
        "{} frames, {} triggers, memory {}, {:.1} fps",
        report.frames.len(),
        report.triggers,
        report.final_memory,
        report.fps
    );
    Ok(report)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    if a.sizes.is_empty() {
        bail!("--sizes needs at least one memory size");
    }
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let cfg = a.config.to_config()?;
    let clip = load_clip(&a.clip_dir)?;
    let rows = bench::bench_clip(&clip.frames, &cfg, &a.sizes, a.reps)?;
    create_dir(&a.out)?;
    let mut csv = csv_writer(&a.out.join("bench.csv"))?;
    csv.write_record(BENCH_HEADER)?;
    for r in &rows {
        csv.write_record([
            r.memory_size.to_string(),
            format!("{:.6}", r.match_ms),
            format!("{:.6}", r.encode_ms),
            format!("{:.6}", r.decode_ms),
            format!("{:.6}", r.fps),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

fn as_synth(clip: LoadedClip, dir: &Path) -> Result<SynthClip> {
    let gt_masks = clip.gt_masks.with_context(|| {
        format!(
            "ablation needs a mask file for every frame in {}",
            dir.display()
        )
    })?;
    let manifest = clip.manifest.unwrap_or_else(|| ClipManifest {
        seed: 0,
        frames: clip.frames.len(),
        height: clip.frames[0].height(),
        width: clip.frames[0].width(),
        spec: ClipSpec::default(),
    });
    Ok(SynthClip {
        seed: manifest.seed,
        spec: manifest.spec,
        frames: clip.frames,
        gt_masks,
    })
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    if a.triggers.is_empty() || a.betas.is_empty() {
        bail!("ablation grid is empty");
    }
    let base = a.config.to_config()?;
    let clip = as_synth(load_clip(&a.clip_dir)?, &a.clip_dir)?;
    let grid: Vec<AblationPoint> = a
        .triggers
        .iter()
        .flat_map(|t| a.betas.iter().map(move |&b| AblationPoint::new(t, b)))
        .collect();
    let rows = ablate(&StrategyRegistry::builtin(), &[clip], &base, &grid)?;
    create_dir(&a.out)?;
    let mut csv = csv_writer(&a.out.join("ablate.csv"))?;
    csv.write_record(ABLATE_HEADER)?;
    for row in &rows {
        let mut rec = vec![row.config.clone()];
        match (&row.stats, &row.error) {
            (Some(s), _) => rec.extend([
                format!("{:.6}", s.mean_j),
                format!("{:.6}", s.mean_f),
                format!("{:.6}", s.jf),
                format!("{:.3}", s.fps),
                s.final_memory.to_string(),
                s.triggers.to_string(),
            ]),
            (None, err) => {
                eprintln!(
                    "warning: {}: {}",
                    row.config,
                    err.as_deref().unwrap_or("failed")
                );
                rec.extend(std::iter::repeat_n(String::new(), 6));
            }
        }
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}
