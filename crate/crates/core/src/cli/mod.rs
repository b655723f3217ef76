//! Command-line front end. Every subcommand reads and writes files under
//! `--out` by default, so a full chain runs with one output directory:
//!
//! ```text
//! masktrack --out run synth gen --preset late10
//! masktrack --out run synth degrade --preset late10
//! masktrack --out run track run --direction both --selector heuristic
//! masktrack --out run merge
//! masktrack --out run eval
//! ```

pub mod bench;
mod font;
pub mod render;

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, GtFile, GtTrack, ResultEntry};
use crate::json::{read_json, write_json};
use crate::mask::{Image, RleMask};
use crate::msn::{
    evaluate_pairs, heuristic_accuracy, load_model, save_model, split_dataset, train, EpochStats,
    MsnArch, MsnModel, PairMetrics, PairSample, PerturbConfig, Side, TrainConfig,
};
use crate::pipeline::{
    run as run_tracker, AlwaysPropagation, AlwaysSegmentation, Direction, HeuristicSelector,
    MsnSelector, OracleSelector, PipelineConfig, PropagationNoise, Propagator, ProposalFile,
    Selector, SelectorKind, ShiftPropagator, TrackFile, VideoProposals, VideoTracks,
    DEFAULT_SEARCH_RADIUS,
};
use crate::postproc::{
    associate_passes, human_object_link, merge_tracks, resolve, Arbiter, MergeReport,
    DEFAULT_MERGE_IOU,
};
use crate::synth::dataset::{frame_path, load_dataset, save_dataset, save_png};
use crate::synth::{
    benchmark_scenes, degrade, generate, late10, selection_pairs, selection_sources, splitmix,
    BenchmarkConfig, NoiseConfig, SceneConfig, SyntheticVideo,
};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Scene sets `synth gen` can produce.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Random scenes from `[synth.benchmark]`.
    #[default]
    Benchmark,
    /// One object whose detections are missing on frames 0..10.
    Late10,
    /// Scenes listed under `[[synth.scenes]]`.
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub preset: Preset,
    pub benchmark: BenchmarkConfig,
    pub scenes: Vec<SceneConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    /// Translation search by normalized correlation.
    #[default]
    Shift,
    /// True motion from `motion.json`, corrupted by boundary noise.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub kind: PropagatorKind,
    pub radius: usize,
    /// Noise level of the oracle propagator.
    pub noise: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            kind: PropagatorKind::Shift,
            radius: DEFAULT_SEARCH_RADIUS,
            noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub merge_iou: f64,
    pub link_riders: bool,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            merge_iou: DEFAULT_MERGE_IOU,
            link_riders: true,
        }
    }
}

/// Everything a run can be configured with. Precedence: built-in defaults,
/// then the `--config` file, then command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    /// Detector noise; when absent, the preset's own noise.
    pub noise: Option<NoiseConfig>,
    pub perturb: PerturbConfig,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
    pub propagation: PropagationConfig,
    pub merge: MergeConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.train.validate()?;
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if !(0.0..=1.0).contains(&self.propagation.noise) {
            return Err(Error::Config("propagation.noise must be in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.merge.merge_iou) {
            return Err(Error::Config("merge.merge_iou must be in [0, 1)".into()));
        }
        for scene in &self.synth.scenes {
            scene.validate()?;
        }
        Ok(())
    }

    /// Noise used by `synth degrade`.
    pub fn resolved_noise(&self) -> NoiseConfig {
        self.noise.clone().unwrap_or_else(|| match self.synth.preset {
            Preset::Benchmark => NoiseConfig::benchmark(),
            Preset::Late10 => late10().1,
            Preset::Custom => NoiseConfig::default(),
        })
    }
}

/// Named sub-seed of the global seed.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    splitmix(seed ^ h)
}

#[derive(Debug, Parser)]
#[command(name = "masktrack", version, about = "Video instance tracking with mask selection")]
pub struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed [default: 0, or `seed` from the config]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; parallelism is across videos only
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory, also the default location of every input
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic videos and detector-like proposals
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Mask selection network
    #[command(subcommand)]
    Msn(MsnCommand),
    /// Online tracking
    #[command(subcommand)]
    Track(TrackCommand),
    /// Merge forward and backward passes
    Merge(MergeArgs),
    /// Evaluate a result file against ground truth
    Eval(EvalArgs),
    /// Draw result overlays onto frames
    Render(RenderArgs),
    /// Timing benchmarks
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Render videos with ground truth into OUT
    Gen(GenArgs),
    /// Turn ground truth into a proposal stream (OUT/proposals.json)
    Degrade(DegradeArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scene set [default: benchmark]
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Number of benchmark videos [default: 6]
    #[arg(long)]
    pub videos: Option<usize>,
    /// Frames per benchmark video [default: 20]
    #[arg(long)]
    pub frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    /// Dataset directory [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Preset whose noise applies when the config has no [noise] [default: benchmark]
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Detection miss probability [default: preset noise]
    #[arg(long)]
    pub p_miss: Option<f64>,
    /// Mean spurious blobs per frame [default: preset noise]
    #[arg(long)]
    pub p_spurious: Option<f64>,
    /// Class flip probability [default: preset noise]
    #[arg(long)]
    pub p_classflip: Option<f64>,
    /// Boundary perturbation level in [0, 1] [default: preset noise]
    #[arg(long)]
    pub boundary_level: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum MsnCommand {
    /// Build selection pairs from a dataset (OUT/pairs.json)
    PrepareData(PrepareArgs),
    /// Train a selector (OUT/model.json, OUT/train_history.json)
    Train(TrainArgs),
    /// Pair accuracy of a model against the gradient heuristic
    Eval(MsnEvalArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Dataset directory [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Candidate pairs per ground-truth mask [default: 4]
    #[arg(long)]
    pub pairs_per_mask: Option<usize>,
    /// Minimum IoU gap of a labelled pair [default: 0.02]
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArchName {
    Full,
    Desk,
    Reduced,
}

impl ArchName {
    pub fn arch(self) -> MsnArch {
        match self {
            ArchName::Full => MsnArch::full(),
            ArchName::Desk => MsnArch::desk(),
            ArchName::Reduced => MsnArch::reduced(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory holding the frames [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pair file [default: OUT/pairs.json]
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Network architecture [default: desk]
    #[arg(long)]
    pub arch: Option<ArchName>,
    /// Epochs [default: 40]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size [default: 512]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Base learning rate [default: 0.01]
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// Held-out split of `msn train` with the same seed and config
    Val,
    All,
}

#[derive(Debug, Args)]
pub struct MsnEvalArgs {
    /// Dataset directory holding the frames [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pair file [default: OUT/pairs.json]
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Model file [default: OUT/model.json]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Which pairs to score
    #[arg(long, value_enum, default_value_t = Split::Val)]
    pub split: Split,
}

#[derive(Debug, Subcommand)]
pub enum TrackCommand {
    /// Run the tracker (OUT/tracks_{fwd,bwd}.json, OUT/results_{fwd,bwd}.json)
    Run(TrackArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Fwd,
    Bwd,
    Both,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Dataset directory [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Proposal file [default: OUT/proposals.json]
    #[arg(long)]
    pub proposals: Option<PathBuf>,
    /// Pass direction
    #[arg(long, value_enum, default_value_t = DirectionArg::Fwd)]
    pub direction: DirectionArg,
    /// Mask selector [default: msn]
    #[arg(long)]
    pub selector: Option<SelectorKind>,
    /// Model file for the msn selector [default: OUT/model.json]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Association IoU floor [default: 0.1]
    #[arg(long)]
    pub iou_floor: Option<f64>,
    /// Maximum live tracks per video [default: 15]
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Minimum proposal score [default: 0.5]
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Frames of empty masks before a track ends [default: never]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Mask propagator [default: shift]
    #[arg(long)]
    pub propagator: Option<PropagatorKind>,
    /// Oracle propagator noise level [default: 0]
    #[arg(long)]
    pub propagation_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Dataset directory for selector arbitration [default: OUT, if present]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Forward track file [default: OUT/tracks_fwd.json]
    #[arg(long)]
    pub fwd: Option<PathBuf>,
    /// Backward track file [default: OUT/tracks_bwd.json]
    #[arg(long)]
    pub bwd: Option<PathBuf>,
    /// IoU above which a frame votes for merging [default: 0.5]
    #[arg(long)]
    pub merge_iou: Option<f64>,
    /// Selector for frames both passes cover [default: msn]
    #[arg(long)]
    pub selector: Option<SelectorKind>,
    /// Model file for the msn selector [default: OUT/model.json]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Skip rider/person fragment linking
    #[arg(long)]
    pub no_link: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth [default: OUT/gt.json]
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Result file [default: OUT/results_merged.json]
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Dataset directory [default: OUT]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Result file [default: OUT/results_merged.json]
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Only this video [default: all]
    #[arg(long)]
    pub video: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Square random assignment
    Hungarian {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// RLE encode, decode and IoU
    Rle {
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Selector forward and backward passes
    Msn {
        #[arg(long, value_enum, default_value_t = ArchName::Desk)]
        arch: ArchName,
        #[arg(long, default_value_t = 8)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status; failures print a one-line JSON error to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "message": e.to_string() })
            );
            match e {
                Error::Config(_) | Error::Arch(_) => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let ctx = Context { out: cli.out };
    pool.install(|| match cli.command {
        Command::Synth(SynthCommand::Gen(a)) => synth_gen(&ctx, config, a),
        Command::Synth(SynthCommand::Degrade(a)) => synth_degrade(&ctx, config, a),
        Command::Msn(MsnCommand::PrepareData(a)) => msn_prepare(&ctx, config, a),
        Command::Msn(MsnCommand::Train(a)) => msn_train(&ctx, config, a),
        Command::Msn(MsnCommand::Eval(a)) => msn_eval(&ctx, config, a),
        Command::Track(TrackCommand::Run(a)) => track_run(&ctx, config, a),
        Command::Merge(a) => merge(&ctx, config, a),
        Command::Eval(a) => eval(&ctx, config, a),
        Command::Render(a) => render(&ctx, config, a),
        Command::Bench(b) => bench(config, b),
    })
}

struct Context {
    out: PathBuf,
}

impl Context {
    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(default))
    }

    fn data(&self, given: &Option<PathBuf>) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.clone())
    }

    /// Validates and writes the resolved configuration of `command`.
    fn snapshot(&self, command: &str, config: &RunConfig) -> Result<()> {
        config.validate()?;
        let path = self.out.join(format!("config.{command}.toml"));
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        std::fs::write(&path, config.to_toml()?).map_err(|e| Error::io(&path, e))
    }
}

fn synth_gen(ctx: &Context, mut config: RunConfig, args: GenArgs) -> Result<()> {
    if let Some(p) = args.preset {
        config.synth.preset = p;
    }
    if let Some(v) = args.videos {
        config.synth.benchmark.videos = v;
    }
    if let Some(f) = args.frames {
        config.synth.benchmark.frames = f;
    }
    ctx.snapshot("synth-gen", &config)?;
    let scenes = match config.synth.preset {
        Preset::Benchmark => {
            benchmark_scenes(&config.synth.benchmark, derive_seed(config.seed, "synth"))
        }
        Preset::Late10 => vec![late10().0],
        Preset::Custom if config.synth.scenes.is_empty() => {
            return Err(Error::Config("preset custom needs [[synth.scenes]]".into()))
        }
        Preset::Custom => config.synth.scenes.clone(),
    };
    let videos = scenes
        .par_iter()
        .map(generate)
        .collect::<Result<Vec<_>>>()?;
    save_dataset(&ctx.out, &scenes, &videos)?;
    let tracks: usize = videos.iter().map(|v| v.gt.len()).sum();
    println!("generated {} videos with {tracks} tracks", videos.len());
    Ok(())
}

fn tracks_of(gt: &GtFile, video_id: u64) -> Vec<GtTrack> {
    gt.annotations
        .iter()
        .filter(|a| a.video_id == video_id)
        .cloned()
        .collect()
}

fn synth_degrade(ctx: &Context, mut config: RunConfig, args: DegradeArgs) -> Result<()> {
    if let Some(p) = args.preset {
        config.synth.preset = p;
    }
    let mut noise = config.resolved_noise();
    if let Some(v) = args.p_miss {
        noise.p_miss = v;
    }
    if let Some(v) = args.p_spurious {
        noise.p_spurious = v;
    }
    if let Some(v) = args.p_classflip {
        noise.p_classflip = v;
    }
    if let Some(v) = args.boundary_level {
        noise.boundary_level = v;
    }
    config.noise = Some(noise.clone());
    ctx.snapshot("synth-degrade", &config)?;
    let gt: GtFile = read_json(&ctx.data(&args.data).join("gt.json"))?;
    let seed = derive_seed(config.seed, "degrade");
    let videos = gt
        .videos
        .par_iter()
        .map(|info| degrade(info, &tracks_of(&gt, info.id), &noise, seed ^ splitmix(info.id)))
        .collect::<Result<Vec<_>>>()?;
    let count: usize = videos.iter().map(|v| v.proposals.len()).sum();
    write_json(&ctx.out.join("proposals.json"), &ProposalFile { videos })?;
    println!("wrote {count} proposals");
    Ok(())
}

/// Serialized selection pair; images are referenced by video and frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub video_id: u64,
    pub frame: usize,
    pub mask_a: RleMask,
    pub mask_b: RleMask,
    pub gt: RleMask,
    pub label: Side,
    pub iou_a: f64,
    pub iou_b: f64,
    pub source: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub samples: Vec<PairRecord>,
    pub discarded: usize,
}

fn msn_prepare(ctx: &Context, mut config: RunConfig, args: PrepareArgs) -> Result<()> {
    if let Some(n) = args.pairs_per_mask {
        config.perturb.pairs_per_mask = n;
    }
    if let Some(m) = args.margin {
        config.perturb.margin = m;
    }
    ctx.snapshot("msn-prepare-data", &config)?;
    let (_, videos) = load_dataset(&ctx.data(&args.data))?;
    let set = selection_pairs(&videos, &config.perturb, derive_seed(config.seed, "pairs"))?;
    let sources = selection_sources(&videos);
    let samples = set
        .samples
        .iter()
        .map(|s| {
            let (video_id, _, frame) = sources[s.source];
            PairRecord {
                video_id,
                frame,
                mask_a: s.mask_a.to_rle(),
                mask_b: s.mask_b.to_rle(),
                gt: s.gt_mask.to_rle(),
                label: s.label,
                iou_a: s.iou_a,
                iou_b: s.iou_b,
                source: s.source,
            }
        })
        .collect();
    let file = PairFile {
        samples,
        discarded: set.discarded,
    };
    write_json(&ctx.out.join("pairs.json"), &file)?;
    println!(
        "wrote {} pairs ({} discarded)",
        file.samples.len(),
        file.discarded
    );
    Ok(())
}

fn load_pairs(pairs: &Path, data: &Path) -> Result<Vec<PairSample>> {
    let file: PairFile = read_json(pairs)?;
    let (_, videos) = load_dataset(data)?;
    let frames: HashMap<(u64, usize), Arc<Image>> = videos
        .into_iter()
        .flat_map(|v| {
            let id = v.video_id;
            v.frames
                .into_iter()
                .enumerate()
                .map(move |(t, f)| ((id, t), Arc::new(f)))
        })
        .collect();
    let mut gts: HashMap<usize, Arc<crate::mask::DenseMask>> = HashMap::new();
    file.samples
        .into_iter()
        .map(|r| {
            let image = frames
                .get(&(r.video_id, r.frame))
                .ok_or(Error::MissingFrame(r.frame))?;
            let gt_mask = gts
                .entry(r.source)
                .or_insert_with(|| Arc::new(r.gt.to_dense()))
                .clone();
            Ok(PairSample {
                image: Arc::clone(image),
                mask_a: r.mask_a.to_dense(),
                mask_b: r.mask_b.to_dense(),
                gt_mask,
                label: r.label,
                iou_a: r.iou_a,
                iou_b: r.iou_b,
                source: r.source,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub train_pairs: usize,
    pub validation_pairs: usize,
    pub heuristic_val_accuracy: f64,
    pub history: Vec<EpochStats>,
}

fn msn_train(ctx: &Context, mut config: RunConfig, args: TrainArgs) -> Result<()> {
    if let Some(a) = args.arch {
        config.train.arch = a.arch();
    }
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        config.train.batch_size = b;
    }
    if let Some(lr) = args.learning_rate {
        config.train.learning_rate = lr;
    }
    config.train.seed = derive_seed(config.seed, "train") >> 1;
    ctx.snapshot("msn-train", &config)?;
    let samples = load_pairs(&ctx.path(&args.pairs, "pairs.json"), &ctx.data(&args.data))?;
    let outcome = train(&samples, &config.train)?;
    let val: Vec<&PairSample> = outcome
        .validation_indices
        .iter()
        .map(|&i| &samples[i])
        .collect();
    let report = TrainReport {
        train_pairs: outcome.train_indices.len(),
        validation_pairs: val.len(),
        heuristic_val_accuracy: heuristic_accuracy(&val)?,
        history: outcome.history,
    };
    save_model(&outcome.model, &ctx.out.join("model.json"))?;
    write_json(&ctx.out.join("train_history.json"), &report)?;
    if let Some(last) = report.history.last() {
        println!(
            "epoch {}: val accuracy {:.4} (heuristic {:.4})",
            last.epoch, last.val_accuracy, report.heuristic_val_accuracy
        );
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MsnEvalReport {
    pub split: Split,
    pub msn: PairMetrics,
    pub heuristic_accuracy: f64,
}

fn msn_eval(ctx: &Context, mut config: RunConfig, args: MsnEvalArgs) -> Result<()> {
    config.train.seed = derive_seed(config.seed, "train") >> 1;
    ctx.snapshot("msn-eval", &config)?;
    let model = load_model(&ctx.path(&args.model, "model.json"))?;
    let samples = load_pairs(&ctx.path(&args.pairs, "pairs.json"), &ctx.data(&args.data))?;
    let chosen: Vec<&PairSample> = match args.split {
        Split::All => samples.iter().collect(),
        Split::Val => {
            split_dataset(&samples, config.train.validation_fraction, config.train.seed)
                .1
                .into_iter()
                .map(|i| &samples[i])
                .collect()
        }
    };
    let report = MsnEvalReport {
        split: args.split,
        msn: evaluate_pairs(&model, &chosen)?,
        heuristic_accuracy: heuristic_accuracy(&chosen)?,
    };
    write_json(&ctx.out.join("msn_eval.json"), &report)?;
    println!(
        "{} pairs: msn accuracy {:.4}, heuristic {:.4}",
        report.msn.count, report.msn.accuracy, report.heuristic_accuracy
    );
    Ok(())
}

fn load_selector_model(kind: SelectorKind, path: &Path) -> Result<Option<MsnModel>> {
    if kind != SelectorKind::Msn {
        return Ok(None);
    }
    if !path.exists() {
        return Err(Error::Config(format!(
            "selector msn needs a model; {} does not exist",
            path.display()
        )));
    }
    load_model(path).map(Some)
}

fn make_selector<'a>(
    kind: SelectorKind,
    model: Option<&'a MsnModel>,
    video: &SyntheticVideo,
) -> Box<dyn Selector + 'a> {
    match (kind, model) {
        (SelectorKind::Msn, Some(model)) => Box::new(MsnSelector { model }),
        (SelectorKind::Msn, None) => unreachable!("model is loaded for the msn selector"),
        (SelectorKind::Heuristic, _) => Box::new(HeuristicSelector),
        (SelectorKind::Oracle, _) => Box::new(OracleSelector::new(&video.gt, video.len())),
        (SelectorKind::AlwaysSeg, _) => Box::new(AlwaysSegmentation),
        (SelectorKind::AlwaysProp, _) => Box::new(AlwaysPropagation),
    }
}

/// Runs one pass over one video with the configured propagator and selector.
pub fn track_video(
    video: &SyntheticVideo,
    proposals: &VideoProposals,
    direction: Direction,
    config: &RunConfig,
    model: Option<&MsnModel>,
) -> Result<VideoTracks> {
    if (proposals.height, proposals.width) != (video.height(), video.width()) {
        return Err(Error::Dimension {
            left: (video.height(), video.width()),
            right: (proposals.height, proposals.width),
        });
    }
    let salt = match direction {
        Direction::Forward => 0,
        Direction::Backward => 1,
    };
    let mut propagator: Box<dyn Propagator> = match config.propagation.kind {
        PropagatorKind::Shift => Box::new(ShiftPropagator {
            radius: config.propagation.radius,
        }),
        PropagatorKind::Oracle => Box::new(video.oracle_propagator(
            PropagationNoise {
                level: config.propagation.noise,
            },
            derive_seed(config.seed, "propagate") ^ splitmix(video.video_id * 2 + salt),
        )),
    };
    let mut selector = make_selector(config.pipeline.selector, model, video);
    let tracks = run_tracker(
        &video.frames,
        &proposals.proposals,
        direction,
        &config.pipeline,
        propagator.as_mut(),
        selector.as_mut(),
    )?;
    Ok(VideoTracks {
        video_id: video.video_id,
        length: video.len(),
        tracks,
    })
}

fn track_run(ctx: &Context, mut config: RunConfig, args: TrackArgs) -> Result<()> {
    let p = &mut config.pipeline;
    if let Some(s) = args.selector {
        p.selector = s;
    }
    if let Some(v) = args.iou_floor {
        p.iou_floor = v;
    }
    if let Some(v) = args.max_objects {
        p.max_objects = v;
    }
    if let Some(v) = args.score_threshold {
        p.score_threshold = v;
    }
    if let Some(v) = args.patience {
        p.patience = Some(v);
    }
    if let Some(k) = args.propagator {
        config.propagation.kind = k;
    }
    if let Some(n) = args.propagation_noise {
        config.propagation.noise = n;
    }
    ctx.snapshot("track-run", &config)?;
    let model = load_selector_model(config.pipeline.selector, &ctx.path(&args.model, "model.json"))?;
    let (_, videos) = load_dataset(&ctx.data(&args.data))?;
    let proposals: ProposalFile = read_json(&ctx.path(&args.proposals, "proposals.json"))?;
    let directions: &[(Direction, &str)] = match args.direction {
        DirectionArg::Fwd => &[(Direction::Forward, "fwd")],
        DirectionArg::Bwd => &[(Direction::Backward, "bwd")],
        DirectionArg::Both => &[(Direction::Forward, "fwd"), (Direction::Backward, "bwd")],
    };
    for &(direction, tag) in directions {
        let per_video = videos
            .par_iter()
            .map(|v| {
                let empty = VideoProposals {
                    video_id: v.video_id,
                    height: v.height(),
                    width: v.width(),
                    length: v.len(),
                    proposals: Vec::new(),
                };
                let props = proposals
                    .videos
                    .iter()
                    .find(|p| p.video_id == v.video_id)
                    .unwrap_or(&empty);
                track_video(v, props, direction, &config, model.as_ref())
            })
            .collect::<Result<Vec<_>>>()?;
        let file = TrackFile { videos: per_video };
        write_json(&ctx.out.join(format!("tracks_{tag}.json")), &file)?;
        write_json(&ctx.out.join(format!("results_{tag}.json")), &file.to_results())?;
        let n: usize = file.videos.iter().map(|v| v.tracks.len()).sum();
        println!("{tag}: {n} tracks");
    }
    Ok(())
}

/// Merges one video's passes; `video` enables selector arbitration.
pub fn merge_video(
    fwd: &VideoTracks,
    bwd: &VideoTracks,
    config: &RunConfig,
    video: Option<&SyntheticVideo>,
    model: Option<&MsnModel>,
) -> Result<(VideoTracks, MergeReport)> {
    let graph = associate_passes(&fwd.tracks, &bwd.tracks, config.merge.merge_iou)?;
    let resolutions = resolve(&graph, &fwd.tracks, &bwd.tracks);
    let merged = match video {
        Some(v) => {
            let mut selector = make_selector(config.pipeline.selector, model, v);
            let arbiter = Arbiter {
                frames: &v.frames,
                selector: selector.as_mut(),
            };
            merge_tracks(&graph, &fwd.tracks, &bwd.tracks, Some(arbiter))?
        }
        None => merge_tracks(&graph, &fwd.tracks, &bwd.tracks, None)?,
    };
    let (tracks, rider_links) = if config.merge.link_riders {
        human_object_link(merged)?
    } else {
        (merged, Vec::new())
    };
    let report = MergeReport {
        video_id: fwd.video_id,
        merge_iou: config.merge.merge_iou,
        graph,
        resolutions,
        rider_links,
    };
    Ok((
        VideoTracks {
            video_id: fwd.video_id,
            length: fwd.length.max(bwd.length),
            tracks,
        },
        report,
    ))
}

fn merge(ctx: &Context, mut config: RunConfig, args: MergeArgs) -> Result<()> {
    if let Some(v) = args.merge_iou {
        config.merge.merge_iou = v;
    }
    if let Some(s) = args.selector {
        config.pipeline.selector = s;
    }
    if args.no_link {
        config.merge.link_riders = false;
    }
    ctx.snapshot("merge", &config)?;
    let fwd: TrackFile = read_json(&ctx.path(&args.fwd, "tracks_fwd.json"))?;
    let bwd: TrackFile = read_json(&ctx.path(&args.bwd, "tracks_bwd.json"))?;
    let data = ctx.data(&args.data);
    let videos = if data.join("gt.json").exists() {
        Some(load_dataset(&data)?.1)
    } else {
        log::warn!("no dataset at {}; dual frames keep the forward mask", data.display());
        None
    };
    let model = match videos {
        Some(_) => load_selector_model(
            config.pipeline.selector,
            &ctx.path(&args.model, "model.json"),
        )?,
        None => None,
    };

    let mut ids: Vec<u64> = fwd.videos.iter().map(|v| v.video_id).collect();
    ids.extend(
        bwd.videos
            .iter()
            .map(|v| v.video_id)
            .filter(|id| !fwd.videos.iter().any(|f| f.video_id == *id)),
    );
    let find = |file: &TrackFile, id: u64| -> VideoTracks {
        file.videos
            .iter()
            .find(|v| v.video_id == id)
            .cloned()
            .unwrap_or(VideoTracks {
                video_id: id,
                length: 0,
                tracks: Vec::new(),
            })
    };
    let merged = ids
        .par_iter()
        .map(|&id| {
            let video = videos
                .as_ref()
                .and_then(|vs| vs.iter().find(|v| v.video_id == id));
            let mut f = find(&fwd, id);
            let b = find(&bwd, id);
            f.length = f.length.max(b.length);
            merge_video(&f, &b, &config, video, model.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    let (videos, reports): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
    let file = TrackFile { videos };
    write_json(&ctx.out.join("tracks_merged.json"), &file)?;
    write_json(&ctx.out.join("results_merged.json"), &file.to_results())?;
    write_json(&ctx.out.join("merge_report.json"), &reports)?;
    let n: usize = file.videos.iter().map(|v| v.tracks.len()).sum();
    println!("merged: {n} tracks");
    Ok(())
}

fn eval(ctx: &Context, config: RunConfig, args: EvalArgs) -> Result<()> {
    ctx.snapshot("eval", &config)?;
    let gt: GtFile = read_json(&ctx.path(&args.gt, "gt.json"))?;
    let results_path = ctx.path(&args.results, "results_merged.json");
    let results: Vec<ResultEntry> = read_json(&results_path)?;
    let report = evaluate(&results, &gt)?;
    let stem = results_path
        .file_stem()
        .map_or("results".into(), |s| s.to_string_lossy().into_owned());
    write_json(&ctx.out.join(format!("eval_{stem}.json")), &report)?;
    print!("{report}");
    println!("mAP {:?}", report.map);
    Ok(())
}

fn render(ctx: &Context, config: RunConfig, args: RenderArgs) -> Result<()> {
    ctx.snapshot("render", &config)?;
    let (_, videos) = load_dataset(&ctx.data(&args.data))?;
    let results: Vec<ResultEntry> =
        read_json(&ctx.path(&args.results, "results_merged.json"))?;
    let dir = ctx.out.join("render");
    for v in videos
        .iter()
        .filter(|v| args.video.is_none_or(|id| id == v.video_id))
    {
        let entries: Vec<&ResultEntry> =
            results.iter().filter(|r| r.video_id == v.video_id).collect();
        let frames = render::render_video(&v.frames, &entries)?;
        for (t, img) in frames.iter().enumerate() {
            save_png(&frame_path(&dir, v.video_id, t), img)?;
        }
        println!("video {}: {} tracks, {} frames", v.video_id, entries.len(), frames.len());
    }
    Ok(())
}

fn bench(config: RunConfig, command: BenchCommand) -> Result<()> {
    let seed = derive_seed(config.seed, "bench");
    let report = match command {
        BenchCommand::Hungarian { n, repetitions } => {
            serde_json::to_value(bench::bench_hungarian(n, repetitions, seed)?)?
        }
        BenchCommand::Rle { size, count } => {
            serde_json::to_value(bench::bench_rle(size, count, seed)?)?
        }
        BenchCommand::Msn {
            arch,
            batch,
            repetitions,
        } => serde_json::to_value(bench::bench_msn(arch.arch(), batch, repetitions, seed)?)?,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
