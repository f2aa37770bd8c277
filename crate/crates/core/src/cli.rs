//! Command-line front end: one subcommand per pipeline stage.
//!
//! A TOML run configuration supplies defaults, flags override it, and every
//! command writes the resolved configuration next to its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::apm::{
    orientation_accuracy, train_apm, ApmCheckpoint, ApmTrainConfig, HeuristicKind, OrientationStats, VerticalPriors,
};
use crate::assembly::{export_scene, import_scene, AssemblyConfig, AssetCatalog, ExportFormat, Scene3D};
use crate::diffusion::{train_denoiser, write_loss_csv, DenoiserCheckpoint, DiffusionTrainConfig, TrainingMode};
use crate::error::{Error, Result};
use crate::extraction::{compute_thresholds, extract_instances, ExtractionReport, ThresholdTable};
use crate::layout::io::{read_json, read_map_png, write_json, write_map_png, write_text, MapJson};
use crate::layout::{
    ArchMask, CategoryPalette, ConditionKind, ConditionSpec, GridSpec, RoomType, SceneLayout, SemanticMap, FLOOR,
};
use crate::metrics::{evaluate_corpus, EvalScene};
use crate::pipeline::{assemble_sample, generate_batch, AttributeSource, GeneratedSample};
use crate::synth::{
    apm_samples, build_dataset, diffusion_samples, histograms_by_room_type, orientation_stats, synthetic_catalog,
    vertical_priors, Dataset, DatasetConfig, RoomGrammar, SceneRecord, Split,
};

pub const OUT_ENV: &str = "ROOMDIFF_OUT";

#[derive(Debug, Parser)]
#[command(name = "roomdiff", version, about = "Semantic-map diffusion for indoor scenes")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Grid preset: desk, desk64 or full.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Palette preset: desk or full.
    #[arg(long, global = true)]
    pub palette: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset, its asset catalog and extraction thresholds.
    Synth(SynthArgs),
    /// Train the layout denoiser on the train split.
    TrainDenoiser(TrainDenoiserArgs),
    /// Train the attribute model and fit the heuristic baselines.
    TrainApm(TrainApmArgs),
    /// Sample semantic maps.
    Generate(GenerateArgs),
    /// Extract instances from one map.
    Extract(ExtractArgs),
    /// Turn generated maps into 3D scenes.
    Assemble(AssembleArgs),
    /// Score assembled scenes against the training histogram.
    Evaluate(EvaluateArgs),
    /// Draw a map or a scene's top-down footprint as an indexed PNG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Dataset directory; defaults to <out>/dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainDenoiserArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Diffusion steps T.
    #[arg(long)]
    pub steps: Option<usize>,
    /// cosine or linear.
    #[arg(long)]
    pub schedule: Option<String>,
    /// mixed, or a single condition kind (none, floor, arch).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Checkpoint path; defaults to <out>/denoiser.json.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainApmArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Checkpoint path; defaults to <out>/apm.json.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// none, floor or arch.
    #[arg(long)]
    pub condition: Option<String>,
    /// Mask file (map JSON or indexed PNG) for floor and arch conditions.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Cycle through the masks and room types of a dataset split instead of one mask file.
    #[arg(long)]
    pub masks_from: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub room_type: Option<String>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Output directory; defaults to <out>/generated/<condition>.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Map file: generated sample, dataset scene, map JSON or indexed PNG.
    pub map: PathBuf,
    /// Threshold table; defaults to <out>/dataset/thresholds.json.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Directory of generated samples.
    #[arg(long)]
    pub samples: PathBuf,
    /// Attribute checkpoint; defaults to <out>/apm.json.
    #[arg(long)]
    pub apm: Option<PathBuf>,
    /// Use a baseline instead of the attribute model: random, majority or inward.
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Scale assets to the predicted size instead of keeping catalog sizes.
    #[arg(long)]
    pub rescale: Option<bool>,
    /// json or obj.
    #[arg(long, default_value = "json")]
    pub format: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory written by `assemble`.
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Report stem; writes <stem>.csv and <stem>.json. Defaults to <scenes>/report.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Map file (generated sample, dataset scene, map JSON or PNG) or scene JSON.
    pub input: PathBuf,
    /// Treat the input as an assembled scene.
    #[arg(long)]
    pub scene: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub scenes: usize,
    pub ratios: [f64; 3],
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            scenes: 2000,
            ratios: [0.7, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiserSection {
    pub steps: usize,
    pub schedule: String,
    pub mode: String,
    pub learning_rate: f64,
    pub cosine_decay: bool,
    pub iterations: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub radius: usize,
    pub log_every: usize,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        let d = DiffusionTrainConfig::default();
        Self {
            steps: d.diffusion_steps,
            schedule: d.schedule.to_string(),
            mode: "mixed".into(),
            learning_rate: d.learning_rate,
            cosine_decay: d.cosine_decay,
            iterations: d.iterations,
            batch_size: d.batch_size,
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            radius: d.radius,
            log_every: d.log_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSection {
    pub condition: String,
    pub count: usize,
    pub room_type: String,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            condition: "arch".into(),
            count: 200,
            room_type: "bedroom".into(),
        }
    }
}

/// Resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub out: PathBuf,
    pub grid: String,
    pub palette: String,
    pub seed: u64,
    pub synth: SynthSection,
    pub denoiser: DenoiserSection,
    pub apm: ApmTrainConfig,
    pub generate: GenerateSection,
    pub rescale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs"),
            grid: "desk".into(),
            palette: "desk".into(),
            seed: 0,
            synth: SynthSection::default(),
            denoiser: DenoiserSection::default(),
            apm: ApmTrainConfig::default(),
            generate: GenerateSection::default(),
            rescale: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::layout::io::read_text(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::preset(&self.grid)
    }

    pub fn palette(&self) -> Result<CategoryPalette> {
        CategoryPalette::preset(&self.palette)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn diffusion_config(&self) -> Result<DiffusionTrainConfig> {
        Ok(DiffusionTrainConfig {
            diffusion_steps: self.denoiser.steps,
            schedule: self.denoiser.schedule.parse()?,
            learning_rate: self.denoiser.learning_rate,
            cosine_decay: self.denoiser.cosine_decay,
            iterations: self.denoiser.iterations,
            batch_size: self.denoiser.batch_size,
            mode: parse_mode(&self.denoiser.mode)?,
            seed: self.seed,
            embed_dim: self.denoiser.embed_dim,
            hidden_dim: self.denoiser.hidden_dim,
            radius: self.denoiser.radius,
            log_every: self.denoiser.log_every,
            ..DiffusionTrainConfig::default()
        })
    }

    pub fn apm_config(&self) -> ApmTrainConfig {
        ApmTrainConfig {
            seed: self.seed,
            ..self.apm.clone()
        }
    }

    /// Writes `<dir>/<command>.config.toml`.
    pub fn stamp(&self, dir: &Path, command: &str) -> Result<()> {
        write_text(&dir.join(format!("{command}.config.toml")), &self.to_toml()?)
    }
}

pub fn parse_mode(s: &str) -> Result<TrainingMode> {
    match s {
        "mixed" => Ok(TrainingMode::Mixed),
        other => Ok(TrainingMode::Single(other.parse()?)),
    }
}

/// Config file, then global flags; the environment fills `out` through clap.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(g) = &cli.grid {
        cfg.grid = g.clone();
    }
    if let Some(p) = &cli.palette {
        cfg.palette = p.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Synth(a) => {
            set(&mut cfg.synth.scenes, a.scenes);
        }
        Command::TrainDenoiser(a) => {
            set(&mut cfg.denoiser.iterations, a.iterations);
            set(&mut cfg.denoiser.steps, a.steps);
            set(&mut cfg.denoiser.schedule, a.schedule.clone());
            set(&mut cfg.denoiser.mode, a.mode.clone());
            set(&mut cfg.denoiser.learning_rate, a.lr);
        }
        Command::TrainApm(a) => {
            set(&mut cfg.apm.epochs, a.epochs);
            set(&mut cfg.apm.learning_rate, a.lr);
        }
        Command::Generate(a) => {
            set(&mut cfg.generate.condition, a.condition.clone());
            set(&mut cfg.generate.count, a.count);
            set(&mut cfg.generate.room_type, a.room_type.clone());
        }
        Command::Assemble(a) => {
            set(&mut cfg.rescale, a.rescale);
        }
        _ => {}
    }
    cfg.grid_spec()?;
    cfg.palette()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Runs the parsed command; the caller maps errors to exit codes.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&cfg, a),
        Command::TrainDenoiser(a) => cmd_train_denoiser(&cfg, a),
        Command::TrainApm(a) => cmd_train_apm(&cfg, a),
        Command::Generate(a) => cmd_generate(&cfg, a),
        Command::Extract(a) => cmd_extract(&cfg, a),
        Command::Assemble(a) => cmd_assemble(&cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Render(a) => cmd_render(&cfg, a),
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dataset_path(cfg: &RunConfig, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.dataset_dir())
}

fn open_dataset(cfg: &RunConfig, given: &Option<PathBuf>) -> Result<(Dataset, CategoryPalette)> {
    let ds = Dataset::open(&dataset_path(cfg, given))?;
    let palette = ds.manifest.palette()?;
    Ok((ds, palette))
}

pub fn cmd_synth(cfg: &RunConfig, a: &SynthArgs) -> Result<()> {
    let dir = dataset_path(cfg, &a.dataset);
    let palette = cfg.palette()?;
    let dcfg = DatasetConfig {
        scenes: cfg.synth.scenes,
        seed: cfg.seed,
        grid: cfg.grid_spec()?,
        ratios: cfg.synth.ratios,
        grammars: RoomGrammar::defaults(),
    };
    let manifest = build_dataset(&dcfg, &palette, &dir)?;
    let ds = Dataset::open(&dir)?;
    let train = ds.load_split(Split::Train)?;
    if train.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    let layouts: Vec<SceneLayout> = train.iter().map(|s| s.layout.clone()).collect();
    compute_thresholds(&layouts)?.save(&dir.join("thresholds.json"))?;
    synthetic_catalog(&dcfg.grammars, &palette)?.save(&dir.join("catalog.json"))?;
    write_json(&dir.join("histograms.json"), &histograms_by_room_type(&train))?;
    cfg.stamp(&dir, "synth")?;
    info!(
        "wrote {} scenes ({} / {} / {}) to {}",
        manifest.counts.total(),
        manifest.counts.train,
        manifest.counts.val,
        manifest.counts.test,
        dir.display()
    );
    Ok(())
}

pub fn cmd_train_denoiser(cfg: &RunConfig, a: &TrainDenoiserArgs) -> Result<()> {
    let (ds, palette) = open_dataset(cfg, &a.dataset)?;
    let train = ds.load_split(Split::Train)?;
    let tcfg = cfg.diffusion_config()?;
    let trained = train_denoiser(&diffusion_samples(&train), &tcfg)?;
    let path = a.checkpoint.clone().unwrap_or_else(|| cfg.out.join("denoiser.json"));
    DenoiserCheckpoint::new(trained.model, &trained.schedule, palette.hash(), ds.manifest.grid.scale, tcfg).save(&path)?;
    let log_path = path.with_extension("loss.csv");
    let file = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    write_loss_csv(&trained.log, file)?;
    cfg.stamp(parent_dir(&path), "train-denoiser")?;
    info!("saved denoiser checkpoint to {}", path.display());
    Ok(())
}

pub fn cmd_train_apm(cfg: &RunConfig, a: &TrainApmArgs) -> Result<()> {
    let (ds, palette) = open_dataset(cfg, &a.dataset)?;
    let train = ds.load_split(Split::Train)?;
    let tcfg = cfg.apm_config();
    let trained = train_apm(&apm_samples(&train), &tcfg)?;
    let path = a.checkpoint.clone().unwrap_or_else(|| cfg.out.join("apm.json"));
    let dir = parent_dir(&path).to_path_buf();
    let test = ds.load_split(Split::Test)?;
    if !test.is_empty() {
        info!(
            "held-out orientation accuracy {:.3}",
            orientation_accuracy(&trained.model, &apm_samples(&test))?
        );
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &trained.log {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_text(&path.with_extension("log.csv"), &String::from_utf8_lossy(&bytes))?;
    ApmCheckpoint::new(trained.model, palette.hash(), tcfg).save(&path)?;
    write_json(&dir.join("orientation_stats.json"), &orientation_stats(&train))?;
    write_json(&dir.join("vertical_priors.json"), &vertical_priors(&train)?)?;
    cfg.stamp(&dir, "train-apm")?;
    info!("saved attribute checkpoint to {}", path.display());
    Ok(())
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Reads a map from a generated sample, dataset scene record, map JSON or PNG.
pub fn load_map(path: &Path, cfg: &RunConfig) -> Result<SemanticMap> {
    if path.extension().and_then(|e| e.to_str()) == Some("png") {
        return read_map_png(path, cfg.grid_spec()?.scale, cfg.palette()?.len());
    }
    let value: serde_json::Value = read_json(path)?;
    if value.get("map").is_some() {
        let map: MapJson = serde_json::from_value(value["map"].clone())?;
        return map.try_into();
    }
    serde_json::from_value::<MapJson>(value)?.try_into()
}

fn sample_stem(i: usize) -> String {
    format!("sample_{i:04}")
}

pub fn cmd_generate(cfg: &RunConfig, a: &GenerateArgs) -> Result<()> {
    let ckpt_path = a.checkpoint.clone().unwrap_or_else(|| cfg.out.join("denoiser.json"));
    let ckpt = DenoiserCheckpoint::load(&ckpt_path)?;
    let palette = cfg.palette()?;
    ckpt.check_palette(&palette.hash())?;
    let kind: ConditionKind = cfg.generate.condition.parse()?;
    ckpt.model.mode().check(kind)?;
    let model_cfg = ckpt.model.config();
    let (h, w) = (model_cfg.height, model_cfg.width);
    let conditions: Vec<ConditionSpec> = if let Some(dir) = &a.masks_from {
        let ds = Dataset::open(dir)?;
        let scenes = ds.load_split(a.split.parse::<Split>()?)?;
        if scenes.is_empty() {
            return Err(Error::Data(format!("split '{}' is empty", a.split)));
        }
        (0..cfg.generate.count)
            .map(|i| {
                let s = &scenes[i % scenes.len()];
                ConditionSpec::derive(kind, &s.arch, s.layout.room_type())
            })
            .collect::<Result<_>>()?
    } else {
        let room_type: RoomType = cfg.generate.room_type.parse()?;
        let cond = match (kind, &a.mask) {
            (ConditionKind::None, _) => ConditionSpec::unconditional(h, w, room_type),
            (_, None) => return Err(Error::Config(format!("condition '{kind}' needs --mask or --masks-from"))),
            (_, Some(p)) => {
                let m = load_map(p, cfg)?;
                let arch = ArchMask::from_map(&m);
                ConditionSpec::derive(kind, &arch, room_type)?
            }
        };
        vec![cond; cfg.generate.count]
    };
    let out = a
        .output
        .clone()
        .unwrap_or_else(|| cfg.out.join("generated").join(kind.name()));
    let samples = generate_batch(&ckpt.model, &ckpt.schedule()?, &conditions, ckpt.scale, cfg.seed)?;
    for s in &samples {
        write_json(&out.join(format!("{}.json", sample_stem(s.index))), s)?;
        write_map_png(&s.semantic_map()?, &palette, &out.join(format!("{}.png", sample_stem(s.index))))?;
    }
    cfg.stamp(&out, "generate")?;
    info!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

pub fn cmd_extract(cfg: &RunConfig, a: &ExtractArgs) -> Result<()> {
    let map = load_map(&a.map, cfg)?;
    let th_path = a.thresholds.clone().unwrap_or_else(|| cfg.dataset_dir().join("thresholds.json"));
    let thresholds = if th_path.exists() {
        ThresholdTable::load(&th_path)?
    } else {
        warn!("{} not found; using the fallback threshold", th_path.display());
        ThresholdTable::default()
    };
    let instances = extract_instances(&map, &thresholds)?;
    let out = a.output.clone().unwrap_or_else(|| a.map.with_extension("instances.json"));
    ExtractionReport::new(&map, &instances).save(&out)?;
    info!("{} instances written to {}", instances.len(), out.display());
    Ok(())
}

/// One line of the assembled-scene index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneIndexEntry {
    pub file: String,
    pub room_type: RoomType,
    pub condition: ConditionKind,
}

fn read_samples(dir: &Path) -> Result<Vec<GeneratedSample>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().and_then(|e| e.to_str()) == Some("json")
                && p.file_stem()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_prefix("sample_"))
                    .is_some_and(|n| n.bytes().all(|b| b.is_ascii_digit()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no samples in {}", dir.display())));
    }
    paths.iter().map(|p| read_json(p)).collect()
}

pub fn cmd_assemble(cfg: &RunConfig, a: &AssembleArgs) -> Result<()> {
    let dataset = dataset_path(cfg, &a.dataset);
    let thresholds = ThresholdTable::load(&dataset.join("thresholds.json"))?;
    let catalog = AssetCatalog::load(&dataset.join("catalog.json"))?;
    let samples = read_samples(&a.samples)?;
    let format: ExportFormat = a.format.parse()?;
    let out = a.output.clone().unwrap_or_else(|| a.samples.join("scenes"));
    let config = AssemblyConfig {
        rescale: cfg.rescale,
        ..Default::default()
    };
    let apm_ckpt;
    let stats: OrientationStats;
    let priors: VerticalPriors;
    let source = match &a.heuristic {
        Some(h) => {
            let kind: HeuristicKind = h.parse()?;
            let dir = a.apm.as_deref().map(parent_dir).unwrap_or(&cfg.out).to_path_buf();
            stats = read_json(&dir.join("orientation_stats.json"))?;
            priors = read_json(&dir.join("vertical_priors.json"))?;
            AttributeSource::Heuristic {
                kind,
                stats: &stats,
                priors: &priors,
                seed: cfg.seed,
            }
        }
        None => {
            let path = a.apm.clone().unwrap_or_else(|| cfg.out.join("apm.json"));
            apm_ckpt = ApmCheckpoint::load(&path)?;
            apm_ckpt.check_palette(&cfg.palette()?.hash())?;
            AttributeSource::Model(&apm_ckpt.model)
        }
    };
    let mut index = Vec::new();
    for s in &samples {
        let scene = match assemble_sample(s, &thresholds, &source, &catalog, &config) {
            Ok(scene) => scene,
            Err(e @ Error::Geometry(_)) => {
                warn!("sample {} skipped: {e}", s.index);
                continue;
            }
            Err(e) => return Err(e),
        };
        let file = format!("scene_{:04}.{}", s.index, a.format);
        export_scene(&scene, format, &out.join(&file))?;
        if format == ExportFormat::Obj {
            export_scene(&scene, ExportFormat::Json, &out.join(format!("scene_{:04}.json", s.index)))?;
        }
        index.push(SceneIndexEntry {
            file: format!("scene_{:04}.json", s.index),
            room_type: s.room_type,
            condition: s.kind,
        });
    }
    write_json(&out.join("index.json"), &index)?;
    cfg.stamp(&out, "assemble")?;
    info!("assembled {} of {} samples into {}", index.len(), samples.len(), out.display());
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, a: &EvaluateArgs) -> Result<()> {
    let dataset = dataset_path(cfg, &a.dataset);
    let gt: BTreeMap<RoomType, crate::metrics::CategoryHistogram> = read_json(&dataset.join("histograms.json"))?;
    let index: Vec<SceneIndexEntry> = read_json(&a.scenes.join("index.json"))?;
    let scenes: Vec<EvalScene> = index
        .iter()
        .map(|e| {
            Ok(EvalScene {
                scene: import_scene(&a.scenes.join(&e.file))?,
                room_type: e.room_type,
            })
        })
        .collect::<Result<_>>()?;
    let report = evaluate_corpus(&scenes, &gt)?;
    let stem = a.output.clone().unwrap_or_else(|| a.scenes.join("report"));
    report.write(&stem.with_extension("csv"), &stem.with_extension("json"))?;
    cfg.stamp(parent_dir(&stem), "evaluate")?;
    let o = report.overall();
    info!(
        "overall: CKL x100 {:.2}, OOB scene {:.1}%, OOB object {:.1}%, COL {:.1}%, NAV {:.1}%",
        o.ckl_x100, o.oob_scene, o.oob_object, o.col, o.nav
    );
    Ok(())
}

/// Top-down footprint of an assembled scene: floor cells inside the polygon,
/// then each placement's footprint painted with its category.
pub fn rasterize_scene(scene: &Scene3D, grid: GridSpec, num_categories: usize) -> Result<SemanticMap> {
    use crate::assembly::polygon::winding_number;
    let mut cells = vec![0u8; grid.pixels()];
    let center = |i: usize| {
        [
            ((i % grid.width) as f64 + 0.5) * grid.scale,
            ((i / grid.width) as f64 + 0.5) * grid.scale,
        ]
    };
    for (i, c) in cells.iter_mut().enumerate() {
        if winding_number(center(i), scene.floor()) != 0 {
            *c = FLOOR;
        }
    }
    for inst in scene.instances()? {
        let b = crate::metrics::footprint_bounds(&inst);
        for (i, c) in cells.iter_mut().enumerate() {
            let p = center(i);
            if p[0] >= b[0] && p[0] <= b[1] && p[1] >= b[2] && p[1] <= b[3] {
                *c = inst.category;
            }
        }
    }
    SemanticMap::new(grid.height, grid.width, grid.scale, num_categories, cells)
}

pub fn cmd_render(cfg: &RunConfig, a: &RenderArgs) -> Result<()> {
    let palette = cfg.palette()?;
    let map = if a.scene {
        rasterize_scene(&import_scene(&a.input)?, cfg.grid_spec()?, palette.len())?
    } else {
        load_map(&a.input, cfg)?
    };
    write_map_png(&map, &palette, &a.output)?;
    info!("rendered {} to {}", a.input.display(), a.output.display());
    Ok(())
}

/// Reads a dataset scene record; used by tooling that inspects single scenes.
pub fn read_scene_record(path: &Path) -> Result<SceneRecord> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ScheduleKind;

    #[test]
    fn config_layers() {
        let cfg = RunConfig::from_toml("seed = 7\n[denoiser]\niterations = 10\n[apm]\nepochs = 3\n").unwrap();
        assert_eq!((cfg.seed, cfg.denoiser.iterations, cfg.apm.epochs), (7, 10, 3));
        assert_eq!(cfg.denoiser.steps, 100);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        assert!(matches!(RunConfig::from_toml("seed = \"x\""), Err(Error::Config(_))));

        let cli = Cli::try_parse_from(["roomdiff", "--seed", "3", "--out", "o", "train-denoiser", "--iterations", "5"]).unwrap();
        let r = resolve_config(&cli).unwrap();
        assert_eq!((r.seed, r.denoiser.iterations, r.out.clone()), (3, 5, PathBuf::from("o")));
        assert_eq!(r.diffusion_config().unwrap().seed, 3);
    }

    #[test]
    fn modes_parse() {
        assert_eq!(parse_mode("mixed").unwrap(), TrainingMode::Mixed);
        assert_eq!(parse_mode("arch").unwrap(), TrainingMode::Single(ConditionKind::Arch));
        assert!(parse_mode("walls").is_err());
        assert!("cosine".parse::<ScheduleKind>().is_ok());
    }

    #[test]
    fn bad_presets_are_config_errors() {
        let cli = Cli::try_parse_from(["roomdiff", "--grid", "huge", "synth"]).unwrap();
        assert_eq!(resolve_config(&cli).unwrap_err().exit_code(), 2);
        assert_eq!(main_with_args(["roomdiff", "--palette", "nope", "synth"]), 2);
        assert_eq!(main_with_args(["roomdiff", "frobnicate"]), 2);
    }
}
