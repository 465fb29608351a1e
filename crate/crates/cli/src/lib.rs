//! Command-line front end for the reward-tuning pipeline.
//!
//! Every artifact-producing command writes `<out>.manifest.json` next to its
//! outputs, recording the resolved configuration, the seed and a SHA-256
//! digest of each input file.

use std::fmt;
use std::fs;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rcirl_core::evaluation::{comparison_csv, evaluate_suite, expert_rank, EvalError, MetricReport};
use rcirl_core::sampler::{
    build_frames, generate_scenario_suite, read_frame_records, write_frame_records, Family,
    FrameConfig, FrameRecord, GroundTruthReward, SamplerConfig, SamplerError, Split, SuiteConfig,
};
use rcirl_core::scenario::{NormTable, Scenario, ScenarioError};
use rcirl_core::shiftdemo::{self, DEMO_SEED};
use rcirl_core::training::{
    frames_from_records, train_gan_baseline, train_rcirl, Dataset, TrainConfig, TrainError,
};
use rcirl_core::valuenet::{load_model, save_model, ModelError, ValueModel, FORMAT_VERSION};

pub const MANIFEST_VERSION: u64 = 1;

/// A failure with its exit-code category.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad flags or arguments (exit 1).
    Usage(String),
    /// Unreadable or malformed input file (exit 2).
    Input(String),
    /// Inputs that parse but violate a contract, e.g. a grid mismatch (exit 3).
    Contract(String),
    /// Non-finite loss or values (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Contract(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Input(m) => ("malformed input", m),
            CliError::Contract(m) => ("contract violation", m),
            CliError::Numeric(m) => ("numeric failure", m),
        };
        write!(f, "{kind}: {msg}")
    }
}

impl std::error::Error for CliError {}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parse(_) | ModelError::VersionMismatch { .. } | ModelError::Io(_) => {
                CliError::Input(e.to_string())
            }
            ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            ModelError::DimensionMismatch { .. } | ModelError::GridMismatch => {
                CliError::Contract(e.to_string())
            }
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io(_) | TrainError::Parse { .. } => CliError::Input(e.to_string()),
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Model(m) => m.into(),
            TrainError::Contract(_) | TrainError::InvalidConfig(_) | TrainError::EmptyDataset => {
                CliError::Contract(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            _ => CliError::Contract(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        CliError::Contract(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Contract(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rcirl", version, about = "Rank-based conditional IRL pipeline for speed-profile rewards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded scenario suite (JSON array of scenarios).
    Suite(SuiteArgs),
    /// Build JSON-lines frames: synthetic expert plus sampled queries per scenario.
    Frames(FramesArgs),
    /// Train a value model with RC-IRL or the GAN baseline.
    Train(TrainArgs),
    /// Score a suite with a model: metric report and expert-rank statistics.
    Eval(EvalArgs),
    /// Two-model metric comparison as a CSV with one column per model.
    Compare(CompareArgs),
    /// Write the two-frame background-shift demonstration as plot-ready CSVs.
    Shiftdemo(ShiftdemoArgs),
    /// Print the file format versions this build reads and writes.
    Version,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Output suite file.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the per-scenario streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Suite configuration (JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total number of scenarios, spread evenly over the five families.
    #[arg(long, conflicts_with = "per_family")]
    pub size: Option<usize>,
    /// Number of scenarios in every family.
    #[arg(long)]
    pub per_family: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    /// Scenario suite file.
    #[arg(long)]
    pub suite: PathBuf,
    /// Output frames file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the split and sampler streams; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frame configuration (JSON, sampler and expert lattice included).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hidden ground-truth reward (JSON).
    #[arg(long)]
    pub reward: Option<PathBuf>,
    /// Sampled trajectories per frame.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Scenarios held out from training.
    #[arg(long)]
    pub n_holdout: Option<usize>,
    /// Omit precomputed feature blocks.
    #[arg(long)]
    pub no_features: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Rcirl,
    Gan,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Frames file (JSON lines).
    #[arg(long)]
    pub frames: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Rcirl)]
    pub method: MethodArg,
    /// Suite used to recompute features missing from the frames.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Training configuration (JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Seed for initialization and shuffling; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-epoch report CSV (default: `<out>.train.csv`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Sampler configuration (JSON); flags override it.
    #[arg(long)]
    pub sampler: Option<PathBuf>,
    /// Candidates drawn per scenario.
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Seed for the candidate streams; overrides the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub suite: PathBuf,
    /// Frames file; its holdout frames give the expert-rank statistics.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Output prefix: writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long)]
    pub suite: PathBuf,
    /// Frames file; adds expert-rank rows from its holdout frames.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Column header for the first model (default: file stem).
    #[arg(long)]
    pub name_a: Option<String>,
    /// Column header for the second model (default: file stem).
    #[arg(long)]
    pub name_b: Option<String>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct ShiftdemoArgs {
    /// Output prefix: writes `<out>.points.csv`, `<out>.directions.csv`, `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEMO_SEED)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u64,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Suite(a) => cmd_suite(a),
        Command::Frames(a) => cmd_frames(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Shiftdemo(a) => cmd_shiftdemo(a),
        Command::Version => {
            print!("{}", version_text());
            Ok(())
        }
    }
}

pub fn version_text() -> String {
    format!(
        "rcirl {}\nmodel format {FORMAT_VERSION}\nmanifest format {MANIFEST_VERSION}\n\
         suite: JSON array of scenarios\nframes: JSON lines, one frame per line\n",
        env!("CARGO_PKG_VERSION")
    )
}

/// `<path>.<suffix>`, keeping any existing extension.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", display(path))))?;
    Ok(buf)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", display(path))))
}

fn read_optional_json<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T, CliError> {
    path.map_or_else(|| Ok(T::default()), |p| read_json(p))
}

pub fn read_suite(path: &Path) -> Result<Vec<Scenario>, CliError> {
    let suite: Vec<Scenario> = read_json(path)?;
    for s in &suite {
        s.validate()?;
    }
    Ok(suite)
}

pub fn read_frames(path: &Path) -> Result<Vec<FrameRecord>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", display(path))))?;
    read_frame_records(BufReader::new(file))
        .map_err(|(line, msg)| CliError::Input(format!("{}:{line}: {msg}", display(path))))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", display(path))))
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Records inputs and outputs of one command and refuses to overwrite inputs.
struct Run {
    command: &'static str,
    inputs: Vec<(PathBuf, String)>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Self { command, inputs: Vec::new(), outputs: Vec::new() }
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_hex(&read_bytes(path)?);
        self.inputs.push((path.to_path_buf(), digest));
        Ok(())
    }

    fn output(&mut self, path: PathBuf) -> Result<PathBuf, CliError> {
        if let Ok(out) = fs::canonicalize(&path) {
            for (p, _) in &self.inputs {
                if fs::canonicalize(p).is_ok_and(|c| c == out) {
                    return Err(CliError::Usage(format!(
                        "output {} would overwrite an input",
                        display(&path)
                    )));
                }
            }
        }
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn finish<C: Serialize>(self, manifest_for: &Path, seed: u64, config: &C) -> Result<(), CliError> {
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).expect("serializable"),
            inputs: self
                .inputs
                .iter()
                .map(|(p, d)| InputDigest { path: display(p), sha256: d.clone() })
                .collect(),
            outputs: self.outputs.iter().map(|p| display(p)).collect(),
        };
        write_bytes(&with_suffix(manifest_for, "manifest.json"), to_pretty(&manifest).as_bytes())
    }
}

fn cmd_suite(a: &SuiteArgs) -> Result<(), CliError> {
    let mut run = Run::new("suite");
    if let Some(c) = &a.config {
        run.input(c)?;
    }
    let mut config: SuiteConfig = read_optional_json(a.config.as_ref())?;
    if let Some(n) = a.per_family {
        config.counts = Family::ALL.iter().map(|&f| (f, n)).collect();
    }
    if let Some(total) = a.size {
        let k = Family::ALL.len();
        config.counts = Family::ALL
            .iter()
            .enumerate()
            .map(|(i, &f)| (f, total / k + usize::from(i < total % k)))
            .collect();
    }
    let suite = generate_scenario_suite(&config, a.seed)?;
    let out = run.output(a.out.clone())?;
    write_bytes(&out, to_pretty(&suite).as_bytes())?;
    log::info!("wrote {} scenarios to {}", suite.len(), display(&out));
    run.finish(&a.out, a.seed, &config)
}

#[derive(Serialize)]
struct FramesResolved<'a> {
    frames: &'a FrameConfig,
    reward: &'a GroundTruthReward,
}

fn cmd_frames(a: &FramesArgs) -> Result<(), CliError> {
    let mut run = Run::new("frames");
    run.input(&a.suite)?;
    for p in [&a.config, &a.reward].into_iter().flatten() {
        run.input(p)?;
    }
    let suite = read_suite(&a.suite)?;
    let mut config: FrameConfig = read_optional_json(a.config.as_ref())?;
    let reward: GroundTruthReward = read_optional_json(a.reward.as_ref())?;
    if let Some(seed) = a.seed {
        config.seed = seed;
        config.sampler.seed = seed;
    }
    if let Some(n) = a.n_samples {
        config.sampler.n_samples = n;
    }
    if let Some(n) = a.n_holdout {
        config.n_holdout = n;
    }
    if a.no_features {
        config.include_features = false;
    }
    reward.validate()?;
    let frames = build_frames(&suite, &reward, &config)?;
    let mut buf = Vec::new();
    write_frame_records(&mut buf, &frames).expect("in-memory write");
    let out = run.output(a.out.clone())?;
    write_bytes(&out, &buf)?;
    log::info!("wrote {} frames to {}", frames.len(), display(&out));
    run.finish(&a.out, config.seed, &FramesResolved { frames: &config, reward: &reward })
}

fn load_dataset(
    frames: &Path,
    suite: Option<&Path>,
    norm_table: &NormTable,
) -> Result<Dataset, CliError> {
    let records = read_frames(frames)?;
    let suite = suite.map(read_suite).transpose()?;
    let dataset = frames_from_records(&records, norm_table, suite.as_deref())?;
    for w in &dataset.report.warnings {
        log::warn!("{w}");
    }
    Ok(dataset)
}

#[derive(Serialize)]
struct TrainResolved<'a> {
    method: MethodArg,
    train: &'a TrainConfig,
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let mut run = Run::new("train");
    run.input(&a.frames)?;
    for p in [&a.suite, &a.config].into_iter().flatten() {
        run.input(p)?;
    }
    let mut config: TrainConfig = read_optional_json(a.config.as_ref())?;
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let dataset = load_dataset(&a.frames, a.suite.as_deref(), &NormTable::standard())?;
    let (model, report) = match a.method {
        MethodArg::Rcirl => train_rcirl(&dataset, &config)?,
        MethodArg::Gan => train_gan_baseline(&dataset, &config)?,
    };
    let out = run.output(a.out.clone())?;
    let report_path = run.output(a.report.clone().unwrap_or_else(|| with_suffix(&a.out, "train.csv")))?;
    save_model(&model, &out)?;
    write_bytes(&report_path, report.to_csv().as_bytes())?;
    if let Some(r) = &report.final_rank {
        log::info!("final expert top-decile rate {:.3} over {} frames", r.top_decile_rate, r.n_frames);
    }
    run.finish(&a.out, config.seed, &TrainResolved { method: a.method, train: &config })
}

fn resolve_sampler(run: &mut Run, s: &SamplingArgs) -> Result<SamplerConfig, CliError> {
    if let Some(p) = &s.sampler {
        run.input(p)?;
    }
    let mut config: SamplerConfig = read_optional_json(s.sampler.as_ref())?;
    if let Some(n) = s.n_samples {
        config.n_samples = n;
    }
    if let Some(seed) = s.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let mut run = Run::new("eval");
    run.input(&a.model)?;
    run.input(&a.suite)?;
    if let Some(f) = &a.frames {
        run.input(f)?;
    }
    let sampler = resolve_sampler(&mut run, &a.sampling)?;
    let model = load_model(&a.model)?;
    let suite = read_suite(&a.suite)?;
    let mut report = evaluate_suite(&suite, &model, &sampler)?;
    if let Some(frames) = &a.frames {
        report.expert_rank = Some(holdout_rank(&model, frames, &suite)?);
    }
    let csv = run.output(with_suffix(&a.out, "csv"))?;
    let json = run.output(with_suffix(&a.out, "json"))?;
    write_bytes(&csv, report.to_csv().as_bytes())?;
    write_bytes(&json, to_pretty(&report).as_bytes())?;
    run.finish(&a.out, sampler.seed, &sampler)
}

fn holdout_rank(
    model: &ValueModel,
    frames: &Path,
    suite: &[Scenario],
) -> Result<rcirl_core::evaluation::RankStats, CliError> {
    let records = read_frames(frames)?;
    let dataset = frames_from_records(&records, &model.norm_table, Some(suite))?;
    model.check_grid(&dataset.time_grid)?;
    Ok(expert_rank(model, &dataset.split(Split::Holdout))?)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| display(path), |s| s.to_string_lossy().into_owned())
}

fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let mut run = Run::new("compare");
    for p in [&a.model_a, &a.model_b, &a.suite] {
        run.input(p)?;
    }
    if let Some(f) = &a.frames {
        run.input(f)?;
    }
    let sampler = resolve_sampler(&mut run, &a.sampling)?;
    let suite = read_suite(&a.suite)?;
    let report = |p: &Path| -> Result<MetricReport, CliError> {
        let model = load_model(p)?;
        let mut report = evaluate_suite(&suite, &model, &sampler)?;
        if let Some(frames) = &a.frames {
            report.expert_rank = Some(holdout_rank(&model, frames, &suite)?);
        }
        Ok(report)
    };
    let (ra, rb) = (report(&a.model_a)?, report(&a.model_b)?);
    let name_a = a.name_a.clone().unwrap_or_else(|| stem(&a.model_a));
    let name_b = a.name_b.clone().unwrap_or_else(|| stem(&a.model_b));
    if name_a == name_b {
        return Err(CliError::Usage(format!("both models are named `{name_a}`; pass --name-a/--name-b")));
    }
    let out = run.output(a.out.clone())?;
    write_bytes(&out, comparison_csv(&name_a, &ra, &name_b, &rb).as_bytes())?;
    run.finish(&a.out, sampler.seed, &sampler)
}

fn cmd_shiftdemo(a: &ShiftdemoArgs) -> Result<(), CliError> {
    let mut run = Run::new("shiftdemo");
    let report = shiftdemo::shift_report(a.seed);
    let points = run.output(with_suffix(&a.out, "points.csv"))?;
    let directions = run.output(with_suffix(&a.out, "directions.csv"))?;
    let json = run.output(with_suffix(&a.out, "json"))?;
    write_bytes(&points, report.points_csv().as_bytes())?;
    write_bytes(&directions, report.directions_csv().as_bytes())?;
    write_bytes(&json, to_pretty(&report).as_bytes())?;
    run.finish(&a.out, a.seed, &serde_json::json!({ "seed": a.seed }))
}
