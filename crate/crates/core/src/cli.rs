//! Command-line front end. Machine-readable output goes to stdout as JSON (or
//! JSON lines); diagnostics go to stderr.
//!
//! Exit status: 0 on success, 1 on a validation or domain failure, 2 on a
//! usage error. `LATENT_REACH_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{
    generate_toy_dataset, record_toy_trajectory, rollout, sample_starts, ToyDatasetConfig,
    TwoAttractorSystem,
};
use crate::error::{Error, Result};
use crate::metrics::{coherence, confusion_and_f1, diversity, mean_defined, mean_inference_time, safety_rate};
use crate::monitor::{first_token_index_stat, monitor_dataset, MonitorReport};
use crate::oracle::{compare_to_grid, grid_brt, AxisBounds};
use crate::steer::{steer_many, SteeringConfig};
use crate::store::{load_checkpoint, read_dataset, save_checkpoint, write_dataset, write_dataset_to, DATASET_SCHEMA};
use crate::train::{train, TrainConfig, TrainMode};
use crate::trajectory::{
    trajectory_is_unsafe, DatasetHeader, LatentPoint, SafetyLabelConfig, Trajectory, TrajectoryDataset,
};
use crate::valuenet::ValueNetwork;

pub const THREADS_ENV: &str = "LATENT_REACH_THREADS";

const TOKEN_CELL: f64 = 0.25;

#[derive(Debug, Parser)]
#[command(name = "latent-reach", version, about = "Reachability-based monitoring and steering for latent dynamics")]
#[command(args_override_self = true)]
struct Cli {
    /// JSON file supplying flag values; explicit flags win. Top-level keys
    /// apply to any subcommand that has the flag, and an object under a
    /// subcommand's name applies to that subcommand only.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample uncontrolled two-attractor rollouts as a trajectory dataset.
    GenToy(GenToyArgs),
    /// Fit a value network to a trajectory dataset.
    Train(TrainArgs),
    /// Run the value monitor over a dataset, one JSON record per trajectory.
    Monitor(MonitorArgs),
    /// Steer toy rollouts with the least-restrictive filter.
    Steer(SteerArgs),
    /// Score monitor reports and/or steered datasets.
    Eval(EvalArgs),
    /// Compare a checkpoint against the grid oracle of the toy system.
    OracleCompare(OracleArgs),
    /// Check that a dataset file is well formed.
    Validate(ValidateArgs),
    /// Grid search over steering thresholds and radii.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenToyArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Contraction rate toward the active attractor.
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    lambda: f64,
    /// Radius of the failure disk around the unsafe attractor.
    #[arg(long, visible_alias = "failure-radius", default_value_t = 0.3)]
    radius: f64,
    /// Lower bound of the start box on every axis.
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    lo: f64,
    /// Upper bound of the start box on every axis.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    hi: f64,
    /// Output path; the dataset is written to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sample,
    Rl,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sample => TrainMode::Sample,
            ModeArg::Rl => TrainMode::Rl,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Sample)]
    mode: ModeArg,
    /// Discount factor for rl targets.
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Learning rate [default: 1e-4 for sample, 3e-5 for rl].
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Loss weight for states of unsafe trajectories.
    #[arg(long, default_value_t = 2.0)]
    unsafe_weight: f64,
    /// Epochs over which non-terminal weights ramp up to one (rl only).
    #[arg(long, default_value_t = 10)]
    curriculum: usize,
    /// Checkpoint whose parameters initialize training.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16384)]
    hidden1: usize,
    #[arg(long, default_value_t = 64)]
    hidden2: usize,
    #[arg(long, default_value_t = 1e-5)]
    weight_decay: f64,
    /// Fraction of trajectories, from the end of the file, held out.
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MonitorArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Flag a state when its value is at or below this threshold.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    threshold: f64,
    /// Include per-state values in every record.
    #[arg(long)]
    verbose: bool,
    /// Write the reports here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ToySystemArgs {
    /// Contraction rate of the toy system.
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
    /// Radius of the toy failure disk.
    #[arg(long, default_value_t = 0.3)]
    failure_radius: f64,
}

impl ToySystemArgs {
    fn system(&self, dim: usize) -> Result<TwoAttractorSystem> {
        TwoAttractorSystem::with_params(dim, self.lambda, self.failure_radius)
    }
}

#[derive(Debug, Args)]
struct StartArgs {
    /// Take start states and horizons from this dataset instead of sampling.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of sampled start states.
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    /// Seed for sampling start states.
    #[arg(long, default_value_t = 1)]
    start_seed: u64,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    hi: f64,
}

impl StartArgs {
    fn starts(&self, dim: usize) -> Result<Vec<(LatentPoint, usize)>> {
        if let Some(path) = &self.data {
            let ds = read_dataset(path)?;
            crate::trajectory::ensure_dim(dim, ds.dim())?;
            return ds
                .trajectories()
                .iter()
                .map(|t| {
                    if t.horizon() == 0 {
                        Err(Error::InvalidConfig("start trajectory has horizon 0".into()))
                    } else {
                        Ok((t.states()[0].clone(), t.horizon()))
                    }
                })
                .collect();
        }
        let cfg = ToyDatasetConfig {
            count: self.count,
            horizon: self.horizon,
            seed: self.start_seed,
            bounds: (self.lo, self.hi),
            token_cell: TOKEN_CELL,
        };
        Ok(sample_starts(dim, &cfg)?
            .into_iter()
            .map(|z| (z.to_storage_precision(), self.horizon))
            .collect())
    }
}

#[derive(Debug, Args)]
struct SteerArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Intervene when the value is at or below this threshold.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    alpha: f64,
    /// Radius of the perturbation ball.
    #[arg(long, default_value_t = 0.6)]
    radius: f64,
    #[arg(long, default_value_t = 64)]
    candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Leave the initial state unsteered.
    #[arg(long)]
    no_steer_initial: bool,
    /// Do not add the zero perturbation to the candidates.
    #[arg(long)]
    no_zero_candidate: bool,
    #[command(flatten)]
    system: ToySystemArgs,
    #[command(flatten)]
    starts: StartArgs,
    /// Steered dataset output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the unsteered rollouts from the same starts here.
    #[arg(long)]
    before: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Monitor reports (JSON lines) aligned with --data.
    #[arg(long)]
    reports: Option<PathBuf>,
    /// Dataset holding ground truth; for steering runs, the steered dataset.
    #[arg(long)]
    data: PathBuf,
    /// Unsteered dataset aligned with --data, enabling the safety rate.
    #[arg(long)]
    before: Option<PathBuf>,
    /// Trajectories whose minimum margin is at or below this are unsafe.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    unsafe_threshold: f64,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Grid bounds `lo,hi`, shared by every axis.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-2.0, 2.0], allow_negative_numbers = true)]
    bounds: Vec<f64>,
    /// Nodes per axis.
    #[arg(long, default_value_t = 41)]
    res: usize,
    #[arg(long, default_value_t = 50)]
    horizon: usize,
    /// Nodes with oracle |V| below this are excluded from `mae_margin`.
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    #[command(flatten)]
    system: ToySystemArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// JSON file `{"alpha": [...], "radius": [...]}`.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 64)]
    candidates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_steer_initial: bool,
    #[command(flatten)]
    system: ToySystemArgs,
    #[command(flatten)]
    starts: StartArgs,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepGrid {
    alpha: Vec<f64>,
    radius: Vec<f64>,
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Domain(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the CLI with `args` (including the program name), writing machine
/// output to stdout. Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout);
    let code = run_with(args, &mut out);
    if out.flush().is_err() {
        return 1;
    }
    code
}

/// Like [`run`], with machine output sent to `out`.
pub fn run_with<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if e.use_stderr() {
                let _ = e.print();
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    let result = match thread_pool() {
        Ok(Some(pool)) => pool.install(|| dispatch(cli.command, out)),
        Ok(None) => dispatch(cli.command, out),
        Err(msg) => Err(Failure::Usage(msg)),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn thread_pool() -> std::result::Result<Option<rayon::ThreadPool>, String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| e.to_string())
}

/// Splices flags from `--config FILE` in front of the user's own flags, so the
/// latter override them.
fn merge_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let mut config = None;
    let mut sub_at = None;
    let cmd = Cli::command();
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            config = args.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if sub_at.is_none() && cmd.find_subcommand(a.as_ref()).is_some() {
            sub_at = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(at)) = (config, sub_at) else {
        return Ok(args);
    };
    let name = args[at].to_string_lossy().into_owned();
    let sub = cmd.find_subcommand(&name).expect("subcommand located above");
    let extra = config_flags(&path, sub)?;
    let mut merged = args[..=at].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[at + 1..]);
    Ok(merged)
}

fn config_flags(path: &Path, sub: &clap::Command) -> std::result::Result<Vec<OsString>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: invalid JSON: {e}", path.display()))?;
    let Value::Object(top) = value else {
        return Err(format!("{}: config must be a JSON object", path.display()));
    };
    let mut entries: Vec<(String, Value, bool)> = Vec::new();
    for (k, v) in &top {
        if !v.is_object() {
            entries.push((k.clone(), v.clone(), false));
        }
    }
    match top.get(sub.get_name()) {
        Some(Value::Object(section)) => {
            entries.extend(section.iter().map(|(k, v)| (k.clone(), v.clone(), true)));
        }
        Some(_) => return Err(format!("config section {:?} must be an object", sub.get_name())),
        None => {}
    }
    let mut flags = Vec::new();
    for (key, value, strict) in entries {
        let long = key.replace('_', "-");
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(long.as_str())) else {
            if strict {
                return Err(format!("config key {key:?} is not a flag of `{}`", sub.get_name()));
            }
            continue;
        };
        let is_switch = matches!(arg.get_action(), ArgAction::SetTrue);
        let flag = OsString::from(format!("--{long}"));
        match value {
            Value::Bool(b) if is_switch => {
                if b {
                    flags.push(flag);
                }
            }
            Value::Null => {}
            Value::Number(n) => flags.extend([flag, n.to_string().into()]),
            Value::String(s) => flags.extend([flag, s.into()]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                flags.push(OsString::from(format!("--{long}={}", parts.join(","))));
            }
            other => return Err(format!("config key {key:?} has unsupported value {other}")),
        }
    }
    Ok(flags)
}

fn emit(out: &mut (dyn Write + Send), value: &impl Serialize) -> CliResult<()> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn dispatch(command: Command, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    match command {
        Command::GenToy(a) => gen_toy(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Monitor(a) => monitor_cmd(a, out),
        Command::Steer(a) => steer_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::OracleCompare(a) => oracle_cmd(a, out),
        Command::Validate(a) => validate_cmd(a, out),
        Command::Sweep(a) => sweep_cmd(a, out),
    }
}

fn gen_toy(a: GenToyArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let system = TwoAttractorSystem::with_params(a.dim, a.lambda, a.radius)?;
    let cfg = ToyDatasetConfig {
        count: a.count,
        horizon: a.horizon,
        seed: a.seed,
        bounds: (a.lo, a.hi),
        token_cell: TOKEN_CELL,
    };
    if cfg.horizon == 0 {
        return Err(Failure::Usage("--horizon must be at least 1".into()));
    }
    let ds = generate_toy_dataset(&system, &cfg)?;
    match &a.out {
        Some(path) => {
            write_dataset(path, &ds)?;
            let labels = SafetyLabelConfig::default();
            let unsafe_count = ds
                .trajectories()
                .iter()
                .filter(|t| trajectory_is_unsafe(t, &labels))
                .count();
            emit(
                out,
                &json!({
                    "out": path,
                    "trajectories": ds.len(),
                    "unsafe": unsafe_count,
                    "dim": ds.dim(),
                    "source": ds.header().source,
                }),
            )?;
        }
        None => write_dataset_to(&ds, &mut *out)?,
    }
    Ok(0)
}

fn train_cmd(a: TrainArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let mode = TrainMode::from(a.mode);
    let mut cfg = TrainConfig::new(mode);
    cfg.gamma = a.gamma;
    cfg.learning_rate = a.lr.unwrap_or(mode.default_learning_rate());
    cfg.batch_size = a.batch;
    cfg.epochs = a.epochs;
    cfg.unsafe_weight = a.unsafe_weight;
    cfg.curriculum_epochs = a.curriculum;
    cfg.seed = a.seed;
    cfg.hidden = (a.hidden1, a.hidden2);
    cfg.weight_decay = a.weight_decay;
    cfg.val_fraction = a.val_fraction;
    cfg.warm_start = a.warm_start;
    let ds = read_dataset(&a.data)?;
    let outcome = train(&ds, &cfg)?;
    save_checkpoint(&a.out, &outcome.network, &outcome.optimizer)?;
    emit(out, &json!({ "out": a.out, "report": outcome.report }))?;
    Ok(0)
}

fn load_net(path: &Path) -> Result<ValueNetwork<f32>> {
    Ok(load_checkpoint(path)?.0)
}

fn monitor_cmd(a: MonitorArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let net = load_net(&a.ckpt)?;
    let ds = read_dataset(&a.data)?;
    crate::trajectory::ensure_dim(net.input_dim(), ds.dim())?;
    let reports = monitor_dataset(&net, &ds, a.threshold)?;
    let write_all = |sink: &mut (dyn Write + Send)| -> CliResult<()> {
        for r in reports.iter() {
            if a.verbose {
                emit(sink, r)?;
            } else {
                emit(sink, &r.clone().without_values())?;
            }
        }
        Ok(())
    };
    match &a.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
            let mut w = BufWriter::new(file);
            write_all(&mut w)?;
            w.flush()?;
        }
        None => write_all(out)?,
    }
    Ok(0)
}

/// One steering batch scored against its unsteered counterpart.
struct SteerRun {
    before: Vec<Trajectory>,
    after: Vec<Trajectory>,
    interventions: usize,
    seconds: Vec<f64>,
}

impl SteerRun {
    fn summary(&self) -> Result<Value> {
        let labels = SafetyLabelConfig::default();
        let before: Vec<bool> = self.before.iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
        let after: Vec<bool> = self.after.iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
        let (div, coh) = generation_quality(&self.after)?;
        Ok(json!({
            "trajectories": self.after.len(),
            "unsafe_before": before.iter().filter(|&&b| b).count(),
            "unsafe_after": after.iter().filter(|&&b| b).count(),
            "safety_rate": safety_rate(&before, &after)?,
            "diversity": div,
            "coherence": coh,
            "interventions": self.interventions,
            "mean_inference_time": mean_inference_time(&self.seconds).ok(),
        }))
    }
}

/// Mean diversity and mean coherence over trajectories that carry tokens and
/// embeddings respectively.
fn generation_quality(trajs: &[Trajectory]) -> Result<(Option<f64>, Option<f64>)> {
    let div = mean_defined(trajs.iter().map(|t| t.tokens().map(diversity)));
    let mut cohs = Vec::with_capacity(trajs.len());
    for t in trajs {
        if let (Some(p), Some(r)) = (t.prompt_embedding(), t.response_embedding()) {
            cohs.push(coherence(p, r)?);
        }
    }
    Ok((div, mean_defined(cohs)))
}

fn run_steering(
    system: &TwoAttractorSystem,
    net: &ValueNetwork<f32>,
    starts: &[(LatentPoint, usize)],
    cfg: &SteeringConfig,
) -> Result<SteerRun> {
    let target = system.failure_target();
    let before = starts
        .iter()
        .map(|(z0, h)| record_toy_trajectory(rollout(system, z0, *h, None)?, &target, TOKEN_CELL))
        .collect::<Result<Vec<_>>>()?;
    let timed: Vec<(f64, crate::steer::SteeredRollout)> = {
        // Per-start timing; the batch itself runs in parallel.
        let started = Instant::now();
        let rollouts = steer_many(system, net, starts, cfg)?;
        let per = started.elapsed().as_secs_f64() / rollouts.len().max(1) as f64;
        rollouts.into_iter().map(|r| (per, r)).collect()
    };
    let mut after = Vec::with_capacity(timed.len());
    let mut seconds = Vec::with_capacity(timed.len());
    let mut interventions = 0;
    for (s, r) in timed {
        interventions += r.interventions();
        seconds.push(s);
        after.push(record_toy_trajectory(r.states, &target, TOKEN_CELL)?);
    }
    Ok(SteerRun {
        before,
        after,
        interventions,
        seconds,
    })
}

fn toy_header(dim: usize, source: String) -> DatasetHeader {
    DatasetHeader {
        dim,
        source,
        layer_index: 0,
        target_name: "disk".into(),
        pooling: "mean".into(),
    }
}

fn steer_cmd(a: SteerArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let net = load_net(&a.ckpt)?;
    let dim = net.input_dim();
    let system = a.system.system(dim)?;
    let cfg = SteeringConfig {
        alpha: a.alpha,
        radius: a.radius,
        candidates: a.candidates,
        include_zero: !a.no_zero_candidate,
        seed: a.seed,
        steer_initial_state: !a.no_steer_initial,
    };
    cfg.validate()?;
    let starts = a.starts.starts(dim)?;
    let run = run_steering(&system, &net, &starts, &cfg)?;
    let source = format!(
        "steer:{}:alpha={}:radius={}:candidates={}:seed={}",
        crate::dynamics::LatentSystem::name(&system),
        cfg.alpha,
        cfg.radius,
        cfg.candidates,
        cfg.seed
    );
    write_dataset(&a.out, &TrajectoryDataset::new(toy_header(dim, source), run.after.clone())?)?;
    if let Some(path) = &a.before {
        let source = format!("toy:{}:unsteered", crate::dynamics::LatentSystem::name(&system));
        write_dataset(path, &TrajectoryDataset::new(toy_header(dim, source), run.before.clone())?)?;
    }
    let mut report = run.summary()?;
    report["out"] = json!(a.out);
    report["config"] = serde_json::to_value(&cfg).map_err(io::Error::from)?;
    emit(out, &report)?;
    Ok(0)
}

fn read_reports(path: &Path) -> Result<Vec<MonitorReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn eval_cmd(a: EvalArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let ds = read_dataset(&a.data)?;
    let labels = SafetyLabelConfig {
        unsafe_threshold: a.unsafe_threshold,
    };
    let truth: Vec<bool> = ds.trajectories().iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
    let mut report = json!({ "trajectories": ds.len(), "unsafe": truth.iter().filter(|&&u| u).count() });
    if let Some(path) = &a.reports {
        let reports = read_reports(path)?;
        let predicted: Vec<bool> = reports.iter().map(|r| r.flagged).collect();
        report["classification"] = serde_json::to_value(confusion_and_f1(&predicted, &truth)?)
            .map_err(io::Error::from)?;
        report["first_token_index"] = json!(first_token_index_stat(&reports, &truth)?);
    }
    if let Some(path) = &a.before {
        let before = read_dataset(path)?;
        let before: Vec<bool> = before
            .trajectories()
            .iter()
            .map(|t| trajectory_is_unsafe(t, &labels))
            .collect();
        report["safety_rate"] = json!(safety_rate(&before, &truth)?);
    }
    let (div, coh) = generation_quality(ds.trajectories())?;
    report["diversity"] = json!(div);
    report["coherence"] = json!(coh);
    emit(out, &report)?;
    Ok(0)
}

fn oracle_cmd(a: OracleArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let net = load_net(&a.ckpt)?;
    let dim = net.input_dim();
    let system = a.system.system(dim)?;
    let (lo, hi) = (a.bounds[0], a.bounds[1]);
    let bounds = vec![AxisBounds { lo, hi }; dim];
    let res = vec![a.res; dim];
    let grid = grid_brt(&system, &system.failure_target(), &bounds, &res, a.horizon)?;
    let cmp = compare_to_grid(&net, &grid, a.margin)?;
    emit(
        out,
        &json!({
            "sign_agreement": cmp.sign_agreement,
            "mae": cmp.mae,
            "mae_margin": cmp.mae_margin,
            "margin": cmp.margin,
            "margin_nodes": cmp.margin_nodes,
            "grid_meta": {
                "dim": dim,
                "bounds": [lo, hi],
                "resolution": a.res,
                "nodes": cmp.nodes,
                "horizon": a.horizon,
                "lambda": a.system.lambda,
                "failure_radius": a.system.failure_radius,
            },
        }),
    )?;
    Ok(0)
}

fn validate_cmd(a: ValidateArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    match read_dataset(&a.data) {
        Ok(ds) => {
            emit(
                out,
                &json!({
                    "valid": true,
                    "schema": DATASET_SCHEMA,
                    "dim": ds.dim(),
                    "trajectories": ds.len(),
                }),
            )?;
            Ok(0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            emit(out, &json!({ "valid": false, "error": e.to_string() }))?;
            Ok(1)
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepCell {
    alpha: f64,
    radius: f64,
    safety_rate: Option<f64>,
    coherence: Option<f64>,
    diversity: Option<f64>,
    /// Sum of the three metrics; `None` if any is undefined.
    score: Option<f64>,
    interventions: usize,
}

fn sweep_cmd(a: SweepArgs, out: &mut (dyn Write + Send)) -> CliResult<i32> {
    let text = fs::read_to_string(&a.grid).map_err(|e| Error::file(&a.grid, e))?;
    let grid: SweepGrid = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.grid.display())))?;
    if grid.alpha.is_empty() || grid.radius.is_empty() {
        return Err(Failure::Usage("sweep grid needs at least one alpha and one radius".into()));
    }
    let net = load_net(&a.ckpt)?;
    let dim = net.input_dim();
    let system = a.system.system(dim)?;
    let starts = a.starts.starts(dim)?;
    let labels = SafetyLabelConfig::default();
    let mut cells = Vec::new();
    for &alpha in &grid.alpha {
        for &radius in &grid.radius {
            let cfg = SteeringConfig {
                alpha,
                radius,
                candidates: a.candidates,
                include_zero: true,
                seed: a.seed,
                steer_initial_state: !a.no_steer_initial,
            };
            cfg.validate()?;
            let run = run_steering(&system, &net, &starts, &cfg)?;
            let before: Vec<bool> = run.before.iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
            let after: Vec<bool> = run.after.iter().map(|t| trajectory_is_unsafe(t, &labels)).collect();
            let rate = safety_rate(&before, &after)?;
            let (div, coh) = generation_quality(&run.after)?;
            let score = match (rate, coh, div) {
                (Some(r), Some(c), Some(d)) => Some(r + c + d),
                _ => None,
            };
            cells.push(SweepCell {
                alpha,
                radius,
                safety_rate: rate,
                coherence: coh,
                diversity: div,
                score,
                interventions: run.interventions,
            });
        }
    }
    // First cell wins ties so the choice is stable under reruns.
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.score.map(|s| (i, s)))
        .fold(None, |acc: Option<(usize, f64)>, (i, s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((i, s)),
        })
        .map(|(i, _)| i);
    emit(out, &json!({ "cells": cells, "best": best.map(|i| &cells[i]) }))?;
    Ok(0)
}
