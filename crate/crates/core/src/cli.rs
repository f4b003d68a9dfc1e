//! Command-line front end: dataset generation, training, batch runs,
//! replay and reports. Each command is a plain function so it can be driven
//! from tests and examples without a process boundary.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{train, ClassifierModel, LabeledSample, MachineReport, NUM_CLASSES};
use crate::config::{BatchManifest, ConfigError, ScenarioConfig};
use crate::features::stack_features;
use crate::gestures::{InputFrame, InterfaceId};
use crate::handmodel::{
    parse_gamepad_log, parse_hand_log, write_gamepad_log, write_hand_log, GamepadFrame, HandFrame,
};
use crate::metrics::{aggregate_csv, metrics_csv, MetricsRow, TrialMetrics};
use crate::pilot::{generate_pose_dataset, PoseTemplate};
use crate::rng::mix64;
use crate::sim::record::TrialRecord;
use crate::sim::{replay, run_trial, SimError, TrialSpec};

#[derive(Debug, Parser)]
#[command(name = "locomotion", version, about = "Hand-gesture locomotion benchmark")]
pub struct Cli {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labelled synthetic pose dataset (hand log + labels.csv).
    GenDataset {
        #[arg(long)]
        per_class: Option<usize>,
        /// Fingertip noise, metres.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Train the finger-count classifier and report held-out accuracy.
    Train {
        /// Hand log written by gen-dataset.
        dataset: PathBuf,
        /// Label sidecar; defaults to labels.csv next to the dataset.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Fraction of records used for training.
        #[arg(long)]
        split: Option<f64>,
        /// Where to write the model; defaults to <out>/model.svm.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run every trial of a batch manifest.
    Run {
        manifest: PathBuf,
        /// Also write each trial's input frames for later replay.
        #[arg(long)]
        save_inputs: bool,
    },
    /// Drive a trial from a recorded input log instead of a pilot.
    Replay {
        log: PathBuf,
        #[arg(long)]
        interface: InterfaceId,
        /// Pilot label written to the record header.
        #[arg(long, default_value = "default")]
        pilot: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Recompute metrics and aggregates from trial records.
    Report {
        /// Record files or directories containing them.
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::UnknownPilot(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Writes through a temporary sibling and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        Some(p) => Ok(ScenarioConfig::load(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

pub fn load_model(path: &Path) -> Result<ClassifierModel, CliError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    ClassifierModel::load(BufReader::new(f)).map_err(|e| io_err(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSummary {
    pub log: PathBuf,
    pub labels: PathBuf,
    pub class_counts: [usize; NUM_CLASSES],
}

/// Writes `dataset.jsonl` and `labels.csv` into `out_dir`.
pub fn cmd_gen_dataset(
    cfg: &ScenarioConfig,
    per_class: usize,
    sigma: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<DatasetSummary, CliError> {
    if per_class == 0 {
        return Err(CliError::Validation("empty dataset: per-class count is 0".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(CliError::Validation(format!("sigma must be >= 0 (got {sigma})")));
    }
    let template = PoseTemplate::with_scale(cfg.dataset.hand_scale);
    let data = generate_pose_dataset(per_class, sigma, &template, seed);
    let frames: Vec<HandFrame> = data.iter().map(|(f, _)| *f).collect();
    let mut log = Vec::new();
    write_hand_log(&frames, &mut log).map_err(|e| io_err(out_dir, e))?;
    let mut labels = String::from("record,label\n");
    let mut class_counts = [0; NUM_CLASSES];
    for (i, (_, c)) in data.iter().enumerate() {
        labels.push_str(&format!("{i},{c}\n"));
        class_counts[*c] += 1;
    }
    let log_path = out_dir.join("dataset.jsonl");
    let labels_path = out_dir.join("labels.csv");
    write_atomic(&log_path, &log)?;
    write_atomic(&labels_path, labels.as_bytes())?;
    Ok(DatasetSummary {
        log: log_path,
        labels: labels_path,
        class_counts,
    })
}

/// Reads a hand log and its label sidecar. Every hand-log line must have a
/// label row with the same record index.
pub fn load_dataset(log: &Path, labels: &Path) -> Result<Vec<(HandFrame, usize)>, CliError> {
    let f = fs::File::open(log).map_err(|e| io_err(log, e))?;
    let frames = parse_hand_log(BufReader::new(f)).map_err(|e| io_err(log, e))?;
    let text = fs::read_to_string(labels).map_err(|e| io_err(labels, e))?;
    let mut out = Vec::with_capacity(frames.len());
    let mut rows = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match rows.next() {
        Some((_, h)) if h.trim() == "record,label" => {}
        _ => return Err(io_err(labels, "line 1: expected header 'record,label'")),
    }
    for (n, line) in rows {
        let bad = || io_err(labels, format!("line {}: malformed row '{line}'", n + 1));
        let (id, label) = line.trim().split_once(',').ok_or_else(bad)?;
        let id: usize = id.parse().map_err(|_| bad())?;
        let label: usize = label.parse().map_err(|_| bad())?;
        if id != out.len() || id >= frames.len() || label >= NUM_CLASSES {
            return Err(bad());
        }
        out.push((frames[id], label));
    }
    if out.len() != frames.len() {
        return Err(io_err(
            labels,
            format!("{} labels for {} records", out.len(), frames.len()),
        ));
    }
    Ok(out)
}

/// Whether record `id` goes to the training side of the split.
pub fn in_training_split(id: usize, train_fraction: f64, seed: u64) -> bool {
    let h = mix64(seed ^ mix64(id as u64));
    ((h >> 11) as f64 / (1u64 << 53) as f64) < train_fraction
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub model: ClassifierModel,
    pub reports: Vec<MachineReport>,
    pub n_train: usize,
    pub n_test: usize,
    /// `None` when nothing was held out.
    pub accuracy: Option<f64>,
}

pub fn cmd_train(
    cfg: &ScenarioConfig,
    data: &[(HandFrame, usize)],
    train_fraction: f64,
    seed: u64,
) -> Result<TrainSummary, CliError> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(CliError::Validation(format!(
            "split must be in (0, 1] (got {train_fraction})"
        )));
    }
    if data.is_empty() {
        return Err(CliError::Validation("empty dataset".into()));
    }
    let mut train_set = Vec::new();
    let mut test_set = Vec::new();
    for (i, (frame, label)) in data.iter().enumerate() {
        let features = stack_features(&frame.left, &frame.right)
            .map_err(|e| CliError::Runtime(format!("record {i}: {e}")))?;
        let s = LabeledSample {
            features,
            label: *label,
        };
        if in_training_split(i, train_fraction, seed) {
            train_set.push(s);
        } else {
            test_set.push(s);
        }
    }
    let (model, reports) =
        train(&train_set, &cfg.classifier).map_err(|e| CliError::Validation(e.to_string()))?;
    let accuracy = if test_set.is_empty() {
        None
    } else {
        let mut correct = 0usize;
        for s in &test_set {
            if model.predict(&s.features).map_err(|e| CliError::Runtime(e.to_string()))? == s.label {
                correct += 1;
            }
        }
        Some(correct as f64 / test_set.len() as f64)
    };
    Ok(TrainSummary {
        model,
        reports,
        n_train: train_set.len(),
        n_test: test_set.len(),
        accuracy,
    })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
}

fn metrics_row(trial: String, record: &TrialRecord) -> Result<MetricsRow, CliError> {
    let metrics = TrialMetrics::of(record).map_err(|e| CliError::Runtime(format!("{trial}: {e}")))?;
    Ok(MetricsRow {
        trial,
        scenario: record.scenario.clone(),
        kind: record.kind(),
        interface: record.interface.to_string(),
        pilot: record.pilot.clone(),
        seed: record.seed,
        completed: record.completed,
        metrics,
    })
}

fn inputs_log(inputs: &[InputFrame]) -> Result<Vec<u8>, CliError> {
    let hands: Vec<HandFrame> = inputs
        .iter()
        .filter_map(|f| match f {
            InputFrame::Hand(h) => Some(*h),
            InputFrame::Gamepad(_) => None,
        })
        .collect();
    let pads: Vec<GamepadFrame> = inputs
        .iter()
        .filter_map(|f| match f {
            InputFrame::Gamepad(g) => Some(*g),
            InputFrame::Hand(_) => None,
        })
        .collect();
    let mut buf = Vec::new();
    let res = if pads.is_empty() {
        write_hand_log(&hands, &mut buf)
    } else {
        write_gamepad_log(&pads, &mut buf)
    };
    res.map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

/// Runs a manifest into `<out_root>/<manifest stem>/`. All rows are checked
/// before any trial starts. `seed_offset` is added to every manifest seed.
pub fn cmd_run(
    manifest_path: &Path,
    out_root: Option<&Path>,
    seed_offset: u64,
    jobs: Option<usize>,
    save_inputs: bool,
) -> Result<RunSummary, CliError> {
    let manifest = BatchManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let plan = manifest.plan(base, seed_offset)?;
    let model = match manifest.model_path(base) {
        Some(p) if plan.iter().any(|t| t.interface == InterfaceId::FingerNumber) => Some(Arc::new(load_model(&p)?)),
        _ => None,
    };

    let root = out_root
        .map(Path::to_path_buf)
        .or_else(|| manifest.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("runs"));
    let run_id = manifest_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let dir = root.join(run_id);
    fs::create_dir_all(dir.join("records")).map_err(|e| io_err(&dir, e))?;

    let work = || -> Result<Vec<MetricsRow>, CliError> {
        plan.par_iter()
            .map(|t| {
                let scen_name = t
                    .scenario_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| t.scenario.kind.to_string());
                let spec = TrialSpec::new(&t.scenario, t.interface, &t.pilot, t.seed)?.named(&scen_name);
                let run = run_trial(&t.scenario, &spec, model.clone(), save_inputs)?;
                let stem = t.file_stem();
                write_atomic(
                    &dir.join("records").join(format!("{stem}.csv")),
                    run.record.to_csv().as_bytes(),
                )?;
                if save_inputs {
                    write_atomic(&dir.join("inputs").join(format!("{stem}.jsonl")), &inputs_log(&run.inputs)?)?;
                }
                metrics_row(stem, &run.record)
            })
            .collect()
    };
    let rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    write_atomic(&dir.join("metrics.csv"), metrics_csv(&rows).as_bytes())?;
    write_atomic(&dir.join("aggregate.csv"), aggregate_csv(&rows).as_bytes())?;
    let text = fs::read(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    write_atomic(&dir.join("manifest.toml"), &text)?;
    Ok(RunSummary { dir, rows })
}

/// Reads a hand log, or a gamepad log when `interface` is the gamepad.
pub fn load_input_log(path: &Path, interface: InterfaceId) -> Result<Vec<InputFrame>, CliError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let r = BufReader::new(f);
    if interface.uses_hands() {
        let frames = parse_hand_log(r).map_err(|e| io_err(path, e))?;
        Ok(frames.into_iter().map(InputFrame::Hand).collect())
    } else {
        let frames = parse_gamepad_log(r).map_err(|e| io_err(path, e))?;
        Ok(frames.into_iter().map(InputFrame::Gamepad).collect())
    }
}

fn collect_records(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn cmd_report(paths: &[PathBuf]) -> Result<Vec<MetricsRow>, CliError> {
    let mut rows = Vec::new();
    for path in collect_records(paths)? {
        let f = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
        let record = TrialRecord::parse_csv(BufReader::new(f)).map_err(|e| io_err(&path, e))?;
        let trial = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        rows.push(metrics_row(trial, &record)?);
    }
    if rows.is_empty() {
        return Err(CliError::Validation("no trial records found".into()));
    }
    Ok(rows)
}

/// Entry point used by the binary.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::GenDataset { per_class, sigma } => {
            let s = cmd_gen_dataset(
                &cfg,
                per_class.unwrap_or(cfg.dataset.per_class),
                sigma.unwrap_or(cfg.dataset.sigma),
                seed,
                &out,
            )?;
            for (c, n) in s.class_counts.iter().enumerate() {
                println!("class {c}: {n}");
            }
            println!("wrote {} and {}", s.log.display(), s.labels.display());
        }
        Command::Train {
            dataset,
            labels,
            split,
            model,
        } => {
            let labels = labels
                .clone()
                .unwrap_or_else(|| dataset.with_file_name("labels.csv"));
            let data = load_dataset(dataset, &labels)?;
            let fraction = split.unwrap_or(cfg.dataset.train_fraction);
            let s = cmd_train(&cfg, &data, fraction, seed)?;
            let model_path = model.clone().unwrap_or_else(|| out.join("model.svm"));
            save_model(&s.model, &model_path)?;
            println!("trained on {} records, held out {}", s.n_train, s.n_test);
            match s.accuracy {
                Some(a) => println!("held-out accuracy: {a:.4}"),
                None => eprintln!("warning: no held-out evaluation (split uses every record for training)"),
            }
            println!("wrote {}", model_path.display());
        }
        Command::Run {
            manifest,
            save_inputs,
        } => {
            let s = cmd_run(manifest, cli.out.as_deref(), seed, cli.jobs, *save_inputs)?;
            println!("{} trials written to {}", s.rows.len(), s.dir.display());
        }
        Command::Replay {
            log,
            interface,
            pilot,
            model,
        } => {
            let frames = load_input_log(log, *interface)?;
            let model = model.as_deref().map(load_model).transpose()?.map(Arc::new);
            let spec = TrialSpec::new(&cfg, *interface, pilot, seed)?;
            let spec = match &cli.config {
                Some(p) => spec.named(&p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()),
                None => spec,
            };
            let r = replay(&cfg, &spec, model, &frames)?;
            if r.truncated {
                eprintln!(
                    "warning: log ended after {} frames; trial truncated at t = {} s",
                    frames.len(),
                    r.record.rows.last().map_or(0.0, |row| row.t)
                );
            }
            let stem = log
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "replay".into());
            write_atomic(&out.join(format!("{stem}-replay.csv")), r.record.to_csv().as_bytes())?;
            let rows = vec![metrics_row(stem.clone(), &r.record)?];
            write_atomic(&out.join(format!("{stem}-replay-metrics.csv")), metrics_csv(&rows).as_bytes())?;
            print!("{}", metrics_csv(&rows));
        }
        Command::Report { records } => {
            let rows = cmd_report(records)?;
            match &cli.out {
                Some(dir) => {
                    write_atomic(&dir.join("metrics.csv"), metrics_csv(&rows).as_bytes())?;
                    write_atomic(&dir.join("aggregate.csv"), aggregate_csv(&rows).as_bytes())?;
                    println!("{} records reported into {}", rows.len(), dir.display());
                }
                None => {
                    print!("{}", metrics_csv(&rows));
                    println!();
                    print!("{}", aggregate_csv(&rows));
                }
            }
        }
    }
    Ok(())
}

/// Saves a model with the same atomic write the CLI uses.
pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<(), CliError> {
    let mut buf = Vec::new();
    model.save(&mut buf).map_err(|e| io_err(path, e))?;
    write_atomic(path, &buf)
}
