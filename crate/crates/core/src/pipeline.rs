//! End-to-end run: validate → filter → split → discover → estimate decay →
//! enhance → train → evaluate → explain, writing every artifact into one
//! output directory.
//!
//! Run configs use the `key = value` format. Keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `events`, `demographics` | input CSVs (required) | |
//! | `net` | PNML to use instead of discovery | discover |
//! | `out_dir` | artifact directory | `careflow-run` |
//! | `seed` | split, initialization, shuffling and dropout seed | 0 |
//! | `cutoff_hours` | prediction cutoff after admission | 24 |
//! | `edge_threshold` | relative DFG edge filter | 0 |
//! | `ci_level` | DeLong interval level | 0.95 |
//! | `threshold` | decision threshold for the confusion counts | 0.5 |
//!
//! plus the training keys of [`TrainConfig`] other than `seed`. Relative
//! paths are resolved against the config file's directory.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::kv_pairs;
use crate::discovery::{build_dfg, dfg_to_petrinet, DiscoveryError};
use crate::dream::{build_dataset, estimate_decay_params, DecayParams, DreamError};
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::eventlog::{filter_cohort, parse_event_log, split_cohort, EventLog, LogError};
use crate::explain::{
    assign_groups, explain_network, ExplainError, ExplainReport, GroupAssignment,
};
use crate::model::{
    predict_proba, read_weights, train, write_dataset_csv, write_weights, ModelError,
    NetworkWeights, PredictionDataset, TrainConfig, DEMOGRAPHIC_WIDTH,
};
use crate::petrinet::{parse_pnml, place_provenance, to_dot, to_pnml, NetError, PetriNet};

pub const NET_FILE: &str = "net.pnml";
pub const DOT_FILE: &str = "net.dot";
pub const TRAIN_FILE: &str = "train.csv";
pub const VALIDATION_FILE: &str = "validation.csv";
pub const TEST_FILE: &str = "test.csv";
pub const META_FILE: &str = "dataset.meta.json";
pub const WEIGHTS_FILE: &str = "weights.txt";
pub const HISTORY_FILE: &str = "history.json";
pub const REPORT_FILE: &str = "report.json";
pub const SHAP_FILE: &str = "shap.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.cfg";

/// Process exit status for each failure category.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: &'static str, kind: ErrorKind, message: impl fmt::Display) -> Self {
        Self {
            stage,
            kind,
            message: message.to_string(),
        }
    }

    pub fn config(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::new(stage, ErrorKind::Config, message)
    }

    pub fn data(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::new(stage, ErrorKind::Data, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Attaches a stage name and category to module errors.
pub trait StageError {
    fn kind(&self) -> ErrorKind;
}

impl StageError for LogError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl StageError for NetError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl StageError for DiscoveryError {
    fn kind(&self) -> ErrorKind {
        match self {
            DiscoveryError::InvalidThreshold(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl StageError for DreamError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl StageError for ModelError {
    fn kind(&self) -> ErrorKind {
        match self {
            ModelError::NonFinite { .. } => ErrorKind::Numeric,
            ModelError::Config(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl StageError for EvalError {
    fn kind(&self) -> ErrorKind {
        match self {
            EvalError::NonFinite(_) => ErrorKind::Numeric,
            EvalError::Level(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }
}

impl StageError for ExplainError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl StageError for std::io::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl StageError for serde_json::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

pub trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T, E: StageError + fmt::Display> Stage<T> for std::result::Result<T, E> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| PipelineError::new(name, e.kind(), e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub events: Option<PathBuf>,
    pub demographics: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub cutoff_hours: f64,
    pub edge_threshold: f64,
    pub ci_level: f64,
    pub threshold: f64,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            events: None,
            demographics: None,
            net: None,
            out_dir: PathBuf::from("careflow-run"),
            seed: 0,
            cutoff_hours: 24.0,
            edge_threshold: 0.0,
            ci_level: 0.95,
            threshold: 0.5,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config; relative paths are joined onto `base`.
    pub fn from_kv(text: &str, base: &Path) -> Result<Self> {
        let err = |line: usize, reason: String| {
            PipelineError::config("config", format!("line {line}: {reason}"))
        };
        let mut cfg = RunConfig::default();
        for (line, key, value) in kv_pairs(text).map_err(|(l, r)| err(l, r))? {
            cfg.set(&key, &value, base).map_err(|r| err(line, r))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_kv(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Sets one key; also used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> std::result::Result<(), String> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<V, String> {
            value
                .parse()
                .map_err(|_| format!("`{value}` is not a valid value for {key}"))
        }
        let path = |v: &str| base.join(v);
        match key {
            "events" => self.events = Some(path(value)),
            "demographics" => self.demographics = Some(path(value)),
            "net" => self.net = Some(path(value)),
            "out_dir" => self.out_dir = path(value),
            "seed" => self.seed = num(key, value)?,
            "cutoff_hours" => self.cutoff_hours = num(key, value)?,
            "edge_threshold" => self.edge_threshold = num(key, value)?,
            "ci_level" => self.ci_level = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            _ => {
                if !self.train.set(key, value)? {
                    return Err(format!("unknown key `{key}`"));
                }
            }
        }
        Ok(())
    }

    /// Checks values and that every input path exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::config("config", m));
        let events = match &self.events {
            Some(p) => p,
            None => return bad("`events` is not set".into()),
        };
        let demographics = match &self.demographics {
            Some(p) => p,
            None => return bad("`demographics` is not set".into()),
        };
        for p in [Some(events), Some(demographics), self.net.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return bad(format!("input {} does not exist", p.display()));
            }
        }
        if !(self.cutoff_hours >= 0.0 && self.cutoff_hours.is_finite()) {
            return bad("cutoff_hours must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return bad("edge_threshold must lie in [0, 1]".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad("ci_level must lie in (0, 1)".into());
        }
        self.training().validate().stage("config")
    }

    /// Training settings with the run seed applied.
    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    /// Every setting with absolute paths, in config syntax.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        for (k, p) in [
            ("events", &self.events),
            ("demographics", &self.demographics),
            ("net", &self.net),
        ] {
            if let Some(p) = p {
                line(k, p.display().to_string());
            }
        }
        line("out_dir", self.out_dir.display().to_string());
        line("seed", self.seed.to_string());
        line("cutoff_hours", self.cutoff_hours.to_string());
        line("edge_threshold", self.edge_threshold.to_string());
        line("ci_level", self.ci_level.to_string());
        line("threshold", self.threshold.to_string());
        for l in self
            .train
            .to_kv()
            .lines()
            .filter(|l| !l.starts_with("seed "))
        {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}

/// Sidecar written next to the dataset CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub cutoff_hours: f64,
    pub decay: DecayParams<f64>,
    /// Visible labels adjacent to each place, in place order.
    pub provenance: Vec<Vec<String>>,
    pub groups: GroupAssignment,
}

impl DatasetMeta {
    pub fn new(net: &PetriNet, decay: DecayParams<f64>, cutoff_hours: f64) -> Result<Self> {
        let provenance = place_provenance(net);
        let groups = assign_groups(net, &provenance, DEMOGRAPHIC_WIDTH).stage("enhance")?;
        Ok(Self {
            cutoff_hours,
            decay,
            provenance,
            groups,
        })
    }
}

pub fn read_net(path: &Path) -> Result<PetriNet> {
    let text = fs::read_to_string(path).stage("read net")?;
    parse_pnml(&text).stage("read net")
}

pub fn read_log(events: &Path, demographics: &Path) -> Result<EventLog> {
    let e = File::open(events)
        .map_err(|err| PipelineError::data("validate", format!("{}: {err}", events.display())))?;
    let d = File::open(demographics).map_err(|err| {
        PipelineError::data("validate", format!("{}: {err}", demographics.display()))
    })?;
    parse_event_log(BufReader::new(e), BufReader::new(d)).stage("validate")
}

pub fn read_dataset(path: &Path) -> Result<PredictionDataset<f64>> {
    let f = File::open(path)
        .map_err(|e| PipelineError::data("read dataset", format!("{}: {e}", path.display())))?;
    crate::model::read_dataset_csv(BufReader::new(f)).stage("read dataset")
}

pub fn load_weights(path: &Path) -> Result<NetworkWeights<f64>> {
    let f = File::open(path)
        .map_err(|e| PipelineError::data("read weights", format!("{}: {e}", path.display())))?;
    read_weights(BufReader::new(f)).stage("read weights")
}

pub fn write_text(path: &Path, text: &str, stage: &'static str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).stage(stage)?;
    text.push('\n');
    write_text(path, &text, stage)
}

pub fn save_dataset(path: &Path, ds: &PredictionDataset<f64>, stage: &'static str) -> Result<()> {
    let f = File::create(path)
        .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
    write_dataset_csv(ds, BufWriter::new(f)).stage(stage)
}

pub fn save_weights(path: &Path, w: &NetworkWeights<f64>, stage: &'static str) -> Result<()> {
    let f = File::create(path)
        .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(f);
    write_weights(w, &mut out).stage(stage)?;
    out.flush().stage(stage)
}

pub fn discover_net(log: &EventLog, edge_threshold: f64) -> Result<PetriNet> {
    let dfg = build_dfg(log).stage("discover")?;
    dfg_to_petrinet(&dfg, edge_threshold).stage("discover")
}

pub fn evaluate_dataset(
    weights: &NetworkWeights<f64>,
    data: &PredictionDataset<f64>,
    threshold: f64,
    level: f64,
) -> Result<EvalReport> {
    let scores = predict_proba(weights, data).stage("evaluate")?;
    evaluate(&scores, data.labels(), threshold, level).stage("evaluate")
}

pub fn explain_dataset(
    weights: &NetworkWeights<f64>,
    data: &PredictionDataset<f64>,
    baseline: &[f64],
    groups: &GroupAssignment,
) -> Result<ExplainReport> {
    Ok(explain_network(weights, data, baseline, groups)
        .stage("explain")?
        .into())
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub report: EvalReport,
    pub explanation: ExplainReport,
    pub best_epoch: usize,
    pub artifacts: Vec<PathBuf>,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let (events, demographics) = (
        cfg.events.as_deref().expect("validated"),
        cfg.demographics.as_deref().expect("validated"),
    );
    let log = read_log(events, demographics)?;
    log::info!(
        "validate: {} traces, {} distinct events",
        log.len(),
        log.vocabulary().len()
    );

    let cohort = filter_cohort(&log, cfg.cutoff_hours);
    log::info!(
        "filter: kept {} of {} traces at {} h cutoff",
        cohort.len(),
        log.len(),
        cfg.cutoff_hours
    );

    let split = split_cohort(&cohort, cfg.seed).stage("split")?;
    log::info!(
        "split: train {}, validation {}, test {} (seed {})",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        cfg.seed
    );

    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| PipelineError::data("output", format!("{}: {e}", cfg.out_dir.display())))?;
    let out = |name: &str| cfg.out_dir.join(name);
    let mut artifacts = Vec::new();
    write_text(&out(RESOLVED_CONFIG_FILE), &cfg.to_kv(), "output")?;
    artifacts.push(out(RESOLVED_CONFIG_FILE));

    let net = match &cfg.net {
        Some(path) => read_net(path)?,
        None => discover_net(&split.train, cfg.edge_threshold)?,
    };
    write_text(&out(NET_FILE), &to_pnml(&net), "discover")?;
    write_text(
        &out(DOT_FILE),
        &to_dot(&net, Some(net.initial_marking())),
        "discover",
    )?;
    artifacts.extend([out(NET_FILE), out(DOT_FILE)]);
    log::info!("discover: {net}");

    let decay: DecayParams<f64> =
        estimate_decay_params(&net, &split.train).stage("estimate decay")?;
    let decaying = decay.delta.iter().filter(|&&d| d > 0.0).count();
    log::info!("estimate decay: {decaying} of {} places decay", decay.len());

    let meta = DatasetMeta::new(&net, decay, cfg.cutoff_hours)?;
    let mut sets = Vec::with_capacity(3);
    for (name, part) in [
        (TRAIN_FILE, &split.train),
        (VALIDATION_FILE, &split.validation),
        (TEST_FILE, &split.test),
    ] {
        let ds = build_dataset(&net, &meta.decay, part, cfg.cutoff_hours).stage("enhance")?;
        save_dataset(&out(name), &ds, "enhance")?;
        artifacts.push(out(name));
        sets.push(ds);
    }
    write_json(&out(META_FILE), &meta, "enhance")?;
    artifacts.push(out(META_FILE));
    let test = sets.pop().expect("three sets");
    let validation = sets.pop().expect("three sets");
    let train_set = sets.pop().expect("three sets");
    log::info!(
        "enhance: {} columns per row, {} + {} + {} rows",
        train_set.width(),
        train_set.len(),
        validation.len(),
        test.len()
    );

    let outcome = train(&train_set, &validation, &cfg.training()).stage("train")?;
    save_weights(&out(WEIGHTS_FILE), &outcome.weights, "train")?;
    write_json(&out(HISTORY_FILE), &outcome.history, "train")?;
    artifacts.extend([out(WEIGHTS_FILE), out(HISTORY_FILE)]);
    log::info!(
        "train: best validation AUC {:.3} at epoch {} of {}",
        outcome.history[outcome.best_epoch].validation_auc,
        outcome.best_epoch,
        cfg.train.epochs
    );

    let report = evaluate_dataset(&outcome.weights, &test, cfg.threshold, cfg.ci_level)?;
    write_json(&out(REPORT_FILE), &report, "evaluate")?;
    artifacts.push(out(REPORT_FILE));
    log::info!("evaluate: {report} on {} test patients", report.n);

    let explanation = explain_dataset(
        &outcome.weights,
        &test,
        &train_set.column_means(),
        &meta.groups,
    )?;
    write_json(&out(SHAP_FILE), &explanation, "explain")?;
    artifacts.push(out(SHAP_FILE));
    log::info!("explain: ranking {}", explanation.ranking.join(" > "));

    Ok(RunSummary {
        out_dir: cfg.out_dir.clone(),
        report,
        explanation,
        best_epoch: outcome.best_epoch,
        artifacts,
    })
}
