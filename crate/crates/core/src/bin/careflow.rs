use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use careflow::dream::{build_dataset, estimate_decay_params, DecayParams};
use careflow::eventlog::{
    filter_cohort, read_event_sequences, split_cohort, write_demographics_csv, write_events_csv,
};
use careflow::explain::GroupAssignment;
use careflow::model::TrainConfig;
use careflow::petrinet::to_dot;
use careflow::pipeline::{
    self, evaluate_dataset, explain_dataset, load_weights, read_dataset, read_log, read_net,
    save_dataset, save_weights, write_json, write_text, DatasetMeta, PipelineError, RunConfig,
    Stage,
};
use careflow::synthcohort::{self, CohortConfig};
use careflow::{discovery, petrinet};

#[derive(Parser)]
#[command(
    name = "careflow",
    version,
    about = "Process-mining mortality prediction for ICU careflows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an event log and report cohort statistics.
    Validate {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long, default_value_t = 24.0)]
        cutoff_hours: f64,
    },
    /// Generate a synthetic cohort.
    Synth {
        #[arg(long, default_value_t = 1017)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        signal: f64,
        #[arg(long, default_value_t = 0.17)]
        death_rate: f64,
        /// Patients planted to fail the cohort filter.
        #[arg(long, default_value_t = 0)]
        violations: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Filter the cohort and split it into train, validation and test logs.
    Split {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 24.0)]
        cutoff_hours: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Discover a Petri net from the directly-follows graph of a log.
    Discover {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a log on a net and write the timed state sample dataset.
    Enhance {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        demo: PathBuf,
        #[arg(long, default_value_t = 24.0)]
        cutoff_hours: f64,
        /// Reuse the decay parameters of an earlier dataset's sidecar
        /// instead of estimating them from this log.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the network on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        validation: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        class_weighting: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset and write AUC, DeLong interval and confusion counts.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact Shapley attribution over feature groups.
    Explain {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Group assignment JSON, or a dataset sidecar containing one.
        #[arg(long)]
        groups: PathBuf,
        /// Dataset whose column means serve as the masking baseline;
        /// defaults to `--data`.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a PNML net as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        demo: Option<PathBuf>,
    },
}

fn sidecar_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn read_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    stage: &'static str,
) -> pipeline::Result<T> {
    let f = File::open(path)
        .map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).stage(stage)
}

fn execute(command: Command) -> pipeline::Result<()> {
    match command {
        Command::Validate {
            events,
            demo,
            cutoff_hours,
        } => {
            let log = read_log(&events, &demo)?;
            let kept = filter_cohort(&log, cutoff_hours);
            let deaths = log
                .traces()
                .iter()
                .filter(|t| t.outcome.label() == 1)
                .count();
            println!(
                "{} traces, {} distinct events, {} deaths; {} pass the cohort filter",
                log.len(),
                log.vocabulary().len(),
                deaths,
                kept.len()
            );
        }
        Command::Synth {
            n,
            seed,
            signal,
            death_rate,
            violations,
            out_dir,
        } => {
            let cfg = CohortConfig {
                n_patients: n,
                seed,
                signal_strength: signal,
                death_rate,
                planted_violations: violations,
                ..CohortConfig::default()
            };
            let log = synthcohort::generate(&cfg).map_err(|e| match e {
                synthcohort::SynthError::Config(m) => PipelineError::config("synth", m),
                other => PipelineError::data("synth", other),
            })?;
            synthcohort::write_cohort(&log, &out_dir)
                .map_err(|e| PipelineError::data("synth", e))?;
            log::info!(
                "synth: {} patients written to {}",
                log.len(),
                out_dir.display()
            );
        }
        Command::Split {
            events,
            demo,
            seed,
            cutoff_hours,
            out_dir,
        } => {
            let log = filter_cohort(&read_log(&events, &demo)?, cutoff_hours);
            let split = split_cohort(&log, seed).stage("split")?;
            fs::create_dir_all(&out_dir).stage("split")?;
            for (name, part) in [
                ("train", &split.train),
                ("validation", &split.validation),
                ("test", &split.test),
            ] {
                let e = File::create(out_dir.join(format!("{name}_events.csv"))).stage("split")?;
                write_events_csv(part, e).stage("split")?;
                let d = File::create(out_dir.join(format!("{name}_demographics.csv")))
                    .stage("split")?;
                write_demographics_csv(part, d).stage("split")?;
            }
            log::info!(
                "split: train {}, validation {}, test {}",
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
        }
        Command::Discover {
            events,
            threshold,
            out,
        } => {
            let f = File::open(&events).map_err(|e| {
                PipelineError::data("discover", format!("{}: {e}", events.display()))
            })?;
            let sequences = read_event_sequences(BufReader::new(f)).stage("discover")?;
            let dfg = discovery::DirectlyFollowsGraph::from_sequences(
                sequences.iter().map(|(_, instances)| instances.as_slice()),
            )
            .stage("discover")?;
            let net = discovery::dfg_to_petrinet(&dfg, threshold).stage("discover")?;
            write_text(&out, &petrinet::to_pnml(&net), "discover")?;
            log::info!("discover: {net}");
        }
        Command::Enhance {
            net,
            events,
            demo,
            cutoff_hours,
            params,
            out,
        } => {
            let net = read_net(&net)?;
            let log = read_log(&events, &demo)?;
            let decay: DecayParams<f64> = match params {
                Some(p) => read_json::<DatasetMeta>(&p, "enhance")?.decay,
                None => estimate_decay_params(&net, &log).stage("enhance")?,
            };
            let ds = build_dataset(&net, &decay, &log, cutoff_hours).stage("enhance")?;
            save_dataset(&out, &ds, "enhance")?;
            write_json(
                &sidecar_path(&out),
                &DatasetMeta::new(&net, decay, cutoff_hours)?,
                "enhance",
            )?;
            log::info!("enhance: {} rows of width {}", ds.len(), ds.width());
        }
        Command::Train {
            data,
            validation,
            config,
            seed,
            class_weighting,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| {
                        PipelineError::config("train", format!("{}: {e}", path.display()))
                    })?;
                    TrainConfig::from_kv(&text).map_err(|e| PipelineError::config("train", e))?
                }
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.class_weighting |= class_weighting;
            let train_set = read_dataset(&data)?;
            let validation = read_dataset(&validation)?;
            let outcome = careflow::model::train(&train_set, &validation, &cfg).stage("train")?;
            save_weights(&out, &outcome.weights, "train")?;
            log::info!(
                "train: best validation AUC {:.3} at epoch {}",
                outcome.history[outcome.best_epoch].validation_auc,
                outcome.best_epoch
            );
        }
        Command::Evaluate {
            weights,
            data,
            threshold,
            level,
            out,
        } => {
            let w = load_weights(&weights)?;
            let report = evaluate_dataset(&w, &read_dataset(&data)?, threshold, level)?;
            write_json(&out, &report, "evaluate")?;
            println!("{report}");
        }
        Command::Explain {
            weights,
            data,
            groups,
            baseline,
            out,
        } => {
            let w = load_weights(&weights)?;
            let ds = read_dataset(&data)?;
            let value: serde_json::Value = read_json(&groups, "explain")?;
            let assignment_value = if value.get("width").is_some() {
                value
            } else {
                value
                    .get("groups")
                    .cloned()
                    .unwrap_or(serde_json::Value::Null)
            };
            let assignment: GroupAssignment =
                serde_json::from_value(assignment_value).stage("explain")?;
            let means = match baseline {
                Some(p) => read_dataset(&p)?.column_means(),
                None => ds.column_means(),
            };
            let report = explain_dataset(&w, &ds, &means, &assignment)?;
            write_json(&out, &report, "explain")?;
            println!("{}", report.ranking.join(" > "));
        }
        Command::ExportDot { net, out } => {
            let net = read_net(&net)?;
            write_text(
                &out,
                &to_dot(&net, Some(net.initial_marking())),
                "export-dot",
            )?;
        }
        Command::Run {
            config,
            seed,
            out_dir,
            events,
            demo,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            let cwd = Path::new(".");
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = cwd.join(d);
            }
            if let Some(e) = events {
                cfg.events = Some(cwd.join(e));
            }
            if let Some(d) = demo {
                cfg.demographics = Some(cwd.join(d));
            }
            let summary = pipeline::run_pipeline(&cfg)?;
            println!("{}", summary.report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
