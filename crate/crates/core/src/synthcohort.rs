//! Seeded synthetic ICU cohorts over the careflow vocabulary.
//!
//! Each patient gets an admission event, one to three consecutive care-unit
//! stays, a Poisson stream of lab events and a final DEATH or DISCH. The
//! death probability is `logistic(base + signal_strength · risk)` with
//!
//! ```text
//! risk = 0.22 · (abnormal labs in the first 24 h) + 0.05 · (age − 60) / 10
//! ```
//!
//! and `base` chosen by bisection so the cohort's mean death probability
//! equals `death_rate`. Lab abnormality is driven by a per-patient rate, so
//! the signal reaches a model only through which lab events occurred. Labs
//! are drawn `EARLY_LAB_FACTOR` times more often in the first 24 h, which is
//! the window the classifier sees.
//!
//! Exit events are placed at least 25 h after admission. Planted
//! violations (age 17, no prior admission, death before 24 h) cycle in that
//! order and are spread evenly over the cohort; `filter_cohort` removes
//! exactly them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eventlog::{
    parse_timestamp, write_demographics_csv, write_events_csv, Demographics, EventInstance,
    EventLog, Insurance, LogError, Outcome, Timestamp, Trace, MS_PER_HOUR,
};
use crate::vocabulary::{self, ADMISSION_EVENTS, CARE_UNITS, LAB_ITEMS};

pub const RISK_PER_ABNORMAL_LAB: f64 = 0.22;
pub const RISK_PER_DECADE: f64 = 0.05;
/// Abnormal labs count towards risk only inside this window after admission.
pub const RISK_WINDOW_HOURS: f64 = 24.0;
pub const MIN_STAY_HOURS: f64 = 25.0;
/// Labs are drawn this many times more often during the first 24 h.
pub const EARLY_LAB_FACTOR: f64 = 8.0;

pub const EVENTS_FILE: &str = "events.csv";
pub const DEMOGRAPHICS_FILE: &str = "demographics.csv";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort config: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub seed: u64,
    pub death_rate: f64,
    pub signal_strength: f64,
    pub mean_events_per_patient: usize,
    pub horizon_hours: f64,
    /// Patients that `filter_cohort` must drop; counted within `n_patients`.
    pub planted_violations: usize,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_patients: 1017,
            seed: 0,
            death_rate: 0.17,
            signal_strength: 2.0,
            mean_events_per_patient: 40,
            horizon_hours: 240.0,
            planted_violations: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.into()));
        if self.n_patients < 10 {
            return bad("n_patients must be at least 10");
        }
        if !(self.death_rate > 0.0 && self.death_rate < 1.0) {
            return bad("death_rate must lie in (0, 1)");
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return bad("signal_strength must be finite and non-negative");
        }
        if self.mean_events_per_patient < 10 {
            return bad("mean_events_per_patient must be at least 10");
        }
        if !(self.horizon_hours >= 2.0 * MIN_STAY_HOURS && self.horizon_hours.is_finite()) {
            return bad("horizon_hours must be at least 50");
        }
        if self.planted_violations > self.n_patients {
            return bad("planted_violations exceeds n_patients");
        }
        Ok(())
    }

    /// Base lab rate; the first 24 h run at `EARLY_LAB_FACTOR` times it.
    fn lab_rate_per_hour(&self) -> f64 {
        // admission, two stays on average, exit
        let fixed = 6.0;
        let mean_stay = (MIN_STAY_HOURS + 1.0 + self.horizon_hours) / 2.0;
        let weighted_hours = mean_stay + (EARLY_LAB_FACTOR - 1.0) * RISK_WINDOW_HOURS;
        (self.mean_events_per_patient as f64 - fixed).max(1.0) / weighted_hours
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Violation {
    Minor,
    NoPriorAdmission,
    EarlyDeath,
}

/// Patient state before the outcome is drawn.
struct Draft {
    rng: ChaCha8Rng,
    case_id: String,
    admit: Timestamp,
    demographics: Demographics,
    prior_admissions: u32,
    events: Vec<EventInstance>,
    stay_end: Timestamp,
    risk: f64,
    violation: Option<Violation>,
}

fn hours(h: f64) -> i64 {
    (h * MS_PER_HOUR as f64).round() as i64
}

fn violation_for(i: usize, cfg: &CohortConfig) -> Option<Violation> {
    let (n, k) = (cfg.n_patients, cfg.planted_violations);
    // patient i is planted when the running quota k·i/n steps up
    let before = i * k / n;
    let after = (i + 1) * k / n;
    (after > before).then_some(match before % 3 {
        0 => Violation::Minor,
        1 => Violation::NoPriorAdmission,
        _ => Violation::EarlyDeath,
    })
}

fn draft_patient(i: usize, cfg: &CohortConfig, epoch: Timestamp) -> Draft {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    let violation = violation_for(i, cfg);

    let admit = epoch + rng.gen_range(0..hours(24.0 * 365.0));
    let age = match violation {
        Some(Violation::Minor) => 17,
        _ => rng.gen_range(20..=89),
    };
    let insurance = Insurance::ALL[rng.gen_range(0..Insurance::ALL.len())];
    let prior_admissions = match violation {
        Some(Violation::NoPriorAdmission) => 0,
        _ => rng.gen_range(1..=4),
    };
    let stay_hours = match violation {
        Some(Violation::EarlyDeath) => rng.gen_range(6.0..20.0),
        _ => rng.gen_range(MIN_STAY_HOURS + 1.0..cfg.horizon_hours),
    };
    let stay_end = admit + hours(stay_hours);

    let mut events = vec![EventInstance::new(
        ADMISSION_EVENTS[rng.gen_range(0..ADMISSION_EVENTS.len())],
        admit,
    )];

    // consecutive care-unit stays between first entry and shortly before exit
    let n_units = rng.gen_range(1..=3);
    let mut units: Vec<&str> = CARE_UNITS.to_vec();
    for k in 0..n_units {
        let j = rng.gen_range(k..units.len());
        units.swap(k, j);
    }
    let icu_start = rng.gen_range(0.2..1.5);
    let icu_end = stay_hours - rng.gen_range(0.5..3.0);
    let span = (icu_end - icu_start) / n_units as f64;
    for (k, unit) in units[..n_units].iter().enumerate() {
        let t_in = icu_start + k as f64 * span + rng.gen_range(0.0..0.1) * span;
        let t_out = icu_start + (k + 1) as f64 * span - rng.gen_range(0.0..0.1) * span;
        events.push(EventInstance::new(
            vocabulary::care_unit_in(unit),
            admit + hours(t_in),
        ));
        events.push(EventInstance::new(
            vocabulary::care_unit_out(unit),
            admit + hours(t_out),
        ));
    }

    // labs as a Poisson process strictly inside the stay
    let abnormal_rate = rng.gen_range(0.05..0.65);
    let rate = cfg.lab_rate_per_hour();
    let mut abnormal_in_window = 0u32;
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let r = if t < RISK_WINDOW_HOURS {
            EARLY_LAB_FACTOR * rate
        } else {
            rate
        };
        t += -u.ln() / r;
        if t >= stay_hours - 0.25 {
            break;
        }
        let item = LAB_ITEMS[rng.gen_range(0..LAB_ITEMS.len())];
        let abnormal = rng.gen_bool(abnormal_rate);
        if abnormal && t <= RISK_WINDOW_HOURS {
            abnormal_in_window += 1;
        }
        events.push(EventInstance::new(
            vocabulary::lab_event(item, abnormal),
            admit + hours(t),
        ));
    }
    events.sort_by_key(|e| e.timestamp);
    for k in 1..events.len() {
        if events[k].timestamp <= events[k - 1].timestamp {
            events[k].timestamp = events[k - 1].timestamp + 1;
        }
    }

    let risk = RISK_PER_ABNORMAL_LAB * f64::from(abnormal_in_window)
        + RISK_PER_DECADE * (f64::from(age) - 60.0) / 10.0;
    Draft {
        rng,
        case_id: format!("P{:05}", i + 1),
        admit,
        demographics: Demographics { age, insurance },
        prior_admissions,
        stay_end: stay_end.max(events.last().map_or(admit, |e| e.timestamp) + 60_000),
        events,
        risk,
        violation,
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intercept that makes the mean death probability equal `rate`.
fn calibrate_base(scaled_risks: &[f64], rate: f64) -> f64 {
    let mean = |b: f64| {
        scaled_risks.iter().map(|r| logistic(b + r)).sum::<f64>() / scaled_risks.len() as f64
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn generate(cfg: &CohortConfig) -> Result<EventLog, SynthError> {
    cfg.validate()?;
    let epoch = parse_timestamp("2150-01-01T00:00:00.000Z").expect("valid literal");
    let drafts: Vec<Draft> = (0..cfg.n_patients)
        .map(|i| draft_patient(i, cfg, epoch))
        .collect();
    let scaled: Vec<f64> = drafts
        .iter()
        .map(|d| cfg.signal_strength * d.risk)
        .collect();
    let base = calibrate_base(&scaled, cfg.death_rate);

    let traces = drafts
        .into_iter()
        .zip(scaled)
        .map(|(mut d, r)| {
            let outcome = if d.violation == Some(Violation::EarlyDeath)
                || d.rng.gen_bool(logistic(base + r))
            {
                Outcome::Died
            } else {
                Outcome::Discharged
            };
            d.events
                .push(EventInstance::new(outcome.exit_event(), d.stay_end));
            Trace {
                case_id: d.case_id,
                instances: d.events,
                demographics: d.demographics,
                outcome,
                admit_timestamp: d.admit,
                prior_admissions: d.prior_admissions,
            }
        })
        .collect();
    Ok(EventLog::from_traces(traces)?)
}

/// Writes `events.csv` and `demographics.csv` into `dir`.
pub fn write_cohort(log: &EventLog, dir: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir)?;
    write_events_csv(log, std::fs::File::create(dir.join(EVENTS_FILE))?)?;
    write_demographics_csv(log, std::fs::File::create(dir.join(DEMOGRAPHICS_FILE))?)?;
    Ok(())
}
