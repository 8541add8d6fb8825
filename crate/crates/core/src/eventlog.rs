//! Patient event logs: parsing, validation, cohort filtering and splitting.
//!
//! Two CSV files describe a log. The events file has header
//! `case_id,event,timestamp` with ISO-8601 UTC timestamps at millisecond
//! precision (`2130-01-01T08:30:00.000Z`). The demographics file has header
//! `case_id,age,insurance,admit_timestamp,prior_admissions,outcome`, where
//! `outcome` is `1` for death and `0` for discharge.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vocabulary::{self, DEATH, DISCHARGE};

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

pub const MS_PER_HOUR: i64 = 3_600_000;

pub const EVENTS_HEADER: [&str; 3] = ["case_id", "event", "timestamp"];
pub const DEMOGRAPHICS_HEADER: [&str; 6] = [
    "case_id",
    "age",
    "insurance",
    "admit_timestamp",
    "prior_admissions",
    "outcome",
];

#[derive(Debug, Error)]
pub enum LogError {
    #[error("{file}:{line}: malformed row: {reason}")]
    Malformed {
        file: &'static str,
        line: u64,
        reason: String,
    },
    #[error("{file}: bad header, expected `{expected}`")]
    Header {
        file: &'static str,
        expected: String,
    },
    #[error("case {case_id}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { case_id: String, timestamp: String },
    #[error("demographics:{line}: unknown insurance category `{value}`")]
    UnknownInsurance { line: u64, value: String },
    #[error("case {case_id}: missing demographics")]
    MissingDemographics { case_id: String },
    #[error("case {case_id}: demographics row without events")]
    NoEvents { case_id: String },
    #[error("case {case_id}: duplicate demographics row")]
    DuplicateCase { case_id: String },
    #[error("case {case_id}: {reason}")]
    InvalidTrace { case_id: String, reason: String },
    #[error("event `{event}` of case {case_id} is not in the vocabulary")]
    OutOfVocabulary { case_id: String, event: String },
    #[error("too few traces to split: {0} (need at least 5)")]
    TooFewTraces(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = LogError> = std::result::Result<T, E>;

/// Formats a timestamp as `YYYY-MM-DDTHH:MM:SS.mmmZ`.
pub fn format_timestamp(ts: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp_millis(ts) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ts.to_string(),
    }
}

/// Parses an RFC 3339 timestamp. Sub-millisecond digits must be zero.
pub fn parse_timestamp(s: &str) -> std::result::Result<Timestamp, String> {
    let dt = DateTime::parse_from_rfc3339(s.trim()).map_err(|e| format!("timestamp `{s}`: {e}"))?;
    if dt.timestamp_subsec_nanos() % 1_000_000 != 0 {
        return Err(format!("timestamp `{s}` has sub-millisecond precision"));
    }
    Ok(dt.timestamp_millis())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Insurance {
    Medicaid,
    Medicare,
    Private,
    SelfPay,
    Government,
}

impl Insurance {
    pub const ALL: [Insurance; 5] = [
        Insurance::Medicaid,
        Insurance::Medicare,
        Insurance::Private,
        Insurance::SelfPay,
        Insurance::Government,
    ];

    /// Position in the one-hot demographic encoding.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Insurance::Medicaid => "Medicaid",
            Insurance::Medicare => "Medicare",
            Insurance::Private => "Private",
            Insurance::SelfPay => "SelfPay",
            Insurance::Government => "Government",
        }
    }
}

impl fmt::Display for Insurance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Insurance {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim() {
            "Medicaid" => Ok(Insurance::Medicaid),
            "Medicare" => Ok(Insurance::Medicare),
            "Private" => Ok(Insurance::Private),
            "SelfPay" | "Self Pay" => Ok(Insurance::SelfPay),
            "Government" => Ok(Insurance::Government),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Discharged,
    Died,
}

impl Outcome {
    pub fn label(self) -> u8 {
        match self {
            Outcome::Discharged => 0,
            Outcome::Died => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Outcome::Discharged),
            1 => Some(Outcome::Died),
            _ => None,
        }
    }

    pub fn exit_event(self) -> &'static str {
        match self {
            Outcome::Discharged => DISCHARGE,
            Outcome::Died => DEATH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventInstance {
    pub event: String,
    pub timestamp: Timestamp,
}

impl EventInstance {
    pub fn new(event: impl Into<String>, timestamp: Timestamp) -> Self {
        Self {
            event: event.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: u32,
    pub insurance: Insurance,
}

/// One patient's careflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case_id: String,
    pub instances: Vec<EventInstance>,
    pub demographics: Demographics,
    pub outcome: Outcome,
    pub admit_timestamp: Timestamp,
    pub prior_admissions: u32,
}

impl Trace {
    /// Checks strictly increasing timestamps and a single trailing exit
    /// event consistent with the outcome.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| LogError::InvalidTrace {
            case_id: self.case_id.clone(),
            reason,
        };
        for pair in self.instances.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(LogError::DuplicateTimestamp {
                    case_id: self.case_id.clone(),
                    timestamp: format_timestamp(pair[0].timestamp),
                });
            }
            if pair[0].timestamp > pair[1].timestamp {
                return Err(invalid("timestamps are not increasing".into()));
            }
        }
        if let Some(e) = self.instances.iter().find(|e| e.event.is_empty()) {
            return Err(invalid(format!(
                "empty event name at {}",
                format_timestamp(e.timestamp)
            )));
        }
        let exits = self
            .instances
            .iter()
            .filter(|e| vocabulary::is_exit(&e.event))
            .count();
        if exits != 1 {
            return Err(invalid(format!(
                "expected exactly one exit event, found {exits}"
            )));
        }
        let last = self.instances.last().expect("one exit implies non-empty");
        if !vocabulary::is_exit(&last.event) {
            return Err(invalid("exit event is not the last event".into()));
        }
        if last.event != self.outcome.exit_event() {
            return Err(invalid(format!(
                "outcome {} disagrees with exit event {}",
                self.outcome.label(),
                last.event
            )));
        }
        Ok(())
    }

    pub fn first_timestamp(&self) -> Option<Timestamp> {
        self.instances.first().map(|e| e.timestamp)
    }

    pub fn death_timestamp(&self) -> Option<Timestamp> {
        self.instances
            .iter()
            .find(|e| e.event == DEATH)
            .map(|e| e.timestamp)
    }
}

/// A validated set of traces over an ordered vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    traces: Vec<Trace>,
    vocabulary: BTreeSet<String>,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>, vocabulary: BTreeSet<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(traces.len());
        for trace in &traces {
            if !seen.insert(trace.case_id.as_str()) {
                return Err(LogError::DuplicateCase {
                    case_id: trace.case_id.clone(),
                });
            }
            trace.validate()?;
            if let Some(e) = trace
                .instances
                .iter()
                .find(|e| !vocabulary.contains(&e.event))
            {
                return Err(LogError::OutOfVocabulary {
                    case_id: trace.case_id.clone(),
                    event: e.event.clone(),
                });
            }
        }
        Ok(Self { traces, vocabulary })
    }

    /// Builds a log whose vocabulary is exactly the set of observed names.
    pub fn from_traces(traces: Vec<Trace>) -> Result<Self> {
        let vocabulary = traces
            .iter()
            .flat_map(|t| t.instances.iter().map(|e| e.event.clone()))
            .collect();
        Self::new(traces, vocabulary)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Keeps the vocabulary, replaces the traces. Used by filters and splits,
    /// which only ever remove traces.
    fn with_traces(&self, traces: Vec<Trace>) -> Self {
        Self {
            traces,
            vocabulary: self.vocabulary.clone(),
        }
    }
}

fn check_header(
    reader: &mut csv::Reader<impl Read>,
    file: &'static str,
    expected: &[&str],
) -> Result<()> {
    let header = reader.headers()?;
    let matches =
        header.len() == expected.len() && header.iter().zip(expected).all(|(h, e)| h.trim() == *e);
    if matches {
        Ok(())
    } else {
        Err(LogError::Header {
            file,
            expected: expected.join(","),
        })
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Reads the events CSV into per-case event sequences sorted by timestamp,
/// in order of each case's first appearance. Names are canonicalized.
pub fn read_event_sequences<R: Read>(events: R) -> Result<Vec<(String, Vec<EventInstance>)>> {
    let mut reader = csv_reader(events);
    check_header(&mut reader, "events", &EVENTS_HEADER)?;
    let mut order: Vec<(String, Vec<EventInstance>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let malformed = |reason: String| LogError::Malformed {
            file: "events",
            line,
            reason,
        };
        if record.len() != 3 {
            return Err(malformed(format!(
                "expected 3 fields, found {}",
                record.len()
            )));
        }
        let case_id = record[0].to_string();
        if case_id.is_empty() {
            return Err(malformed("empty case_id".into()));
        }
        let event = vocabulary::canonicalize(&record[1]);
        if event.is_empty() {
            return Err(malformed("empty event name".into()));
        }
        let timestamp = parse_timestamp(&record[2]).map_err(malformed)?;
        let slot = *index.entry(case_id.clone()).or_insert_with(|| {
            order.push((case_id, Vec::new()));
            order.len() - 1
        });
        order[slot].1.push(EventInstance { event, timestamp });
    }
    for (case_id, instances) in &mut order {
        instances.sort_by_key(|e| e.timestamp);
        if let Some(pair) = instances
            .windows(2)
            .find(|p| p[0].timestamp == p[1].timestamp)
        {
            return Err(LogError::DuplicateTimestamp {
                case_id: case_id.clone(),
                timestamp: format_timestamp(pair[0].timestamp),
            });
        }
    }
    Ok(order)
}

struct DemographicRow {
    demographics: Demographics,
    admit_timestamp: Timestamp,
    prior_admissions: u32,
    outcome: Outcome,
}

fn read_demographics<R: Read>(input: R) -> Result<HashMap<String, DemographicRow>> {
    let mut reader = csv_reader(input);
    check_header(&mut reader, "demographics", &DEMOGRAPHICS_HEADER)?;
    let mut rows = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record_line(&record);
        let malformed = |reason: String| LogError::Malformed {
            file: "demographics",
            line,
            reason,
        };
        if record.len() != 6 {
            return Err(malformed(format!(
                "expected 6 fields, found {}",
                record.len()
            )));
        }
        let case_id = record[0].to_string();
        if case_id.is_empty() {
            return Err(malformed("empty case_id".into()));
        }
        let age: u32 = record[1].parse().map_err(|_| {
            malformed(format!(
                "age `{}` is not a non-negative integer",
                &record[1]
            ))
        })?;
        let insurance: Insurance = record[2].parse().map_err(|_| LogError::UnknownInsurance {
            line,
            value: record[2].to_string(),
        })?;
        let admit_timestamp = parse_timestamp(&record[3]).map_err(malformed)?;
        let prior_admissions: u32 = record[4].parse().map_err(|_| {
            malformed(format!(
                "prior_admissions `{}` is not a non-negative integer",
                &record[4]
            ))
        })?;
        let outcome = record[5]
            .parse::<u8>()
            .ok()
            .and_then(Outcome::from_label)
            .ok_or_else(|| malformed(format!("outcome `{}` is not 0 or 1", &record[5])))?;
        let row = DemographicRow {
            demographics: Demographics { age, insurance },
            admit_timestamp,
            prior_admissions,
            outcome,
        };
        if rows.insert(case_id.clone(), row).is_some() {
            return Err(LogError::DuplicateCase { case_id });
        }
    }
    Ok(rows)
}

/// Parses and validates an event log from its two CSV streams.
///
/// Traces appear in order of first appearance in the events file; each
/// trace's events are sorted by timestamp.
pub fn parse_event_log<E: Read, D: Read>(events: E, demographics: D) -> Result<EventLog> {
    let sequences = read_event_sequences(events)?;
    let mut demo = read_demographics(demographics)?;
    let mut traces = Vec::with_capacity(sequences.len());
    for (case_id, instances) in sequences {
        let row = demo
            .remove(&case_id)
            .ok_or_else(|| LogError::MissingDemographics {
                case_id: case_id.clone(),
            })?;
        traces.push(Trace {
            case_id,
            instances,
            demographics: row.demographics,
            outcome: row.outcome,
            admit_timestamp: row.admit_timestamp,
            prior_admissions: row.prior_admissions,
        });
    }
    if let Some(case_id) = demo.into_keys().min() {
        return Err(LogError::NoEvents { case_id });
    }
    EventLog::from_traces(traces)
}

pub fn write_events_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(EVENTS_HEADER)?;
    for trace in log.traces() {
        for e in &trace.instances {
            writer.write_record([
                trace.case_id.as_str(),
                e.event.as_str(),
                &format_timestamp(e.timestamp),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_demographics_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(DEMOGRAPHICS_HEADER)?;
    for t in log.traces() {
        writer.write_record([
            t.case_id.clone(),
            t.demographics.age.to_string(),
            t.demographics.insurance.to_string(),
            format_timestamp(t.admit_timestamp),
            t.prior_admissions.to_string(),
            t.outcome.label().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub const ADULT_AGE: u32 = 18;

/// Keeps adults with at least one prior admission who did not die before
/// `admit + cutoff_hours`.
pub fn filter_cohort(log: &EventLog, cutoff_hours: f64) -> EventLog {
    let cutoff_ms = (cutoff_hours * MS_PER_HOUR as f64).round() as i64;
    let kept = log
        .traces()
        .iter()
        .filter(|t| t.demographics.age >= ADULT_AGE)
        .filter(|t| t.prior_admissions > 0)
        .filter(|t| match t.death_timestamp() {
            Some(death) => death >= t.admit_timestamp + cutoff_ms,
            None => true,
        })
        .cloned()
        .collect();
    log.with_traces(kept)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSplit {
    pub train: EventLog,
    pub validation: EventLog,
    pub test: EventLog,
    pub seed: u64,
}

/// Test-set size for `n` traces: `ceil(0.33 n)`.
pub fn test_size(n: usize) -> usize {
    (33 * n).div_ceil(100)
}

/// Validation size carved from a training pool of `n`: `floor(0.20 n)`.
pub fn validation_size(n: usize) -> usize {
    n / 5
}

/// Seeded Fisher-Yates permutation of `0..n`.
///
/// The stream is ChaCha8 seeded with `seed_from_u64(seed)`; for `i` from
/// `n-1` down to `1`, swap position `i` with `next_u64() % (i + 1)`.
pub fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Splits 67/33 into a training pool and a test set, then the pool 80/20
/// into train and validation. Each part keeps the input's trace order.
pub fn split_cohort(log: &EventLog, seed: u64) -> Result<CohortSplit> {
    let n = log.len();
    if n < 5 {
        return Err(LogError::TooFewTraces(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = permutation(n, &mut rng);
    let (test_idx, pool_idx) = perm.split_at(test_size(n));

    let pool_perm = permutation(pool_idx.len(), &mut rng);
    let pool_shuffled: Vec<usize> = pool_perm.iter().map(|&i| pool_idx[i]).collect();
    let (val_idx, train_idx) = pool_shuffled.split_at(validation_size(pool_idx.len()));

    let pick = |indices: &[usize]| {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        log.with_traces(
            sorted
                .into_iter()
                .map(|i| log.traces()[i].clone())
                .collect(),
        )
    };
    Ok(CohortSplit {
        train: pick(train_idx),
        validation: pick(val_idx),
        test: pick(test_idx),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const T0: &str = "2130-01-01T00:00:00.000Z";

    fn ts(s: &str) -> Timestamp {
        parse_timestamp(s).unwrap()
    }

    fn demo_csv(rows: &[&str]) -> String {
        let mut s = DEMOGRAPHICS_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    fn events_csv(rows: &[&str]) -> String {
        let mut s = EVENTS_HEADER.join(",");
        for r in rows {
            s.push('\n');
            s.push_str(r);
        }
        s.push('\n');
        s
    }

    fn trace(case: &str, age: u32, prior: u32, events: &[(&str, i64)], outcome: Outcome) -> Trace {
        let admit = ts(T0);
        Trace {
            case_id: case.into(),
            instances: events
                .iter()
                .map(|(e, h)| EventInstance::new(*e, admit + h * MS_PER_HOUR))
                .collect(),
            demographics: Demographics {
                age,
                insurance: Insurance::Medicare,
            },
            outcome,
            admit_timestamp: admit,
            prior_admissions: prior,
        }
    }

    #[test]
    fn parses_minimal_log() {
        let events = events_csv(&[
            "p1,DISCH,2130-01-04T18:00:00.000Z",
            "p1,ADM_EMERGENCY,2130-01-01T00:00:00.000Z",
        ]);
        let demo = demo_csv(&["p1,70,Medicare,2130-01-01T00:00:00.000Z,1,0"]);
        let log = parse_event_log(events.as_bytes(), demo.as_bytes()).unwrap();
        assert_eq!(log.len(), 1);
        let t = &log.traces()[0];
        assert_eq!(t.outcome, Outcome::Discharged);
        assert_eq!(t.instances[0].event, "ADM_EMERGENCY");
        assert_eq!(
            t.instances[1].timestamp - t.instances[0].timestamp,
            90 * MS_PER_HOUR
        );
        assert_eq!(log.vocabulary().len(), 2);
    }

    #[test]
    fn rejects_duplicate_timestamp() {
        let events = events_csv(&[
            "p1,ADM_EMERGENCY,2130-01-01T00:00:00.000Z",
            "p1,DISCH,2130-01-01T00:00:00.000Z",
        ]);
        let demo = demo_csv(&["p1,70,Medicare,2130-01-01T00:00:00.000Z,1,0"]);
        let err = parse_event_log(events.as_bytes(), demo.as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::DuplicateTimestamp { .. }), "{err}");
        assert!(err.to_string().contains("duplicate timestamp"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let events = events_csv(&[
            "p1,ADM_EMERGENCY,2130-01-01T00:00:00.000Z",
            "p1,DISCH,yesterday",
        ]);
        let demo = demo_csv(&["p1,70,Medicare,2130-01-01T00:00:00.000Z,1,0"]);
        match parse_event_log(events.as_bytes(), demo.as_bytes()).unwrap_err() {
            LogError::Malformed { file, line, .. } => {
                assert_eq!(file, "events");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_insurance_and_missing_demographics() {
        let events = events_csv(&[
            "p1,ADM_URGENT,2130-01-01T00:00:00.000Z",
            "p1,DISCH,2130-01-02T00:00:00.000Z",
        ]);
        let bad = demo_csv(&["p1,70,Veterans,2130-01-01T00:00:00.000Z,1,0"]);
        assert!(matches!(
            parse_event_log(events.as_bytes(), bad.as_bytes()).unwrap_err(),
            LogError::UnknownInsurance { line: 2, .. }
        ));
        let other = demo_csv(&["p2,70,Private,2130-01-01T00:00:00.000Z,1,0"]);
        assert!(matches!(
            parse_event_log(events.as_bytes(), other.as_bytes()).unwrap_err(),
            LogError::MissingDemographics { .. }
        ));
    }

    #[test]
    fn outcome_must_match_exit_event() {
        let events = events_csv(&[
            "p1,ADM_URGENT,2130-01-01T00:00:00.000Z",
            "p1,DISCH,2130-01-02T00:00:00.000Z",
        ]);
        let demo = demo_csv(&["p1,70,Private,2130-01-01T00:00:00.000Z,1,1"]);
        assert!(matches!(
            parse_event_log(events.as_bytes(), demo.as_bytes()).unwrap_err(),
            LogError::InvalidTrace { .. }
        ));
    }

    #[test]
    fn exit_must_be_last_and_unique() {
        let t = trace(
            "p",
            40,
            1,
            &[("ADM_URGENT", 0), ("DISCH", 2), ("bun", 3)],
            Outcome::Discharged,
        );
        assert!(t.validate().is_err());
        let t = trace(
            "p",
            40,
            1,
            &[("DEATH", 1), ("DISCH", 2)],
            Outcome::Discharged,
        );
        assert!(t.validate().is_err());
    }

    #[test]
    fn filter_boundaries() {
        let log = EventLog::from_traces(vec![
            trace(
                "minor",
                17,
                1,
                &[("ADM_URGENT", 0), ("DISCH", 40)],
                Outcome::Discharged,
            ),
            trace(
                "adult",
                18,
                1,
                &[("ADM_URGENT", 0), ("DISCH", 40)],
                Outcome::Discharged,
            ),
            trace(
                "first",
                50,
                0,
                &[("ADM_URGENT", 0), ("DISCH", 40)],
                Outcome::Discharged,
            ),
            trace(
                "early",
                50,
                2,
                &[("ADM_URGENT", 0), ("DEATH", 20)],
                Outcome::Died,
            ),
            trace(
                "late",
                50,
                2,
                &[("ADM_URGENT", 0), ("DEATH", 25)],
                Outcome::Died,
            ),
            trace(
                "exact",
                50,
                2,
                &[("ADM_URGENT", 0), ("DEATH", 24)],
                Outcome::Died,
            ),
        ])
        .unwrap();
        let kept: Vec<_> = filter_cohort(&log, 24.0)
            .traces()
            .iter()
            .map(|t| t.case_id.clone())
            .collect();
        assert_eq!(kept, ["adult", "late", "exact"]);
    }

    #[test]
    fn split_sizes_for_a_1017_cohort() {
        assert_eq!(test_size(1017), 336);
        assert_eq!(1017 - test_size(1017), 681);
        assert_eq!(validation_size(681), 136);
        assert_eq!(681 - validation_size(681), 545);
    }

    #[test]
    fn split_rejects_tiny_logs() {
        let traces = (0..4)
            .map(|i| {
                trace(
                    &format!("p{i}"),
                    40,
                    1,
                    &[("ADM_URGENT", 0), ("DISCH", 30)],
                    Outcome::Discharged,
                )
            })
            .collect();
        let log = EventLog::from_traces(traces).unwrap();
        assert!(matches!(
            split_cohort(&log, 1),
            Err(LogError::TooFewTraces(4))
        ));
    }

    #[test]
    fn timestamp_format_round_trips() {
        let t = ts("2130-03-04T05:06:07.089Z");
        assert_eq!(format_timestamp(t), "2130-03-04T05:06:07.089Z");
        assert!(parse_timestamp("2130-03-04T05:06:07.0891Z").is_err());
    }
}
