//! Decay-enhanced replay: timed state samples `F ⊕ C ⊕ M` over the places of
//! a net.
//!
//! Every place carries a linear decay function `f(t) = max(β − δ·(t − t_in), 0)`
//! where `t_in` is the last time a token entered the place. `C` holds the
//! tokens entered so far divided by a per-place normalizer and `M` the
//! current marking. All three vectors follow the net's place order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{format_timestamp, EventInstance, EventLog, Timestamp, Trace, MS_PER_HOUR};
use crate::model::{encode_demographics, PredictionDataset, DEMOGRAPHIC_WIDTH};
use crate::petrinet::{PetriNet, ReplayObserver, ReplayResult};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DreamError {
    #[error("cannot estimate decay parameters from an empty log")]
    EmptyLog,
    #[error("sample time {at} precedes the first event at {start}")]
    BeforeStart { at: String, start: String },
    #[error("trace has no events")]
    EmptyTrace,
    #[error("decay parameters cover places {found:?}, net has {expected:?}")]
    PlaceMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
}

/// Per-place decay parameters, frozen together with the place order they
/// were estimated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayParams<T> {
    pub place_ids: Vec<String>,
    pub beta: Vec<T>,
    /// Decay per millisecond.
    pub delta: Vec<T>,
    pub count_scale: Vec<T>,
}

impl<T: Scalar> DecayParams<T> {
    pub fn len(&self) -> usize {
        self.place_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.place_ids.is_empty()
    }

    pub fn check_net(&self, net: &PetriNet) -> Result<(), DreamError> {
        let ids: Vec<&String> = net.places().iter().map(|p| &p.id).collect();
        if ids.len() != self.place_ids.len()
            || ids.iter().zip(&self.place_ids).any(|(a, b)| *a != b)
        {
            return Err(DreamError::PlaceMismatch {
                expected: ids.into_iter().cloned().collect(),
                found: self.place_ids.clone(),
            });
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> DecayParams<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::lit(x.as_f64())).collect();
        DecayParams {
            place_ids: self.place_ids.clone(),
            beta: conv(&self.beta),
            delta: conv(&self.delta),
            count_scale: conv(&self.count_scale),
        }
    }
}

/// Gaps between consecutive entries of each place within one replay.
struct GapCollector {
    last: Vec<Option<Timestamp>>,
    gap_sum: Vec<f64>,
    gap_count: Vec<u64>,
}

impl ReplayObserver for GapCollector {
    fn token_entered(&mut self, place: usize, _tokens: u32, at: Timestamp) {
        if let Some(prev) = self.last[place] {
            self.gap_sum[place] += (at - prev) as f64;
            self.gap_count[place] += 1;
        }
        self.last[place] = Some(at);
    }
}

/// Fits decay rates and count normalizers on full replays of `train`.
///
/// `δ_p` is the reciprocal of the mean interval between consecutive token
/// entries of `p` within a trace. Places without such intervals (or with
/// only simultaneous entries) fall back to the reciprocal of the mean trace
/// duration, and to no decay when that is zero. `β_p = 1`. The count
/// normalizer is the largest number of tokens entered into `p` during any
/// single replay, at least 1.
pub fn estimate_decay_params<T: Scalar>(
    net: &PetriNet,
    train: &EventLog,
) -> Result<DecayParams<T>, DreamError> {
    if train.is_empty() {
        return Err(DreamError::EmptyLog);
    }
    let places = net.places().len();
    let mut gaps = GapCollector {
        last: vec![None; places],
        gap_sum: vec![0.0; places],
        gap_count: vec![0; places],
    };
    let mut max_entries = vec![0u64; places];
    let mut duration_sum = 0.0;
    for trace in train.traces() {
        gaps.last.iter_mut().for_each(|l| *l = None);
        let result = net.replay_observed(&trace.instances, None, &mut gaps);
        for (m, &c) in max_entries.iter_mut().zip(&result.place_entry_counts) {
            *m = (*m).max(c);
        }
        if let (Some(first), Some(last)) = (trace.instances.first(), trace.instances.last()) {
            duration_sum += (last.timestamp - first.timestamp) as f64;
        }
    }
    let mean_duration = duration_sum / train.len() as f64;
    let fallback = if mean_duration > 0.0 {
        1.0 / mean_duration
    } else {
        0.0
    };

    let delta = (0..places)
        .map(|p| {
            let mean_gap = if gaps.gap_count[p] > 0 {
                gaps.gap_sum[p] / gaps.gap_count[p] as f64
            } else {
                0.0
            };
            T::lit(if mean_gap > 0.0 {
                1.0 / mean_gap
            } else {
                fallback
            })
        })
        .collect();
    Ok(DecayParams {
        place_ids: net.places().iter().map(|p| p.id.clone()).collect(),
        beta: vec![T::one(); places],
        delta,
        count_scale: max_entries
            .iter()
            .map(|&m| T::lit(m.max(1) as f64))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedStateSample<T> {
    pub f: Vec<T>,
    pub c: Vec<T>,
    pub m: Vec<T>,
    pub at: Timestamp,
}

impl<T: Scalar> TimedStateSample<T> {
    pub fn dimension(&self) -> usize {
        self.f.len() + self.c.len() + self.m.len()
    }

    /// `F ⊕ C ⊕ M`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.dimension());
        v.extend_from_slice(&self.f);
        v.extend_from_slice(&self.c);
        v.extend_from_slice(&self.m);
        v
    }
}

fn sample_from_replay<T: Scalar>(
    params: &DecayParams<T>,
    replay: &ReplayResult,
    at: Timestamp,
) -> TimedStateSample<T> {
    let places = params.len();
    let mut f = Vec::with_capacity(places);
    let mut c = Vec::with_capacity(places);
    let mut m = Vec::with_capacity(places);
    for p in 0..places {
        f.push(match replay.place_entry_times[p] {
            Some(entered) => {
                let elapsed = T::lit((at - entered) as f64);
                (params.beta[p] - params.delta[p] * elapsed).max(T::zero())
            }
            None => T::zero(),
        });
        c.push(T::lit(replay.place_entry_counts[p] as f64) / params.count_scale[p]);
        m.push(T::lit(f64::from(replay.final_marking.get(p))));
    }
    TimedStateSample { f, c, m, at }
}

/// Replays the events up to `at` (inclusive) and reads the decay, count and
/// marking vectors at that instant.
pub fn timed_state_sample<T: Scalar>(
    net: &PetriNet,
    params: &DecayParams<T>,
    events: &[EventInstance],
    at: Timestamp,
) -> Result<TimedStateSample<T>, DreamError> {
    params.check_net(net)?;
    let start = events.first().ok_or(DreamError::EmptyTrace)?.timestamp;
    if at < start {
        return Err(DreamError::BeforeStart {
            at: format_timestamp(at),
            start: format_timestamp(start),
        });
    }
    let replay = net.replay_events(events, Some(at));
    Ok(sample_from_replay(params, &replay, at))
}

pub fn cutoff_instant(trace: &Trace, cutoff_hours: f64) -> Timestamp {
    trace.admit_timestamp + (cutoff_hours * MS_PER_HOUR as f64).round() as i64
}

/// One row per trace: the sample at `admit + cutoff_hours`, the encoded
/// demographics and the outcome. A trace whose first event comes after the
/// cutoff contributes the untouched initial state.
pub fn build_dataset<T: Scalar>(
    net: &PetriNet,
    params: &DecayParams<T>,
    log: &EventLog,
    cutoff_hours: f64,
) -> Result<PredictionDataset<T>, DreamError> {
    params.check_net(net)?;
    let width = 3 * params.len();
    let mut ds = PredictionDataset::with_capacity(width, log.len());
    for trace in log.traces() {
        let at = cutoff_instant(trace, cutoff_hours);
        let replay = net.replay_trace(trace, Some(at));
        let sample = sample_from_replay(params, &replay, at);
        let demo: [T; DEMOGRAPHIC_WIDTH] = encode_demographics(&trace.demographics);
        ds.push(
            trace.case_id.clone(),
            &sample.to_vec(),
            &demo,
            trace.outcome.label(),
        )
        .expect("widths fixed above");
    }
    Ok(ds)
}
