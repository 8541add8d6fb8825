//! Directly-follows discovery of a workflow net.
//!
//! Every activity `a` becomes a visible transition between an input place
//! `in:a` and an output place `out:a`. Each retained directly-follows edge
//! `(a, b)` becomes a hidden transition moving the token from `out:a` to
//! `in:b`; hidden start and end transitions connect `source` to the start
//! activities and the end activities to `sink`. Choices therefore stay
//! exclusive: after `a` fires, exactly one token waits in `out:a` and replay
//! routes it along whichever edge the next event needs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::eventlog::{EventInstance, EventLog};
use crate::petrinet::{NetError, PetriNet};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("cannot discover a net from an empty log")]
    EmptyLog,
    #[error("edge threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("edge threshold {0} disconnects every activity from source and sink")]
    Disconnected(f64),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectlyFollowsGraph {
    pub activities: BTreeMap<String, u64>,
    pub edges: BTreeMap<(String, String), u64>,
    pub starts: BTreeMap<String, u64>,
    pub ends: BTreeMap<String, u64>,
}

impl DirectlyFollowsGraph {
    /// Counts one trace (a sequence of activity names).
    pub fn add_trace<'a>(&mut self, trace: impl IntoIterator<Item = &'a str>) {
        let mut prev: Option<&str> = None;
        for name in trace {
            *self.activities.entry(name.to_string()).or_default() += 1;
            match prev {
                None => *self.starts.entry(name.to_string()).or_default() += 1,
                Some(p) => {
                    *self
                        .edges
                        .entry((p.to_string(), name.to_string()))
                        .or_default() += 1
                }
            }
            prev = Some(name);
        }
        if let Some(last) = prev {
            *self.ends.entry(last.to_string()).or_default() += 1;
        }
    }

    /// Adds another graph's counts; counting is associative, so partial
    /// graphs over disjoint trace sets can be merged in any order.
    pub fn merge(&mut self, other: &Self) {
        fn add<K: Ord + Clone>(into: &mut BTreeMap<K, u64>, from: &BTreeMap<K, u64>) {
            for (k, v) in from {
                *into.entry(k.clone()).or_default() += v;
            }
        }
        add(&mut self.activities, &other.activities);
        add(&mut self.edges, &other.edges);
        add(&mut self.starts, &other.starts);
        add(&mut self.ends, &other.ends);
    }

    pub fn from_sequences<'a, I>(traces: I) -> Result<Self, DiscoveryError>
    where
        I: IntoIterator<Item = &'a [EventInstance]>,
    {
        let mut dfg = Self::default();
        let mut any = false;
        for trace in traces {
            any = true;
            dfg.add_trace(trace.iter().map(|e| e.event.as_str()));
        }
        if any {
            Ok(dfg)
        } else {
            Err(DiscoveryError::EmptyLog)
        }
    }

    pub fn max_edge_frequency(&self) -> u64 {
        self.edges.values().copied().max().unwrap_or(0)
    }
}

pub fn build_dfg(log: &EventLog) -> Result<DirectlyFollowsGraph, DiscoveryError> {
    DirectlyFollowsGraph::from_sequences(log.traces().iter().map(|t| t.instances.as_slice()))
}

pub const SOURCE_PLACE: &str = "source";
pub const SINK_PLACE: &str = "sink";

pub fn input_place(activity: &str) -> String {
    format!("in:{activity}")
}

pub fn output_place(activity: &str) -> String {
    format!("out:{activity}")
}

pub fn visible_transition(activity: &str) -> String {
    format!("t:{activity}")
}

/// Activities reachable from `roots` along `next`.
fn closure<'a>(
    roots: impl IntoIterator<Item = &'a String>,
    next: &BTreeMap<&'a String, Vec<&'a String>>,
) -> BTreeSet<&'a String> {
    let mut seen: BTreeSet<&String> = roots.into_iter().collect();
    let mut queue: VecDeque<&String> = seen.iter().copied().collect();
    while let Some(a) = queue.pop_front() {
        for &b in next.get(a).into_iter().flatten() {
            if seen.insert(b) {
                queue.push_back(b);
            }
        }
    }
    seen
}

/// Translates a DFG into a workflow net, dropping edges whose frequency is
/// below `edge_threshold` times the most frequent edge. Activities that
/// are no longer on a path from a start to an end activity are dropped.
pub fn dfg_to_petrinet(
    dfg: &DirectlyFollowsGraph,
    edge_threshold: f64,
) -> Result<PetriNet, DiscoveryError> {
    if !(0.0..=1.0).contains(&edge_threshold) {
        return Err(DiscoveryError::InvalidThreshold(edge_threshold));
    }
    let floor = edge_threshold * dfg.max_edge_frequency() as f64;
    let kept: Vec<(&String, &String)> = dfg
        .edges
        .iter()
        .filter(|(_, &n)| n as f64 >= floor)
        .map(|((a, b), _)| (a, b))
        .collect();

    let mut forward: BTreeMap<&String, Vec<&String>> = BTreeMap::new();
    let mut backward: BTreeMap<&String, Vec<&String>> = BTreeMap::new();
    for &(a, b) in &kept {
        forward.entry(a).or_default().push(b);
        backward.entry(b).or_default().push(a);
    }
    let reachable = closure(dfg.starts.keys(), &forward);
    let coreachable = closure(dfg.ends.keys(), &backward);
    let activities: BTreeSet<&String> = reachable.intersection(&coreachable).copied().collect();
    if activities.is_empty() {
        return Err(DiscoveryError::Disconnected(edge_threshold));
    }

    let mut b = PetriNet::builder();
    b.place(SOURCE_PLACE);
    for a in &activities {
        b.place(input_place(a)).place(output_place(a));
    }
    b.place(SINK_PLACE).source(SOURCE_PLACE).sink(SINK_PLACE);

    for a in &activities {
        let t = visible_transition(a);
        b.visible(t.clone(), a.as_str())
            .arc(input_place(a), t.clone())
            .arc(t, output_place(a));
    }
    for a in dfg.starts.keys().filter(|a| activities.contains(a)) {
        let tau = format!("tau:start:{a}");
        b.hidden(tau.clone())
            .arc(SOURCE_PLACE, tau.clone())
            .arc(tau, input_place(a));
    }
    for &(from, to) in &kept {
        if activities.contains(from) && activities.contains(to) {
            let tau = format!("tau:edge:{from}->{to}");
            b.hidden(tau.clone())
                .arc(output_place(from), tau.clone())
                .arc(tau, input_place(to));
        }
    }
    for a in dfg.ends.keys().filter(|a| activities.contains(a)) {
        let tau = format!("tau:end:{a}");
        b.hidden(tau.clone())
            .arc(output_place(a), tau.clone())
            .arc(tau, SINK_PLACE);
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfg(traces: &[&[&str]]) -> DirectlyFollowsGraph {
        let mut g = DirectlyFollowsGraph::default();
        for t in traces {
            g.add_trace(t.iter().copied());
        }
        g
    }

    fn events(names: &[&str]) -> Vec<EventInstance> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| EventInstance::new(*n, i as i64 * 1000))
            .collect()
    }

    #[test]
    fn counts_pairs_starts_and_ends() {
        let g = dfg(&[&["A", "B"], &["A", "B"]]);
        assert_eq!(g.edges[&("A".into(), "B".into())], 2);
        assert_eq!(g.starts["A"], 2);
        assert_eq!(g.ends["B"], 2);
        assert_eq!(g.activities["A"], 2);
    }

    #[test]
    fn singleton_trace_has_no_edges() {
        let g = dfg(&[&["A"]]);
        assert!(g.edges.is_empty());
        assert_eq!(g.starts["A"], 1);
        assert_eq!(g.ends["A"], 1);
        let net = dfg_to_petrinet(&g, 0.0).unwrap();
        let r = net.replay_events(&events(&["A"]), None);
        assert_eq!((r.missing_tokens, r.remaining_tokens), (0, 0));
    }

    #[test]
    fn empty_sequences_are_an_error() {
        let none: Vec<&[EventInstance]> = Vec::new();
        assert!(matches!(
            DirectlyFollowsGraph::from_sequences(none),
            Err(DiscoveryError::EmptyLog)
        ));
    }

    #[test]
    fn sequence_only_fits_in_order() {
        let g = dfg(&[&["A", "B", "C"]]);
        let net = dfg_to_petrinet(&g, 0.0).unwrap();
        assert_eq!(net.visible_count(), 3);
        let fit = net.replay_events(&events(&["A", "B", "C"]), None);
        assert_eq!((fit.missing_tokens, fit.remaining_tokens), (0, 0));
        for bad in [["B", "A", "C"], ["A", "C", "B"], ["C", "B", "A"]] {
            let r = net.replay_events(&events(&bad), None);
            assert!(r.missing_tokens > 0, "{bad:?} should not fit");
        }
    }

    #[test]
    fn full_threshold_keeps_only_dominant_edge() {
        let g = dfg(&[&["A", "B"], &["A", "B"], &["A", "B"], &["A", "C", "B"]]);
        let net = dfg_to_petrinet(&g, 1.0).unwrap();
        let edge_taus: Vec<_> = net
            .transitions()
            .iter()
            .filter(|t| t.id.starts_with("tau:edge:"))
            .map(|t| t.id.as_str())
            .collect();
        assert_eq!(edge_taus, ["tau:edge:A->B"]);
        // C lost both of its edges, so it is no longer part of the net
        assert!(net.transition_for_label("C").is_none());
    }

    #[test]
    fn unique_source_and_sink() {
        let g = dfg(&[&["A", "B"], &["C"], &["A", "A", "B"]]);
        let net = dfg_to_petrinet(&g, 0.0).unwrap();
        assert_eq!(net.places()[net.source()].id, SOURCE_PLACE);
        assert_eq!(net.places()[net.sink()].id, SINK_PLACE);
        assert_eq!(net.places().len(), 2 * 3 + 2);
    }

    #[test]
    fn threshold_outside_unit_interval() {
        let g = dfg(&[&["A", "B"]]);
        assert!(matches!(
            dfg_to_petrinet(&g, 1.5),
            Err(DiscoveryError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn disconnected_when_no_path_survives() {
        // starts at A, ends at C; the only route goes through a weak edge
        let g = dfg(&[
            &["A", "B", "C"],
            &["X", "Y"],
            &["X", "Y"],
            &["X", "Y"],
            &["X", "Y"],
        ]);
        let net = dfg_to_petrinet(&g, 0.5).unwrap();
        assert!(net.transition_for_label("A").is_none());
        assert!(net.transition_for_label("X").is_some());

        let g = dfg(&[
            &["A", "B", "C"],
            &["A", "B", "C"],
            &["D", "E"],
            &["D", "E"],
            &["D", "E"],
        ]);
        let mut only_weak = g.clone();
        only_weak.starts.remove("D");
        only_weak.ends.remove("E");
        assert!(matches!(
            dfg_to_petrinet(&only_weak, 1.0),
            Err(DiscoveryError::Disconnected(_))
        ));
    }
}
