use std::collections::{HashSet, VecDeque};

use super::{Marking, PetriNet};
use crate::eventlog::{EventInstance, Timestamp, Trace};

/// Maximum number of hidden firings tried before forcing a transition.
pub const HIDDEN_SEARCH_HORIZON: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Firing {
    pub transition: usize,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayResult {
    pub final_marking: Marking,
    pub firing_timeline: Vec<Firing>,
    /// Last time a token entered each place, `None` if never.
    pub place_entry_times: Vec<Option<Timestamp>>,
    /// Tokens entered into each place over the replay.
    pub place_entry_counts: Vec<u64>,
    pub missing_tokens: u64,
    /// Tokens outside the sink after a full replay; always 0 with a cutoff.
    pub remaining_tokens: u64,
}

/// Hook for callers that need every token entry, not just the last one.
pub trait ReplayObserver {
    fn token_entered(&mut self, place: usize, tokens: u32, at: Timestamp);
}

impl ReplayObserver for () {
    fn token_entered(&mut self, _: usize, _: u32, _: Timestamp) {}
}

struct Replay<'a, O> {
    net: &'a PetriNet,
    observer: &'a mut O,
    marking: Marking,
    timeline: Vec<Firing>,
    entry_times: Vec<Option<Timestamp>>,
    entry_counts: Vec<u64>,
    missing: u64,
}

impl<O: ReplayObserver> Replay<'_, O> {
    fn enter(&mut self, place: usize, tokens: u32, at: Timestamp) {
        self.entry_times[place] = Some(at);
        self.entry_counts[place] += u64::from(tokens);
        self.observer.token_entered(place, tokens, at);
    }

    fn fire(&mut self, t: usize, at: Timestamp) {
        self.net.fire_at(&mut self.marking, t);
        for &(p, w) in self.net.outputs(t) {
            self.enter(p, w, at);
        }
        self.timeline.push(Firing {
            transition: t,
            timestamp: at,
        });
    }

    fn step(&mut self, event: &EventInstance) {
        let Some(t) = self.net.transition_for_label(&event.event) else {
            self.missing += 1;
            return;
        };
        if !self.net.enabled_at(&self.marking, t) {
            let net = self.net;
            match hidden_path(net, &self.marking, |m| net.enabled_at(m, t)) {
                Some(path) => {
                    for h in path {
                        self.fire(h, event.timestamp);
                    }
                }
                None => {
                    for &(p, w) in net.inputs(t) {
                        let have = self.marking.get(p);
                        if have < w {
                            self.missing += u64::from(w - have);
                            self.marking.set(p, w);
                        }
                    }
                }
            }
        }
        self.fire(t, event.timestamp);
    }

    /// Moves a token into the sink through hidden transitions if possible.
    fn complete(&mut self, at: Timestamp) {
        let net = self.net;
        let sink = net.sink();
        if self.marking.get(sink) > 0 {
            return;
        }
        if let Some(path) = hidden_path(net, &self.marking, |m| m.get(sink) > 0) {
            for h in path {
                self.fire(h, at);
            }
        }
    }
}

/// Shortest sequence of at most [`HIDDEN_SEARCH_HORIZON`] hidden firings
/// from `start` to a marking satisfying `goal`. Breadth-first with children
/// expanded in hidden-id order, so among equally short sequences the
/// lexicographically smallest (by transition id) wins. The empty sequence is
/// not considered.
fn hidden_path(
    net: &PetriNet,
    start: &Marking,
    goal: impl Fn(&Marking) -> bool,
) -> Option<Vec<usize>> {
    if net.hidden_transitions().is_empty() {
        return None;
    }
    // (marking, parent node, transition fired to get here, depth)
    let mut nodes: Vec<(Marking, usize, usize, usize)> = vec![(start.clone(), usize::MAX, 0, 0)];
    let mut seen: HashSet<Marking> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(current) = queue.pop_front() {
        let depth = nodes[current].3;
        if depth == HIDDEN_SEARCH_HORIZON {
            continue;
        }
        for &h in net.hidden_transitions() {
            if !net.enabled_at(&nodes[current].0, h) {
                continue;
            }
            let mut next = nodes[current].0.clone();
            net.fire_at(&mut next, h);
            if goal(&next) {
                let mut path = vec![h];
                let mut at = current;
                while at != 0 {
                    path.push(nodes[at].2);
                    at = nodes[at].1;
                }
                path.reverse();
                return Some(path);
            }
            if seen.insert(next.clone()) {
                nodes.push((next, current, h, depth + 1));
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    None
}

impl PetriNet {
    /// Token replay of `trace` up to and including `cutoff`.
    ///
    /// Each event fires its visible transition, first enabling it through the
    /// shortest hidden sequence if needed, and otherwise by inserting the
    /// missing tokens (counted in `missing_tokens`). Events without a
    /// matching transition are skipped and counted as one missing token.
    /// Initial tokens enter at the first event's timestamp. Without a
    /// cutoff, hidden transitions are finally used to reach the sink and
    /// `remaining_tokens` counts what is left elsewhere.
    pub fn replay_trace(&self, trace: &Trace, cutoff: Option<Timestamp>) -> ReplayResult {
        self.replay_events(&trace.instances, cutoff)
    }

    pub fn replay_events(
        &self,
        events: &[EventInstance],
        cutoff: Option<Timestamp>,
    ) -> ReplayResult {
        self.replay_observed(events, cutoff, &mut ())
    }

    pub fn replay_observed<O: ReplayObserver>(
        &self,
        events: &[EventInstance],
        cutoff: Option<Timestamp>,
        observer: &mut O,
    ) -> ReplayResult {
        let places = self.places().len();
        let mut replay = Replay {
            net: self,
            observer,
            marking: self.initial_marking().clone(),
            timeline: Vec::new(),
            entry_times: vec![None; places],
            entry_counts: vec![0; places],
            missing: 0,
        };
        let within = |e: &&EventInstance| cutoff.is_none_or(|c| e.timestamp <= c);
        let mut last = None;
        for (i, event) in events.iter().take_while(|e| within(e)).enumerate() {
            if i == 0 {
                for p in 0..places {
                    let n = self.initial_marking().get(p);
                    if n > 0 {
                        replay.enter(p, n, event.timestamp);
                    }
                }
            }
            replay.step(event);
            last = Some(event.timestamp);
        }
        let mut remaining = 0;
        if cutoff.is_none() {
            if let Some(at) = last {
                replay.complete(at);
            }
            remaining = (0..places)
                .filter(|&p| p != self.sink())
                .map(|p| u64::from(replay.marking.get(p)))
                .sum();
        }
        ReplayResult {
            final_marking: replay.marking,
            firing_timeline: replay.timeline,
            place_entry_times: replay.entry_times,
            place_entry_counts: replay.entry_counts,
            missing_tokens: replay.missing,
            remaining_tokens: remaining,
        }
    }
}
