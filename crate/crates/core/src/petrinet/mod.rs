//! Place/transition nets with visible and hidden transitions.
//!
//! Places and transitions are addressed by their position in the net (the
//! canonical order used for markings and feature vectors) or by string id.
//! Transitions without a label are hidden: they never correspond to an
//! event and are only fired by replay to route tokens.

mod dot;
mod pnml;
mod replay;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use dot::to_dot;
pub use pnml::{parse_pnml, to_pnml};
pub use replay::{Firing, ReplayObserver, ReplayResult, HIDDEN_SEARCH_HORIZON};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("duplicate place id `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("id `{0}` is used by both a place and a transition")]
    AmbiguousId(String),
    #[error("visible label `{0}` is used by more than one transition")]
    DuplicateLabel(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("arc references unknown node `{0}`")]
    DanglingArc(String),
    #[error("duplicate arc {0} -> {1}")]
    DuplicateArc(String, String),
    #[error("arc {0} -> {1} does not connect a place and a transition")]
    NotBipartite(String, String),
    #[error("arc {0} -> {1} has zero weight")]
    ZeroWeight(String, String),
    #[error("net has no source place")]
    MissingSource,
    #[error("net has no sink place")]
    MissingSink,
    #[error("source place `{0}` has incoming arcs")]
    SourceHasInput(String),
    #[error("sink place `{0}` has outgoing arcs")]
    SinkHasOutput(String),
    #[error("transition `{0}` is not enabled")]
    Disabled(String),
    #[error("marking has {found} entries, net has {expected} places")]
    MarkingSize { expected: usize, found: usize },
    #[error("pnml: {0}")]
    Pnml(String),
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    /// Event name; `None` for hidden transitions.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_hidden(&self) -> bool {
        self.label.is_none()
    }
}

/// A weighted arc. The enum makes place-to-place or transition-to-transition
/// arcs unrepresentable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arc {
    /// Place to transition.
    Input {
        place: usize,
        transition: usize,
        weight: u32,
    },
    /// Transition to place.
    Output {
        transition: usize,
        place: usize,
        weight: u32,
    },
}

impl Arc {
    pub fn weight(&self) -> u32 {
        match *self {
            Arc::Input { weight, .. } | Arc::Output { weight, .. } => weight,
        }
    }
}

/// Token counts per place, in the net's place order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Self(vec![0; places])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn get(&self, place: usize) -> u32 {
        self.0[place]
    }

    pub fn set(&mut self, place: usize, tokens: u32) {
        self.0[place] = tokens;
    }

    pub fn add(&mut self, place: usize, tokens: u32) {
        self.0[place] += tokens;
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
    initial_marking: Marking,
    source: usize,
    sink: usize,
    inputs: Vec<Vec<(usize, u32)>>,
    outputs: Vec<Vec<(usize, u32)>>,
    place_index: HashMap<String, usize>,
    transition_index: HashMap<String, usize>,
    by_label: HashMap<String, usize>,
    /// Hidden transitions in lexicographic id order.
    hidden_order: Vec<usize>,
}

impl PetriNet {
    pub fn builder() -> NetBuilder {
        NetBuilder::default()
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial_marking
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transition_index.get(id).copied()
    }

    /// The visible transition labelled `event`.
    pub fn transition_for_label(&self, event: &str) -> Option<usize> {
        self.by_label.get(event).copied()
    }

    /// `(place, weight)` pairs consumed by `transition`.
    pub fn inputs(&self, transition: usize) -> &[(usize, u32)] {
        &self.inputs[transition]
    }

    /// `(place, weight)` pairs produced by `transition`.
    pub fn outputs(&self, transition: usize) -> &[(usize, u32)] {
        &self.outputs[transition]
    }

    pub fn hidden_transitions(&self) -> &[usize] {
        &self.hidden_order
    }

    pub fn visible_count(&self) -> usize {
        self.transitions.iter().filter(|t| !t.is_hidden()).count()
    }

    /// Marking built from `(place id, tokens)` pairs; unnamed places are 0.
    pub fn marking(&self, tokens: &[(&str, u32)]) -> Result<Marking> {
        let mut m = Marking::empty(self.places.len());
        for &(id, n) in tokens {
            let p = self
                .place_index(id)
                .ok_or_else(|| NetError::UnknownPlace(id.to_string()))?;
            m.set(p, n);
        }
        Ok(m)
    }

    fn resolve_transition(&self, id: &str) -> Result<usize> {
        self.transition_index(id)
            .ok_or_else(|| NetError::UnknownTransition(id.to_string()))
    }

    fn check_marking(&self, marking: &Marking) -> Result<()> {
        if marking.len() == self.places.len() {
            Ok(())
        } else {
            Err(NetError::MarkingSize {
                expected: self.places.len(),
                found: marking.len(),
            })
        }
    }

    /// True iff every input place of `transition` holds at least the arc weight.
    pub fn is_enabled(&self, marking: &Marking, transition: &str) -> Result<bool> {
        let t = self.resolve_transition(transition)?;
        self.check_marking(marking)?;
        Ok(self.enabled_at(marking, t))
    }

    /// Fires `transition`, returning the successor marking.
    pub fn fire(&self, marking: &Marking, transition: &str) -> Result<Marking> {
        let t = self.resolve_transition(transition)?;
        self.check_marking(marking)?;
        if !self.enabled_at(marking, t) {
            return Err(NetError::Disabled(transition.to_string()));
        }
        let mut next = marking.clone();
        self.fire_at(&mut next, t);
        Ok(next)
    }

    #[inline]
    pub(crate) fn enabled_at(&self, marking: &Marking, t: usize) -> bool {
        self.inputs[t].iter().all(|&(p, w)| marking.get(p) >= w)
    }

    /// Index-based firing without the enabled check; callers guarantee it.
    pub(crate) fn fire_at(&self, marking: &mut Marking, t: usize) {
        for &(p, w) in &self.inputs[t] {
            marking.0[p] -= w;
        }
        for &(p, w) in &self.outputs[t] {
            marking.0[p] += w;
        }
    }
}

/// Incremental construction by string id; all validation happens in
/// [`NetBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct NetBuilder {
    places: Vec<String>,
    transitions: Vec<(String, Option<String>)>,
    arcs: Vec<(String, String, u32)>,
    tokens: Vec<(String, u32)>,
    source: Option<String>,
    sink: Option<String>,
}

impl NetBuilder {
    pub fn place(&mut self, id: impl Into<String>) -> &mut Self {
        self.places.push(id.into());
        self
    }

    pub fn visible(&mut self, id: impl Into<String>, label: impl Into<String>) -> &mut Self {
        self.transitions.push((id.into(), Some(label.into())));
        self
    }

    pub fn hidden(&mut self, id: impl Into<String>) -> &mut Self {
        self.transitions.push((id.into(), None));
        self
    }

    pub fn transition(&mut self, id: impl Into<String>, label: Option<String>) -> &mut Self {
        self.transitions.push((id.into(), label));
        self
    }

    /// Arc between a place and a transition, in either direction.
    pub fn arc(&mut self, from: impl Into<String>, to: impl Into<String>) -> &mut Self {
        self.weighted_arc(from, to, 1)
    }

    pub fn weighted_arc(
        &mut self,
        from: impl Into<String>,
        to: impl Into<String>,
        weight: u32,
    ) -> &mut Self {
        self.arcs.push((from.into(), to.into(), weight));
        self
    }

    /// Initial tokens. Without any, the source place starts with one token.
    pub fn tokens(&mut self, place: impl Into<String>, count: u32) -> &mut Self {
        self.tokens.push((place.into(), count));
        self
    }

    pub fn source(&mut self, place: impl Into<String>) -> &mut Self {
        self.source = Some(place.into());
        self
    }

    pub fn sink(&mut self, place: impl Into<String>) -> &mut Self {
        self.sink = Some(place.into());
        self
    }

    pub fn build(&self) -> Result<PetriNet> {
        let mut place_index = HashMap::new();
        for (i, id) in self.places.iter().enumerate() {
            if place_index.insert(id.clone(), i).is_some() {
                return Err(NetError::DuplicatePlace(id.clone()));
            }
        }
        let mut transition_index = HashMap::new();
        let mut by_label = HashMap::new();
        for (i, (id, label)) in self.transitions.iter().enumerate() {
            if place_index.contains_key(id) {
                return Err(NetError::AmbiguousId(id.clone()));
            }
            if transition_index.insert(id.clone(), i).is_some() {
                return Err(NetError::DuplicateTransition(id.clone()));
            }
            if let Some(label) = label {
                if by_label.insert(label.clone(), i).is_some() {
                    return Err(NetError::DuplicateLabel(label.clone()));
                }
            }
        }

        let mut arcs = Vec::with_capacity(self.arcs.len());
        let mut inputs = vec![Vec::new(); self.transitions.len()];
        let mut outputs = vec![Vec::new(); self.transitions.len()];
        let mut seen = HashSet::new();
        for (from, to, weight) in &self.arcs {
            if *weight == 0 {
                return Err(NetError::ZeroWeight(from.clone(), to.clone()));
            }
            if !seen.insert((from.as_str(), to.as_str())) {
                return Err(NetError::DuplicateArc(from.clone(), to.clone()));
            }
            let arc = match (
                place_index.get(from),
                transition_index.get(from),
                place_index.get(to),
                transition_index.get(to),
            ) {
                (Some(&place), _, _, Some(&transition)) => {
                    inputs[transition].push((place, *weight));
                    Arc::Input {
                        place,
                        transition,
                        weight: *weight,
                    }
                }
                (_, Some(&transition), Some(&place), _) => {
                    outputs[transition].push((place, *weight));
                    Arc::Output {
                        transition,
                        place,
                        weight: *weight,
                    }
                }
                (None, None, _, _) => return Err(NetError::DanglingArc(from.clone())),
                (_, _, None, None) => return Err(NetError::DanglingArc(to.clone())),
                _ => return Err(NetError::NotBipartite(from.clone(), to.clone())),
            };
            arcs.push(arc);
        }

        let lookup = |id: &Option<String>, missing: NetError| -> Result<usize> {
            let id = id.as_ref().ok_or(missing)?;
            place_index
                .get(id)
                .copied()
                .ok_or_else(|| NetError::UnknownPlace(id.clone()))
        };
        let source = lookup(&self.source, NetError::MissingSource)?;
        let sink = lookup(&self.sink, NetError::MissingSink)?;
        if arcs
            .iter()
            .any(|a| matches!(a, Arc::Output { place, .. } if *place == source))
        {
            return Err(NetError::SourceHasInput(self.places[source].clone()));
        }
        if arcs
            .iter()
            .any(|a| matches!(a, Arc::Input { place, .. } if *place == sink))
        {
            return Err(NetError::SinkHasOutput(self.places[sink].clone()));
        }

        let mut initial_marking = Marking::empty(self.places.len());
        if self.tokens.is_empty() {
            initial_marking.set(source, 1);
        }
        for (id, n) in &self.tokens {
            let p = place_index
                .get(id)
                .ok_or_else(|| NetError::UnknownPlace(id.clone()))?;
            initial_marking.set(*p, *n);
        }

        let mut hidden_order: Vec<usize> = (0..self.transitions.len())
            .filter(|&t| self.transitions[t].1.is_none())
            .collect();
        hidden_order.sort_by(|&a, &b| self.transitions[a].0.cmp(&self.transitions[b].0));

        Ok(PetriNet {
            places: self
                .places
                .iter()
                .map(|id| Place { id: id.clone() })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|(id, label)| Transition {
                    id: id.clone(),
                    label: label.clone(),
                })
                .collect(),
            arcs,
            initial_marking,
            source,
            sink,
            inputs,
            outputs,
            place_index,
            transition_index,
            by_label,
            hidden_order,
        })
    }
}

/// For each place, the visible labels of transitions that produce into or
/// consume from it.
pub fn place_provenance(net: &PetriNet) -> Vec<Vec<String>> {
    let mut labels: Vec<BTreeMap<String, ()>> = vec![BTreeMap::new(); net.places.len()];
    for arc in &net.arcs {
        let (place, transition) = match *arc {
            Arc::Input {
                place, transition, ..
            }
            | Arc::Output {
                place, transition, ..
            } => (place, transition),
        };
        if let Some(label) = &net.transitions[transition].label {
            labels[place].insert(label.clone(), ());
        }
    }
    labels
        .into_iter()
        .map(|m| m.into_keys().collect())
        .collect()
}

impl fmt::Display for PetriNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} places, {} visible / {} hidden transitions, {} arcs",
            self.places.len(),
            self.visible_count(),
            self.hidden_order.len(),
            self.arcs.len()
        )
    }
}
