//! Exact Shapley attribution over groups of model input columns.
//!
//! A coalition `S` of groups is evaluated by replacing every column of the
//! groups outside `S` with its training-set mean and averaging the predicted
//! probability over the rows. Columns in no group keep their real values in
//! every coalition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NetworkWeights, PredictionDataset};
use crate::petrinet::PetriNet;
use crate::scalar::Scalar;
use crate::vocabulary::EventCategory;

/// Coalition enumeration is `2^k`; beyond this it stops being cheap.
pub const MAX_GROUPS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("{0} groups exceed the limit of {MAX_GROUPS}")]
    TooManyGroups(usize),
    #[error("no rows to explain")]
    Empty,
    #[error("provenance covers {found} places, net has {expected}")]
    MissingProvenance { expected: usize, found: usize },
    #[error("column {column} is outside the {width}-column input")]
    ColumnOutOfRange { column: usize, width: usize },
    #[error("column {0} belongs to more than one group")]
    Overlap(usize),
    #[error("row has {found} columns, expected {expected}")]
    Width { expected: usize, found: usize },
    #[error("unknown feature group `{0}`")]
    UnknownGroup(String),
}

pub type Result<T, E = ExplainError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Demographics,
    LabMeasurementTypes,
    AdmissionTypes,
    CareUnitTypes,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Demographics,
        FeatureGroup::LabMeasurementTypes,
        FeatureGroup::AdmissionTypes,
        FeatureGroup::CareUnitTypes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Demographics => "Demographics",
            FeatureGroup::LabMeasurementTypes => "LabMeasurementTypes",
            FeatureGroup::AdmissionTypes => "AdmissionTypes",
            FeatureGroup::CareUnitTypes => "CareUnitTypes",
        }
    }

    fn for_category(c: EventCategory) -> Option<Self> {
        match c {
            EventCategory::Admission => Some(FeatureGroup::AdmissionTypes),
            EventCategory::CareUnit => Some(FeatureGroup::CareUnitTypes),
            EventCategory::Lab => Some(FeatureGroup::LabMeasurementTypes),
            EventCategory::Exit => None,
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| ExplainError::UnknownGroup(s.to_string()))
    }
}

/// A named set of input columns acting as one Shapley player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Partition of the `3|P| + demographics` model input into the clinical
/// groups plus an ungrouped remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub width: usize,
    pub groups: BTreeMap<FeatureGroup, Vec<usize>>,
    pub ungrouped: Vec<usize>,
}

impl GroupAssignment {
    /// The four clinical groups in their fixed order, empty ones included.
    pub fn column_groups(&self) -> Vec<ColumnGroup> {
        FeatureGroup::ALL
            .iter()
            .map(|g| ColumnGroup {
                name: g.name().to_string(),
                columns: self.groups.get(g).cloned().unwrap_or_default(),
            })
            .collect()
    }

    /// Every column in exactly one group or in the remainder.
    pub fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.width];
        for &c in self.groups.values().flatten().chain(&self.ungrouped) {
            let slot = seen.get_mut(c).ok_or(ExplainError::ColumnOutOfRange {
                column: c,
                width: self.width,
            })?;
            if *slot {
                return Err(ExplainError::Overlap(c));
            }
            *slot = true;
        }
        match seen.iter().position(|s| !s) {
            Some(c) => Err(ExplainError::ColumnOutOfRange {
                column: c,
                width: self.width,
            }),
            None => Ok(()),
        }
    }
}

/// Group of a place from the visible labels around it: the single most
/// frequent event category, or `None` for exits, ties and unlabeled places.
fn dominant_group(labels: &[String]) -> Option<FeatureGroup> {
    let mut counts: BTreeMap<EventCategory, usize> = BTreeMap::new();
    for label in labels {
        if let Some(c) = EventCategory::of(label) {
            *counts.entry(c).or_default() += 1;
        }
    }
    let best = *counts.values().max()?;
    let mut winners = counts.iter().filter(|&(_, &n)| n == best);
    let (&category, _) = winners.next()?;
    if winners.next().is_some() {
        return None;
    }
    FeatureGroup::for_category(category)
}

/// Place `p` owns the columns `p`, `P + p` and `2P + p` (decay, count,
/// marking); demographic columns follow at `3P..3P + demo_width`.
pub fn assign_groups(
    net: &PetriNet,
    provenance: &[Vec<String>],
    demo_width: usize,
) -> Result<GroupAssignment> {
    let places = net.places().len();
    if provenance.len() != places {
        return Err(ExplainError::MissingProvenance {
            expected: places,
            found: provenance.len(),
        });
    }
    let mut groups: BTreeMap<FeatureGroup, Vec<usize>> =
        FeatureGroup::ALL.iter().map(|&g| (g, Vec::new())).collect();
    let mut ungrouped = Vec::new();
    for block in 0..3 {
        for (p, labels) in provenance.iter().enumerate() {
            let column = block * places + p;
            match dominant_group(labels) {
                Some(g) => groups.get_mut(&g).expect("all groups present").push(column),
                None => ungrouped.push(column),
            }
        }
    }
    groups
        .get_mut(&FeatureGroup::Demographics)
        .expect("all groups present")
        .extend(3 * places..3 * places + demo_width);
    let assignment = GroupAssignment {
        width: 3 * places + demo_width,
        groups,
        ungrouped,
    };
    assignment.check()?;
    Ok(assignment)
}

/// Exact Shapley values of a `players`-player game.
///
/// `value` receives a coalition as a bitmask (bit `i` set when player `i`
/// is in) and is called once per coalition. The weight of a coalition of
/// size `s` is `s!(k − s − 1)!/k!`.
pub fn shapley_values<V, F>(players: usize, mut value: F) -> Result<Vec<V>>
where
    V: Num + Clone + FromPrimitive,
    F: FnMut(u32) -> V,
{
    if players > MAX_GROUPS {
        return Err(ExplainError::TooManyGroups(players));
    }
    let values: Vec<V> = (0..1u32 << players).map(&mut value).collect();
    let factorial = |n: usize| -> V {
        (1..=n).fold(V::one(), |acc, i| {
            acc * V::from_usize(i).expect("small factorial")
        })
    };
    let k_fact = factorial(players);
    let weights: Vec<V> = (0..players)
        .map(|s| factorial(s) * factorial(players - s - 1) / k_fact.clone())
        .collect();
    let mut phi = vec![V::zero(); players];
    for (i, slot) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << players {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let marginal = values[(mask | bit) as usize].clone() - values[mask as usize].clone();
            *slot = slot.clone() + weights[size].clone() * marginal;
        }
    }
    Ok(phi)
}

/// Anything that maps a concatenated model input row to a probability.
pub trait Predictor<T> {
    fn width(&self) -> usize;
    fn predict(&self, row: &[T]) -> T;
}

impl<T: Scalar> Predictor<T> for NetworkWeights<T> {
    fn width(&self) -> usize {
        self.tss_width() + crate::model::DEMOGRAPHIC_WIDTH
    }

    fn predict(&self, row: &[T]) -> T {
        let (tss, demo) = row.split_at(self.tss_width());
        self.forward(tss, demo)
            .expect("row width checked by caller")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAttribution {
    pub phi: BTreeMap<String, f64>,
    /// `v(∅)`: every group masked.
    pub baseline_value: f64,
    /// `v(G)`: no group masked.
    pub full_value: f64,
}

impl GroupAttribution {
    /// `Σφ − (v(G) − v(∅))`, zero up to rounding.
    pub fn efficiency_gap(&self) -> f64 {
        self.phi.values().sum::<f64>() - (self.full_value - self.baseline_value)
    }
}

/// Mean prediction over `rows` with the columns of every group outside
/// `mask` replaced by `baseline`.
fn coalition_value<T: Scalar, P: Predictor<T>>(
    model: &P,
    rows: &[Vec<T>],
    baseline: &[T],
    groups: &[ColumnGroup],
    mask: u32,
) -> f64 {
    let masked: Vec<usize> = groups
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) == 0)
        .flat_map(|(_, g)| g.columns.iter().copied())
        .collect();
    let mut buf = Vec::new();
    let total: f64 = rows
        .iter()
        .map(|row| {
            buf.clear();
            buf.extend_from_slice(row);
            for &c in &masked {
                buf[c] = baseline[c];
            }
            model.predict(&buf).as_f64()
        })
        .sum();
    total / rows.len() as f64
}

pub fn shapley_groups<T: Scalar, P: Predictor<T>>(
    model: &P,
    rows: &[Vec<T>],
    baseline: &[T],
    groups: &[ColumnGroup],
) -> Result<GroupAttribution> {
    if groups.len() > MAX_GROUPS {
        return Err(ExplainError::TooManyGroups(groups.len()));
    }
    if rows.is_empty() {
        return Err(ExplainError::Empty);
    }
    let width = model.width();
    for r in rows.iter().map(Vec::as_slice).chain([baseline]) {
        if r.len() != width {
            return Err(ExplainError::Width {
                expected: width,
                found: r.len(),
            });
        }
    }
    let mut seen = BTreeSet::new();
    for &c in groups.iter().flat_map(|g| &g.columns) {
        if c >= width {
            return Err(ExplainError::ColumnOutOfRange { column: c, width });
        }
        if !seen.insert(c) {
            return Err(ExplainError::Overlap(c));
        }
    }

    let k = groups.len();
    let mut values = vec![0.0; 1 << k];
    let phi = shapley_values::<f64, _>(k, |mask| {
        let v = coalition_value(model, rows, baseline, groups, mask);
        values[mask as usize] = v;
        v
    })?;
    Ok(GroupAttribution {
        phi: groups.iter().map(|g| g.name.clone()).zip(phi).collect(),
        baseline_value: values[0],
        full_value: values[(1 << k) - 1],
    })
}

/// Attribution of a trained network on a dataset, masking with the
/// training-set column means.
pub fn explain_network<T: Scalar>(
    weights: &NetworkWeights<T>,
    data: &PredictionDataset<T>,
    training_means: &[T],
    assignment: &GroupAssignment,
) -> Result<GroupAttribution> {
    assignment.check()?;
    let rows: Vec<Vec<T>> = (0..data.len()).map(|i| data.row(i)).collect();
    shapley_groups(weights, &rows, training_means, &assignment.column_groups())
}

/// Group names by `|φ|`, largest first, ties broken by name.
pub fn rank_groups(attr: &GroupAttribution) -> Vec<String> {
    let mut entries: Vec<(&String, f64)> = attr.phi.iter().map(|(g, &v)| (g, v)).collect();
    entries.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(g, _)| g.clone()).collect()
}

/// `shap.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub phi: BTreeMap<String, f64>,
    pub baseline_value: f64,
    pub full_value: f64,
    pub ranking: Vec<String>,
}

impl From<GroupAttribution> for ExplainReport {
    fn from(attr: GroupAttribution) -> Self {
        let ranking = rank_groups(&attr);
        ExplainReport {
            phi: attr.phi,
            baseline_value: attr.baseline_value,
            full_value: attr.full_value,
            ranking,
        }
    }
}
