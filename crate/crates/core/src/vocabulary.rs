//! The careflow event vocabulary: three admission types, in/out events for
//! five care units, normal and abnormal flags for seventeen lab items, and the
//! two exit events. 49 names in total.
//!
//! The emergency admission appears as `ADM EMERGENCY` in some source
//! material; it is canonicalized here to `ADM_EMERGENCY` to match the other
//! admission labels. Use [`canonicalize`] when ingesting external names.

use serde::{Deserialize, Serialize};

pub const ADMISSION_EVENTS: [&str; 3] = ["ADM_EMERGENCY", "ADM_ELECTIVE", "ADM_URGENT"];

pub const CARE_UNITS: [&str; 5] = ["CCU", "CSRU", "MICU", "SICU", "TSICU"];

pub const LAB_ITEMS: [&str; 17] = [
    "albumin",
    "aniongap",
    "bicarbonate",
    "bilirubin",
    "bun",
    "creatinine",
    "glucose",
    "hematocrit",
    "hemoglobin",
    "inr",
    "lactate",
    "platelet",
    "potassium",
    "pt",
    "ptt",
    "sodium",
    "wbc",
];

pub const DEATH: &str = "DEATH";
pub const DISCHARGE: &str = "DISCH";

const ABNORMAL_SUFFIX: &str = "_abn";

/// Clinical category of an event name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventCategory {
    Admission,
    CareUnit,
    Lab,
    Exit,
}

impl EventCategory {
    /// Category of `name`, or `None` for names outside the vocabulary.
    pub fn of(name: &str) -> Option<Self> {
        if ADMISSION_EVENTS.contains(&name) {
            Some(Self::Admission)
        } else if name == DEATH || name == DISCHARGE {
            Some(Self::Exit)
        } else if let Some(unit) = name
            .strip_prefix("ICU_in_")
            .or_else(|| name.strip_prefix("ICU_out_"))
        {
            CARE_UNITS.contains(&unit).then_some(Self::CareUnit)
        } else {
            let base = name.strip_suffix(ABNORMAL_SUFFIX).unwrap_or(name);
            LAB_ITEMS.contains(&base).then_some(Self::Lab)
        }
    }
}

pub fn care_unit_in(unit: &str) -> String {
    format!("ICU_in_{unit}")
}

pub fn care_unit_out(unit: &str) -> String {
    format!("ICU_out_{unit}")
}

pub fn lab_event(item: &str, abnormal: bool) -> String {
    if abnormal {
        format!("{item}{ABNORMAL_SUFFIX}")
    } else {
        item.to_string()
    }
}

pub fn is_abnormal_lab(name: &str) -> bool {
    name.strip_suffix(ABNORMAL_SUFFIX)
        .is_some_and(|base| LAB_ITEMS.contains(&base))
}

pub fn is_exit(name: &str) -> bool {
    name == DEATH || name == DISCHARGE
}

/// Maps spacing variants (`ADM EMERGENCY`, `ICU_in_ TSICU`) onto the
/// underscore form used throughout the crate.
pub fn canonicalize(name: &str) -> String {
    let trimmed = name.trim();
    if trimmed.contains(' ') {
        let parts: Vec<&str> = trimmed
            .split([' ', '_'])
            .filter(|p| !p.is_empty())
            .collect();
        parts.join("_")
    } else {
        trimmed.to_string()
    }
}

/// All 49 event names in a fixed order: admissions, care units (in then out
/// per unit), labs (normal then abnormal per item), exits.
pub fn all_events() -> Vec<String> {
    let mut names: Vec<String> = ADMISSION_EVENTS.iter().map(|s| s.to_string()).collect();
    for unit in CARE_UNITS {
        names.push(care_unit_in(unit));
        names.push(care_unit_out(unit));
    }
    for item in LAB_ITEMS {
        names.push(lab_event(item, false));
        names.push(lab_event(item, true));
    }
    names.push(DEATH.to_string());
    names.push(DISCHARGE.to_string());
    names
}
