//! Two-branch dense classifier.
//!
//! ```text
//! timed state sample (3|P|) -> dense 76 -> dropout -> dense 20 ─┐
//!                                                                ├─ concat 25 -> dense 96 -> dropout -> dense 10 -> dense 1 -> sigmoid
//! demographics (6)          -> dense 5 ─────────────────────────┘
//! ```
//!
//! Hidden layers use rectifiers, dropout is inverted (scaled by `1/(1-d)`
//! while training, identity at inference) and training minimizes binary
//! cross-entropy with mini-batch RMSprop.

mod dataset;
mod io;
mod network;
mod train;

use thiserror::Error;

pub use dataset::{read_dataset_csv, write_dataset_csv, PredictionDataset};
pub use io::{read_weights, write_weights};
pub use network::{Dense, ForwardCache, NetworkWeights};
pub use train::{predict_proba, train, EpochRecord, TrainConfig, TrainOutcome};

use crate::eventlog::{Demographics, Insurance};
use crate::scalar::Scalar;

pub const TSS_HIDDEN: usize = 76;
pub const TSS_OUT: usize = 20;
pub const DEMO_HIDDEN: usize = 5;
pub const HEAD_HIDDEN: usize = 96;
pub const HEAD_OUT: usize = 10;

/// Age plus a one-hot insurance category.
pub const DEMOGRAPHIC_WIDTH: usize = 1 + Insurance::ALL.len();

/// Ages enter the network in centuries so every input is O(1).
pub const AGE_SCALE: f64 = 100.0;

pub fn encode_demographics<T: Scalar>(d: &Demographics) -> [T; DEMOGRAPHIC_WIDTH] {
    let mut v = [T::zero(); DEMOGRAPHIC_WIDTH];
    v[0] = T::lit(f64::from(d.age) / AGE_SCALE);
    v[1 + d.insurance.index()] = T::one();
    v
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {what} width {expected}, got {found}")]
    Width {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("label {0} is not 0 or 1")]
    Label(u8),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("{0} set is empty")]
    Empty(&'static str),
    #[error("validation set must contain both classes")]
    SingleClassValidation,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
