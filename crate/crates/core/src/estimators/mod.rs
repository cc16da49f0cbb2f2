//! Point-to-point dependence measures.

mod batch;
mod digamma;
mod kdtree;
mod kraskov;
mod ppmcc;

pub use batch::{batch_correlate, batch_correlate_with_threads, BatchOutput};
pub use digamma::{digamma, digamma_unchecked};
pub use kdtree::KdTree2;
pub use kraskov::{
    default_k, jitter_duplicates, knn_chebyshev, knn_chebyshev_brute, kraskov_mi, kraskov_mi_with, JointSampleSet,
    KnnResult,
};
pub use ppmcc::{ppmcc, CenteredSeries};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which dependence measure to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    /// Pearson product-moment correlation, in [-1, 1].
    #[serde(rename = "ppmcc", alias = "PPMCC")]
    Ppmcc,
    /// Kraskov k-NN mutual information estimate in nats.
    #[serde(rename = "kmi", alias = "KMI")]
    Kmi,
}

impl MeasureKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::Ppmcc => "ppmcc",
            MeasureKind::Kmi => "kmi",
        }
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64, EstimatorError> {
        match self {
            MeasureKind::Ppmcc => ppmcc(x, y),
            MeasureKind::Kmi => kraskov_mi(x, y, None),
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ppmcc" | "pearson" => Ok(MeasureKind::Ppmcc),
            "kmi" | "mi" | "kraskov" => Ok(MeasureKind::Kmi),
            other => Err(format!("unknown measure {other:?} (expected ppmcc or kmi)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EstimatorError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("zero variance: correlation undefined")]
    ZeroVariance,
    #[error("constant series: distribution is degenerate")]
    Degenerate,
    #[error("neighbour order k={k} invalid for {n} samples")]
    InvalidK { k: usize, n: usize },
    #[error("digamma domain error at {0}")]
    Domain(f64),
    #[error("non-finite input")]
    NonFinite,
}
