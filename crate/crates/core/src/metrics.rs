//! Scalar metrics over alignment error counts: WER, MER, accuracy, and
//! efficiency.
//!
//! WER = (S + D + I) / (S + D + H) and may exceed 1; MER = (S + D + I) /
//! (S + D + H + I) is a proper error probability in [0, 1], and accuracy is
//! its complement. Efficiency divides accuracy by processing time.
//!
//! Undefined metrics are errors, never 0 or NaN: a silent zero from an empty
//! reference would corrupt every mean built on top of it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::ErrorCounts;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("word error rate undefined: reference is empty (H + S + D = 0)")]
    EmptyReference,
    #[error("match error rate undefined: both sequences are empty")]
    BothEmpty,
    #[error("invalid measurement: processing time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("match error rate {0} outside [0, 1]")]
    MerOutOfRange(f64),
}

/// All scalar scores for one reference/hypothesis pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub wer: f64,
    pub mer: f64,
    /// 1 − MER.
    pub accuracy: f64,
    pub counts: ErrorCounts,
}

/// Accuracy per second of processing time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyScore {
    /// accuracy / processing_time, in 1/s.
    pub value: f64,
    pub accuracy: f64,
    /// Seconds, > 0.
    pub processing_time: f64,
}

/// Word error rate (S + D + I) / (S + D + H). Errors on an empty reference.
pub fn wer(counts: &ErrorCounts) -> Result<f64, MetricError> {
    let denominator = counts.reference_len();
    if denominator == 0 {
        return Err(MetricError::EmptyReference);
    }
    Ok(counts.total_errors() as f64 / denominator as f64)
}

/// Match error rate (S + D + I) / (S + D + H + I). Errors when both
/// sequences are empty.
pub fn mer(counts: &ErrorCounts) -> Result<f64, MetricError> {
    let denominator = counts.total_errors() + counts.hits;
    if denominator == 0 {
        return Err(MetricError::BothEmpty);
    }
    Ok(counts.total_errors() as f64 / denominator as f64)
}

/// Computes WER, MER, and accuracy together. Requires a nonempty reference
/// (which also makes MER defined).
pub fn score(counts: &ErrorCounts) -> Result<ScoreReport, MetricError> {
    let wer = wer(counts)?;
    let mer = mer(counts)?;
    Ok(ScoreReport {
        wer,
        mer,
        accuracy: 1.0 - mer,
        counts: *counts,
    })
}

/// Efficiency (1 − mer) / processing_time. `processing_time` is seconds and
/// must be positive; `mer` must lie in [0, 1].
pub fn efficiency(mer: f64, processing_time: f64) -> Result<EfficiencyScore, MetricError> {
    if processing_time.is_nan() || processing_time <= 0.0 {
        return Err(MetricError::NonpositiveTime(processing_time));
    }
    if !(0.0..=1.0).contains(&mer) {
        return Err(MetricError::MerOutOfRange(mer));
    }
    let accuracy = 1.0 - mer;
    Ok(EfficiencyScore {
        value: accuracy / processing_time,
        accuracy,
        processing_time,
    })
}
