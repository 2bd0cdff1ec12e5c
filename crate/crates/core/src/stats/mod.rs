//! Statistical procedures over evaluation records: descriptive aggregates,
//! Friedman test with Kendall's W, paired t-test, Spearman rank
//! correlation, and chi-square homogeneity.
//!
//! Everything here is pure and deterministic. P-values come from the
//! hand-rolled tail functions in [`special`]; test statistics are validated
//! in unit tests against independent oracles (count-based ranking,
//! alternative summation algorithms) and frozen reference values.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendId, DisfluencyCondition};
use crate::corpus::{Gender, SpeechType};
use crate::report::EvaluationRecord;
use special::{chi_square_sf, student_t_two_sided};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty group: no records match the key")]
    EmptyGroup,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix has missing cells: {0}")]
    MissingCells(String),
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("degenerate test: {0}")]
    DegenerateTest(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("degenerate margins: {0}")]
    DegenerateMargins(String),
}

/// Selects a slice of evaluation records by any combination of system, L1,
/// gender, disfluency condition, and speech type. At least one field must
/// be set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupKey {
    pub system: Option<BackendId>,
    pub l1: Option<String>,
    pub gender: Option<Gender>,
    pub condition: Option<DisfluencyCondition>,
    pub speech_type: Option<SpeechType>,
}

impl GroupKey {
    pub fn is_empty(&self) -> bool {
        self.system.is_none()
            && self.l1.is_none()
            && self.gender.is_none()
            && self.condition.is_none()
            && self.speech_type.is_none()
    }

    /// True when the record carries every field this key constrains, with
    /// matching values.
    pub fn matches(&self, record: &EvaluationRecord) -> bool {
        if let Some(system) = self.system {
            if record.backend_id != system {
                return false;
            }
        }
        if let Some(l1) = &self.l1 {
            if record.l1.as_deref() != Some(l1.as_str()) {
                return false;
            }
        }
        if let Some(gender) = self.gender {
            if record.gender != Some(gender) {
                return false;
            }
        }
        if let Some(condition) = self.condition {
            if record.condition != condition {
                return false;
            }
        }
        if let Some(speech_type) = self.speech_type {
            if record.speech_type != Some(speech_type) {
                return false;
            }
        }
        true
    }
}

/// Mean and sample standard deviation of one group of values. `sd` is
/// `None` when fewer than two values exist (sample sd undefined).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub sd: Option<f64>,
    pub n: usize,
}

/// Outcome of a hypothesis test. `df2` is used by tests with paired degrees
/// of freedom; `effect_size` carries Kendall's W for the Friedman test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub df2: Option<f64>,
    pub p_value: f64,
    pub effect_size: Option<f64>,
}

/// Arithmetic mean and sample standard deviation (n−1 denominator).
pub fn mean_sd(values: &[f64]) -> Result<GroupStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(format!("index {pos}")));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(GroupStats { mean, sd, n })
}

/// Mean/sd/n of the MER of the records selected by `key`. Records without
/// a MER (failed evaluations) are excluded; an empty selection is an error.
pub fn group_mean_sd(
    records: &[EvaluationRecord],
    key: &GroupKey,
) -> Result<GroupStats, StatsError> {
    if key.is_empty() {
        return Err(StatsError::ShapeMismatch(
            "group key must constrain at least one field".into(),
        ));
    }
    let values: Vec<f64> = records
        .iter()
        .filter(|r| key.matches(r))
        .filter_map(|r| r.mer)
        .collect();
    mean_sd(&values)
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average of ranks i+1..=j+1.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &index in &order[i..=j] {
            ranks[index] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman rank test over a subjects × treatments matrix, with
/// average-rank tie handling and Kendall's W = χ²/(n·(k−1)) as effect size.
///
/// χ² = 12/(n·k·(k+1)) · Σ R_j² − 3·n·(k+1), where R_j is the rank sum of
/// treatment j. No tie-variance correction is applied; W is then exactly
/// the mean-rank concordance in [0, 1].
pub fn friedman(matrix: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(StatsError::ShapeMismatch(format!(
            "need at least 2 subjects, got {n}"
        )));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(StatsError::ShapeMismatch(format!(
            "need at least 2 treatments, got {k}"
        )));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::MissingCells(format!(
                "row {i} has {} cells, expected {k}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(format!("row {i}, column {j}")));
        }
    }

    let mut rank_sums = vec![0.0; k];
    for row in matrix {
        for (j, rank) in average_ranks(row).into_iter().enumerate() {
            rank_sums[j] += rank;
        }
    }
    let n_f = n as f64;
    let k_f = k as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    // Floating-point cancellation can leave a tiny negative where the true
    // statistic is zero.
    let chi2 = (12.0 / (n_f * k_f * (k_f + 1.0)) * sum_sq - 3.0 * n_f * (k_f + 1.0)).max(0.0);
    let w = (chi2 / (n_f * (k_f - 1.0))).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: chi2,
        df: k_f - 1.0,
        df2: None,
        p_value: chi_square_sf(chi2, k_f - 1.0),
        effect_size: Some(w),
    })
}

/// Paired t-test: t = mean(d) / (sd(d)/√n) with d = x − y, df = n−1,
/// two-sided p.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::ShapeMismatch(format!(
            "paired samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::ShapeMismatch(format!(
            "need at least 2 pairs, got {n}"
        )));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let stats = mean_sd(&d)?;
    let sd = stats.sd.expect("n >= 2 guarantees sd");
    if sd == 0.0 {
        return Err(StatsError::DegenerateTest(
            "differences have zero variance".into(),
        ));
    }
    let t = stats.mean / (sd / (n as f64).sqrt());
    let df = (n - 1) as f64;
    Ok(TestResult {
        statistic: t,
        df,
        df2: None,
        p_value: student_t_two_sided(t, df),
        effect_size: None,
    })
}

/// Spearman rank correlation: Pearson correlation of average-ranked data,
/// p-value via the t-approximation t = ρ·√((n−2)/(1−ρ²)) with df = n−2.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::ShapeMismatch(format!(
            "samples differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::ShapeMismatch(format!(
            "need at least 3 pairs, got {n}"
        )));
    }
    for (name, values) in [("x", x), ("y", y)] {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(format!("{name}[{pos}]")));
        }
        if values.iter().all(|v| *v == values[0]) {
            return Err(StatsError::UndefinedCorrelation(format!(
                "{name} is constant; its ranks have zero variance"
            )));
        }
    }

    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let mx = rx.iter().sum::<f64>() / n as f64;
    let my = ry.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..n {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    let rho = (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(TestResult {
        statistic: rho,
        df,
        df2: None,
        p_value,
        effect_size: None,
    })
}

/// Pearson chi-square test of homogeneity over an r × c table of counts,
/// expected cells from the row/column-margin independence model,
/// df = (r−1)(c−1).
pub fn chi_square_counts(observed: &[Vec<u64>]) -> Result<TestResult, StatsError> {
    let rows = observed.len();
    if rows < 2 {
        return Err(StatsError::DegenerateMargins(format!(
            "need at least 2 rows, got {rows}"
        )));
    }
    let cols = observed[0].len();
    if cols < 2 {
        return Err(StatsError::DegenerateMargins(format!(
            "need at least 2 columns, got {cols}"
        )));
    }
    for (i, row) in observed.iter().enumerate() {
        if row.len() != cols {
            return Err(StatsError::ShapeMismatch(format!(
                "row {i} has {} cells, expected {cols}",
                row.len()
            )));
        }
    }

    let row_totals: Vec<f64> = observed
        .iter()
        .map(|row| row.iter().map(|&c| c as f64).sum())
        .collect();
    let col_totals: Vec<f64> = (0..cols)
        .map(|j| observed.iter().map(|row| row[j] as f64).sum())
        .collect();
    let total: f64 = row_totals.iter().sum();
    if total == 0.0 {
        return Err(StatsError::DegenerateMargins("table sums to zero".into()));
    }

    let mut chi2 = 0.0;
    for (i, row) in observed.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let expected = row_totals[i] * col_totals[j] / total;
            if expected < 1.0 {
                return Err(StatsError::DegenerateMargins(format!(
                    "expected cell ({i},{j}) is {expected:.4} < 1 under the independence model"
                )));
            }
            let diff = count as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    let df = ((rows - 1) * (cols - 1)) as f64;
    Ok(TestResult {
        statistic: chi2,
        df,
        df2: None,
        p_value: chi_square_sf(chi2, df),
        effect_size: None,
    })
}
