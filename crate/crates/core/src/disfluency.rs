//! Disfluency detection and scoring: fillers, repetitions, revisions.
//!
//! Fillers and repetitions are detected mechanically from token sequences.
//! Revisions are human judgments and therefore arrive as annotations (token
//! spans over the normalized reference); the module scores how well a
//! hypothesis preserved each annotated span but never tries to detect
//! revisions itself.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align, project_span, AlignError, Alignment, BoundaryRule};
use crate::metrics;
use crate::textnorm::{NormalizationConfig, TokenSequence};

#[derive(Debug, Error)]
pub enum DisfluencyError {
    #[error("filler detection rate undefined: ground truth has no fillers")]
    NoReferenceFillers,
    #[error("repetition retention rate undefined: ground truth has no repetitions")]
    NoReferenceRepetitions,
    #[error("invalid revision span: {0}")]
    InvalidSpan(#[from] AlignError),
    #[error("cannot read annotations {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse annotations {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Filler occurrences in one token sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerCount {
    pub count: usize,
    pub positions: Vec<usize>,
}

/// Counts every filler token, including vendor-only fillers with no
/// counterpart in the reference.
pub fn count_fillers(seq: &TokenSequence, config: &NormalizationConfig) -> FillerCount {
    let positions: Vec<usize> = seq
        .tokens()
        .iter()
        .enumerate()
        .filter(|(_, token)| config.filler_tokens.contains(token.as_str()))
        .map(|(i, _)| i)
        .collect();
    FillerCount {
        count: positions.len(),
        positions,
    }
}

/// Hypothesis filler count over reference filler count. May exceed 1 when a
/// vendor over-detects. Undefined when the reference has none.
pub fn filler_detection_rate(ref_total: usize, hyp_total: usize) -> Result<f64, DisfluencyError> {
    if ref_total == 0 {
        return Err(DisfluencyError::NoReferenceFillers);
    }
    Ok(hyp_total as f64 / ref_total as f64)
}

/// One maximal run of an immediately repeated 1- or 2-token unit.
///
/// `tokens[start .. start + copies * unit.len()]` equals `unit` repeated
/// `copies` times; a run of c copies counts as c − 1 repetition events.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repetition {
    pub unit: Vec<String>,
    pub start: usize,
    pub copies: usize,
}

impl Repetition {
    /// Repetition events contributed by this run (c − 1).
    pub fn events(&self) -> usize {
        self.copies - 1
    }

    /// Inclusive index of the run's last token.
    pub fn ref_end(&self) -> usize {
        self.start + self.copies * self.unit.len() - 1
    }
}

/// Finds immediate exact repetitions of 1- or 2-token units.
///
/// Greedy left-to-right scan: at each position a repeating 2-token unit is
/// preferred over a repeating 1-token unit (so "on the on the" is one event,
/// not two), runs are extended maximally, and the scan resumes after the
/// run, which makes runs non-overlapping. Fillers participate like ordinary
/// tokens.
pub fn detect_repetitions(seq: &TokenSequence) -> Vec<Repetition> {
    let tokens = seq.tokens();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut advanced = false;
        for unit_len in [2usize, 1] {
            if i + 2 * unit_len > tokens.len()
                || tokens[i..i + unit_len] != tokens[i + unit_len..i + 2 * unit_len]
            {
                continue;
            }
            let mut copies = 2;
            while {
                let next = i + copies * unit_len;
                next + unit_len <= tokens.len()
                    && tokens[next..next + unit_len] == tokens[i..i + unit_len]
            } {
                copies += 1;
            }
            runs.push(Repetition {
                unit: tokens[i..i + unit_len].to_vec(),
                start: i,
                copies,
            });
            i += copies * unit_len;
            advanced = true;
            break;
        }
        if !advanced {
            i += 1;
        }
    }
    runs
}

/// Whether the hypothesis preserved a reference repetition.
///
/// True iff the hypothesis range that [`project_span`] associates with the
/// run itself contains an immediate exact repetition of some unit of the
/// same length — the surface form may differ from the reference unit, so a
/// consistently substituted repeated word still counts as retained. A fully
/// deleted run is never retained.
///
/// The repetition must lie inside the alignment's reference sequence.
pub fn repetition_retained(
    alignment: &Alignment,
    rep: &Repetition,
    hypothesis: &TokenSequence,
) -> bool {
    let projected = project_span(
        alignment,
        rep.start,
        rep.ref_end(),
        BoundaryRule::InsideOnly,
    )
    .expect("repetition lies inside the aligned reference");
    let Some((lo, hi)) = projected else {
        return false;
    };
    let window = &hypothesis.tokens()[lo..=hi];
    let unit_len = rep.unit.len();
    window
        .windows(2 * unit_len)
        .any(|pair| pair[..unit_len] == pair[unit_len..])
}

/// Retained over total, in [0, 1]. Undefined when the reference has no
/// repetitions.
pub fn repetition_retention_rate(retained: usize, total: usize) -> Result<f64, DisfluencyError> {
    if total == 0 {
        return Err(DisfluencyError::NoReferenceRepetitions);
    }
    Ok(retained as f64 / total as f64)
}

/// An annotated revision: an inclusive token span over the normalized
/// reference sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionSpan {
    pub ref_start: usize,
    pub ref_end: usize,
    pub label: String,
}

/// Loads revision annotations for one recording: a JSON array of
/// `{ref_start, ref_end, label}` objects with indices into the normalized
/// reference.
pub fn load_revision_annotations(path: &Path) -> Result<Vec<RevisionSpan>, DisfluencyError> {
    let text = fs::read_to_string(path).map_err(|source| DisfluencyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| DisfluencyError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Scores one annotated revision span: projects the span onto the
/// hypothesis, re-aligns the two sub-sequences locally, and returns
/// `(mer, accuracy)` of the local alignment. A span whose tokens were all
/// deleted scores mer 1.0.
pub fn score_revision(
    reference: &TokenSequence,
    hypothesis: &TokenSequence,
    span: &RevisionSpan,
    alignment: &Alignment,
) -> Result<(f64, f64), DisfluencyError> {
    let projected = project_span(
        alignment,
        span.ref_start,
        span.ref_end,
        BoundaryRule::InsideOnly,
    )?;
    let Some((lo, hi)) = projected else {
        return Ok((1.0, 0.0));
    };
    let local_ref = reference.slice(span.ref_start, span.ref_end);
    let local_hyp = hypothesis.slice(lo, hi);
    let local = align(&local_ref, &local_hyp);
    let mer = metrics::mer(&local.counts).expect("revision span is nonempty");
    Ok((mer, 1.0 - mer))
}

/// Score for one annotated revision span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevisionScore {
    pub span: RevisionSpan,
    pub mer: f64,
    pub accuracy: f64,
}

/// Per-recording disfluency summary.
///
/// The raw counts are carried alongside the rates so corpus-level rates can
/// be computed from summed counts rather than averaged ratios. Rates are
/// `None` when their reference denominator is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisfluencyReport {
    pub filler_detection_rate: Option<f64>,
    pub repetition_retention_rate: Option<f64>,
    pub revision_scores: Vec<RevisionScore>,
    pub reference_fillers: usize,
    pub hypothesis_fillers: usize,
    /// Total reference repetition events (c − 1 per run of c copies).
    pub repetition_events: usize,
    /// Events belonging to retained runs.
    pub retained_repetition_events: usize,
}

/// Runs the full disfluency analysis for one recording: filler counts on
/// both sides, repetition retention, and scores for the provided revision
/// annotations.
pub fn analyze_recording(
    reference: &TokenSequence,
    hypothesis: &TokenSequence,
    config: &NormalizationConfig,
    revisions: &[RevisionSpan],
) -> Result<DisfluencyReport, DisfluencyError> {
    let alignment = align(reference, hypothesis);
    let reference_fillers = count_fillers(reference, config).count;
    let hypothesis_fillers = count_fillers(hypothesis, config).count;

    let runs = detect_repetitions(reference);
    let repetition_events: usize = runs.iter().map(Repetition::events).sum();
    let retained_repetition_events: usize = runs
        .iter()
        .filter(|rep| repetition_retained(&alignment, rep, hypothesis))
        .map(Repetition::events)
        .sum();

    let mut revision_scores = Vec::with_capacity(revisions.len());
    for span in revisions {
        let (mer, accuracy) = score_revision(reference, hypothesis, span, &alignment)?;
        revision_scores.push(RevisionScore {
            span: span.clone(),
            mer,
            accuracy,
        });
    }

    Ok(DisfluencyReport {
        filler_detection_rate: filler_detection_rate(reference_fillers, hypothesis_fillers).ok(),
        repetition_retention_rate: repetition_retention_rate(
            retained_repetition_events,
            repetition_events,
        )
        .ok(),
        revision_scores,
        reference_fillers,
        hypothesis_fillers,
        repetition_events,
        retained_repetition_events,
    })
}
