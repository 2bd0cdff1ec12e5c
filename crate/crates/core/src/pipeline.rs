//! End-to-end evaluation glue: transcription outcomes + corpus metadata →
//! evaluation records.
//!
//! The CLI and integration tests share this path so the scoring behavior is
//! identical everywhere: normalize both sides, align, compute the error-rate
//! metrics and efficiency, run the disfluency analysis, and assemble one
//! [`EvaluationRecord`] per (backend, condition, recording).

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::align::{align, ErrorCounts};
use crate::backends::{
    run_batch, BackendConfig, BackendError, BackendId, BatchOutcome, DisfluencyCondition,
};
use crate::corpus::{CorpusError, Manifest};
use crate::disfluency::{
    analyze_recording, load_revision_annotations, DisfluencyError, DisfluencyReport, RevisionSpan,
};
use crate::metrics::{efficiency, score, MetricError};
use crate::report::EvaluationRecord;
use crate::textnorm::{normalize, NormalizationConfig, RawTranscript};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Disfluency(#[from] DisfluencyError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("recording {0:?} is not in the manifest")]
    UnknownRecording(String),
}

/// Everything scoring one reference/hypothesis pair produces.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPair {
    pub counts: ErrorCounts,
    pub wer: f64,
    pub mer: f64,
    pub accuracy: f64,
    pub disfluency: DisfluencyReport,
    /// The normalized hypothesis, space-joined, for auditability.
    pub hypothesis: String,
}

/// Normalizes, aligns, and scores one reference/hypothesis text pair,
/// including the disfluency analysis against the given revision spans.
pub fn score_pair(
    reference_text: &str,
    vendor_text: &str,
    vendor_label: &str,
    normalization: &NormalizationConfig,
    revisions: &[RevisionSpan],
) -> Result<ScoredPair, PipelineError> {
    let reference = normalize(&RawTranscript::reference(reference_text), normalization);
    let hypothesis = normalize(
        &RawTranscript::vendor(vendor_text, vendor_label),
        normalization,
    );
    let alignment = align(&reference, &hypothesis);
    let report = score(&alignment.counts)?;
    let disfluency = analyze_recording(&reference, &hypothesis, normalization, revisions)?;
    Ok(ScoredPair {
        counts: alignment.counts,
        wer: report.wer,
        mer: report.mer,
        accuracy: report.accuracy,
        disfluency,
        hypothesis: hypothesis.joined(),
    })
}

/// Loads the revision annotations for one recording:
/// `<annotations_dir>/<recording_id>.json`, an absent file meaning "no
/// annotated revisions".
pub fn revisions_for(
    annotations_dir: Option<&Path>,
    recording_id: &str,
) -> Result<Vec<RevisionSpan>, PipelineError> {
    let Some(dir) = annotations_dir else {
        return Ok(Vec::new());
    };
    let path = dir.join(format!("{recording_id}.json"));
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(load_revision_annotations(&path)?)
}

/// Converts one batch outcome into an evaluation record, looking the
/// recording's speaker metadata up in the manifest and reading its
/// reference transcript from disk.
pub fn record_from_outcome(
    outcome: BatchOutcome,
    manifest: &Manifest,
    normalization: &NormalizationConfig,
    annotations_dir: Option<&Path>,
) -> Result<EvaluationRecord, PipelineError> {
    let transcription = outcome.result?;
    let recording = manifest
        .recording(&outcome.recording_id)
        .ok_or_else(|| PipelineError::UnknownRecording(outcome.recording_id.clone()))?;
    let speaker = manifest
        .speaker(&recording.speaker_id)
        .ok_or_else(|| PipelineError::UnknownRecording(recording.speaker_id.clone()))?;

    let reference_text =
        std::fs::read_to_string(&recording.reference_path).map_err(|source| PipelineError::Io {
            path: recording.reference_path.clone(),
            source,
        })?;
    let revisions = revisions_for(annotations_dir, &outcome.recording_id)?;
    let scored = score_pair(
        &reference_text,
        &transcription.raw_text,
        transcription.backend_id.label(),
        normalization,
        &revisions,
    )?;
    let efficiency_value = efficiency(scored.mer, transcription.processing_time_s)?.value;

    Ok(EvaluationRecord {
        recording_id: outcome.recording_id,
        speaker_id: Some(speaker.id.clone()),
        l1: Some(speaker.l1.clone()),
        gender: Some(speaker.gender),
        speech_type: Some(recording.speech_type),
        backend_id: transcription.backend_id,
        condition: transcription.condition,
        mer: Some(scored.mer),
        wer: Some(scored.wer),
        counts: Some(scored.counts),
        processing_time_s: Some(transcription.processing_time_s),
        efficiency: Some(efficiency_value),
        disfluency: Some(scored.disfluency),
        hypothesis: Some(scored.hypothesis),
        retried: transcription.request_metadata.retries > 0,
    })
}

/// One (backend, condition, recording) evaluation that could not produce a
/// record, with the typed reason.
#[derive(Debug)]
pub struct EvaluationFailure {
    pub backend_id: BackendId,
    pub condition: DisfluencyCondition,
    pub recording_id: String,
    pub error: PipelineError,
}

/// Runs the full batch over a manifest and scores every outcome.
///
/// Records come back sorted by (backend, condition, recording id) so output
/// files are deterministic regardless of worker scheduling; failures are
/// isolated per pair, never aborting the batch.
pub fn evaluate_batch(
    configs: &[BackendConfig],
    manifest: &Manifest,
    normalization: &NormalizationConfig,
    annotations_dir: Option<&Path>,
) -> (Vec<EvaluationRecord>, Vec<EvaluationFailure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in run_batch(configs, &manifest.recordings) {
        let backend_id = outcome.backend_id;
        let condition = outcome.condition;
        let recording_id = outcome.recording_id.clone();
        match record_from_outcome(outcome, manifest, normalization, annotations_dir) {
            Ok(record) => records.push(record),
            Err(error) => failures.push(EvaluationFailure {
                backend_id,
                condition,
                recording_id,
                error,
            }),
        }
    }
    records.sort_by(|a, b| {
        (a.backend_id, a.condition, &a.recording_id).cmp(&(
            b.backend_id,
            b.condition,
            &b.recording_id,
        ))
    });
    failures.sort_by(|a, b| {
        (a.backend_id, a.condition, &a.recording_id).cmp(&(
            b.backend_id,
            b.condition,
            &b.recording_id,
        ))
    });
    (records, failures)
}
