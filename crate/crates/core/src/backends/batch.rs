//! Bounded-concurrency batch transcription.
//!
//! `run_batch` crosses a list of backend configurations with a list of
//! recordings and yields exactly one outcome per (config, recording) pair.
//! Each configuration gets its own worker pool capped at its
//! `max_concurrency`, so a slow vendor never starves the others and no
//! vendor sees more in-flight requests than allowed. Per-request timing is
//! measured inside `transcribe`, from dispatch rather than enqueue, so
//! queueing in this module never inflates reported processing times.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use crate::corpus::Recording;

use super::{
    transcribe, BackendConfig, BackendError, BackendId, DisfluencyCondition, TranscriptionResult,
};

/// The result of one (config, recording) pair, successful or not.
#[derive(Debug)]
pub struct BatchOutcome {
    pub backend_id: BackendId,
    pub condition: DisfluencyCondition,
    pub recording_id: String,
    pub speaker_id: String,
    pub audio_path: PathBuf,
    pub result: Result<TranscriptionResult, BackendError>,
}

/// Transcribes every recording with every configuration.
///
/// Returns a single-consumer stream over outcomes as they complete; the
/// overall order across configurations is nondeterministic, but every pair
/// appears exactly once, failures included. The stream ends when all work
/// has finished. Worker threads stop early if the receiver is dropped.
pub fn run_batch(
    configs: &[BackendConfig],
    recordings: &[Recording],
) -> mpsc::IntoIter<BatchOutcome> {
    let (sender, receiver) = mpsc::channel();

    for config in configs {
        let queue: Arc<Mutex<VecDeque<Recording>>> =
            Arc::new(Mutex::new(recordings.iter().cloned().collect()));
        let workers = config.max_concurrency.clamp(1, recordings.len().max(1));
        for _ in 0..workers {
            let queue = Arc::clone(&queue);
            let sender = sender.clone();
            let config = config.clone();
            std::thread::spawn(move || loop {
                let recording = match queue.lock().expect("queue lock").pop_front() {
                    Some(recording) => recording,
                    None => break,
                };
                let result = transcribe(&config, &recording.audio_path);
                let outcome = BatchOutcome {
                    backend_id: config.backend_id,
                    condition: config.disfluency_condition,
                    recording_id: recording.recording_id(),
                    speaker_id: recording.speaker_id.clone(),
                    audio_path: recording.audio_path.clone(),
                    result,
                };
                if sender.send(outcome).is_err() {
                    break;
                }
            });
        }
    }
    drop(sender);
    receiver.into_iter()
}
