//! Uniform transcription interface over vendor HTTP APIs plus an offline
//! replay backend.
//!
//! Every backend exposes the same operation: hand it a PCM WAV file and get
//! back the vendor's raw transcript text with wall-clock timing. The module
//! maps the benchmark's disfluency condition onto each vendor's own flag,
//! pads audio for vendors that reject very short uploads, persists every
//! response to an on-disk cache, and can replay that cache offline with full
//! determinism.

pub mod batch;
pub mod cache;
pub mod http;
pub mod request;
pub mod wav;

pub use batch::{run_batch, BatchOutcome};
pub use cache::{cache_key, CacheEntry};
pub use request::RequestPlan;
pub use wav::{pad_audio, parse_wav, wav_duration, WavError, WavLayout};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The transcription systems under benchmark, plus the offline replay
/// pseudo-backend that serves previously cached responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendId {
    Assemblyai,
    Deepgram,
    Revai,
    Speechmatics,
    WhisperReplicate,
    Replay,
}

impl BackendId {
    /// All live vendor backends, in the canonical reporting order.
    pub const VENDORS: [BackendId; 5] = [
        BackendId::Assemblyai,
        BackendId::Deepgram,
        BackendId::Revai,
        BackendId::Speechmatics,
        BackendId::WhisperReplicate,
    ];

    /// Stable string label, used for cache directories and report keys.
    pub fn label(self) -> &'static str {
        match self {
            BackendId::Assemblyai => "assemblyai",
            BackendId::Deepgram => "deepgram",
            BackendId::Revai => "revai",
            BackendId::Speechmatics => "speechmatics",
            BackendId::WhisperReplicate => "whisper_replicate",
            BackendId::Replay => "replay",
        }
    }

    /// Environment variable holding the API credential for this backend.
    pub fn credentials_env(self) -> Option<&'static str> {
        match self {
            BackendId::Assemblyai => Some("ASRBENCH_ASSEMBLYAI_KEY"),
            BackendId::Deepgram => Some("ASRBENCH_DEEPGRAM_KEY"),
            BackendId::Revai => Some("ASRBENCH_REVAI_KEY"),
            BackendId::Speechmatics => Some("ASRBENCH_SPEECHMATICS_KEY"),
            BackendId::WhisperReplicate => Some("ASRBENCH_REPLICATE_KEY"),
            BackendId::Replay => None,
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BackendId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "assemblyai" => Ok(BackendId::Assemblyai),
            "deepgram" => Ok(BackendId::Deepgram),
            "revai" => Ok(BackendId::Revai),
            "speechmatics" => Ok(BackendId::Speechmatics),
            "whisper_replicate" | "whisper" => Ok(BackendId::WhisperReplicate),
            "replay" => Ok(BackendId::Replay),
            other => Err(format!(
                "unknown backend {other:?} (expected one of: assemblyai, deepgram, revai, \
                 speechmatics, whisper_replicate, replay)"
            )),
        }
    }
}

/// Whether the request asks the vendor to keep disfluencies in its output or
/// to scrub them (each vendor's default).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisfluencyCondition {
    Omitted,
    Retained,
}

impl DisfluencyCondition {
    pub const ALL: [DisfluencyCondition; 2] =
        [DisfluencyCondition::Omitted, DisfluencyCondition::Retained];

    pub fn label(self) -> &'static str {
        match self {
            DisfluencyCondition::Omitted => "omitted",
            DisfluencyCondition::Retained => "retained",
        }
    }
}

impl fmt::Display for DisfluencyCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DisfluencyCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "omitted" => Ok(DisfluencyCondition::Omitted),
            "retained" => Ok(DisfluencyCondition::Retained),
            other => Err(format!(
                "unknown condition {other:?} (expected \"omitted\" or \"retained\")"
            )),
        }
    }
}

/// Everything needed to run one backend under one disfluency condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub backend_id: BackendId,
    /// Name of the environment variable holding the API credential.
    pub credentials_ref: Option<String>,
    pub disfluency_condition: DisfluencyCondition,
    /// Prompt text attached to Whisper requests in the retained condition.
    /// Must not be set for other backends.
    pub initial_prompt: Option<String>,
    /// Audio shorter than this is padded with silence before upload.
    pub min_audio_seconds: Option<f64>,
    /// Overall per-request deadline, including polling.
    pub timeout_s: f64,
    /// Maximum in-flight requests for this backend inside `run_batch`.
    pub max_concurrency: usize,
    /// Root of the response cache.
    pub cache_dir: PathBuf,
    /// Serve responses from the cache instead of calling the vendor. The
    /// cache is still read under this backend's own label, so replayed runs
    /// keep their original identity.
    pub replay: bool,
}

impl BackendConfig {
    /// A config with the per-backend defaults: credential env var, a 2 s
    /// minimum-duration pad for the one vendor that rejects shorter audio,
    /// and moderate timeout/concurrency.
    pub fn new(backend_id: BackendId, condition: DisfluencyCondition) -> Self {
        BackendConfig {
            backend_id,
            credentials_ref: backend_id.credentials_env().map(str::to_owned),
            disfluency_condition: condition,
            initial_prompt: None,
            min_audio_seconds: if backend_id == BackendId::Revai {
                Some(2.0)
            } else {
                None
            },
            timeout_s: 300.0,
            max_concurrency: 4,
            cache_dir: PathBuf::from("cache"),
            replay: backend_id == BackendId::Replay,
        }
    }

    /// Validates field combinations that cannot be expressed in the types.
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.initial_prompt.is_some() && self.backend_id != BackendId::WhisperReplicate {
            return Err(BackendError::InvalidConfig(format!(
                "initial_prompt is only supported by whisper_replicate, not {}",
                self.backend_id
            )));
        }
        if self.max_concurrency == 0 {
            return Err(BackendError::InvalidConfig(
                "max_concurrency must be positive".into(),
            ));
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(BackendError::InvalidConfig(format!(
                "timeout must be positive, got {}",
                self.timeout_s
            )));
        }
        if self.backend_id == BackendId::Replay && !self.replay {
            return Err(BackendError::InvalidConfig(
                "the replay backend only operates in replay mode".into(),
            ));
        }
        Ok(())
    }

    /// Whether requests are served from the cache instead of the network.
    pub fn is_replay(&self) -> bool {
        self.replay || self.backend_id == BackendId::Replay
    }
}

/// Bookkeeping attached to each transcription.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMetadata {
    /// Final request status, e.g. "completed" or "replayed".
    pub status: String,
    /// Number of retries performed (0 or 1).
    pub retries: u32,
}

/// A vendor's response to one transcription request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionResult {
    /// Vendor text verbatim; normalization happens downstream.
    pub raw_text: String,
    /// Wall-clock seconds from request dispatch to response receipt. For
    /// retried requests this is the final attempt's duration.
    pub processing_time_s: f64,
    pub backend_id: BackendId,
    pub condition: DisfluencyCondition,
    pub request_metadata: RequestMetadata,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("credentials not resolvable: environment variable {0} is not set")]
    MissingCredentials(String),
    #[error("failed to read audio {path}: {source}")]
    AudioRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid audio: {0}")]
    Audio(#[from] WavError),
    #[error("transport error talking to {backend}: {detail}")]
    Transport { backend: BackendId, detail: String },
    #[error("{backend} rejected the request ({status}): {detail}")]
    Vendor {
        backend: BackendId,
        status: String,
        detail: String,
    },
    #[error("authentication failed for {backend} ({status})")]
    Auth { backend: BackendId, status: String },
    #[error("request to {backend} timed out after {timeout_s} s")]
    Timeout { backend: BackendId, timeout_s: f64 },
    #[error("no cached response at {path}")]
    CacheMiss { path: PathBuf },
    #[error("invalid cache entry {path}: {detail}")]
    InvalidCache { path: PathBuf, detail: String },
    #[error("cache I/O error at {path}: {source}")]
    CacheIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Transcribes one audio file with one backend configuration.
///
/// Live backends resolve credentials, pad short audio when configured,
/// dispatch the HTTP request (polling asynchronous vendors at a fixed 1 s
/// interval), and persist the raw response to the cache. Replay mode reads
/// the cache instead and reproduces the stored response exactly. All
/// failures come back as typed errors; nothing panics on vendor behavior.
pub fn transcribe(
    config: &BackendConfig,
    audio_path: &Path,
) -> Result<TranscriptionResult, BackendError> {
    config.validate()?;
    let audio = std::fs::read(audio_path).map_err(|source| BackendError::AudioRead {
        path: audio_path.to_path_buf(),
        source,
    })?;

    if config.is_replay() {
        return replay_from_cache(config, &audio);
    }

    let env_name = config
        .credentials_ref
        .clone()
        .or_else(|| config.backend_id.credentials_env().map(str::to_owned))
        .ok_or_else(|| {
            BackendError::InvalidConfig(format!(
                "no credentials reference for {}",
                config.backend_id
            ))
        })?;
    let key = std::env::var(&env_name).map_err(|_| BackendError::MissingCredentials(env_name))?;

    let audio = match config.min_audio_seconds {
        Some(min) if wav_duration(&audio)? < min => pad_audio(&audio, min)?,
        _ => audio,
    };

    let plan = request::request_plan(
        config.backend_id,
        config.disfluency_condition,
        config.initial_prompt.as_deref(),
    );

    // One retry, on transport errors only. The timer restarts with the
    // retry so queueing and the failed attempt do not inflate the timing;
    // the retry is flagged so reporting can exclude these requests.
    let mut retries = 0u32;
    let (raw_text, status, elapsed) = loop {
        let started = Instant::now();
        match http::execute_live(&plan, &key, &audio, config.timeout_s) {
            Ok((raw_text, status)) => break (raw_text, status, started.elapsed()),
            Err(err @ BackendError::Transport { .. }) if retries == 0 => {
                log::warn!("retrying after transport error: {err}");
                retries = 1;
            }
            Err(err) => return Err(err),
        }
    };
    let processing_time_s = elapsed.as_secs_f64().max(f64::MIN_POSITIVE);

    let entry = CacheEntry {
        raw_text: raw_text.clone(),
        processing_time_s,
        captured_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        request_flags: plan.parameters().clone(),
    };
    if let Err(err) = cache::store(
        &config.cache_dir,
        config.backend_id.label(),
        config.disfluency_condition,
        &cache_key(&audio),
        &entry,
    ) {
        log::warn!("failed to persist response cache entry: {err}");
    }

    Ok(TranscriptionResult {
        raw_text,
        processing_time_s,
        backend_id: config.backend_id,
        condition: config.disfluency_condition,
        request_metadata: RequestMetadata { status, retries },
    })
}

fn replay_from_cache(
    config: &BackendConfig,
    audio: &[u8],
) -> Result<TranscriptionResult, BackendError> {
    let key = cache_key(audio);
    let path = cache::entry_path(
        &config.cache_dir,
        config.backend_id.label(),
        config.disfluency_condition,
        &key,
    );
    let entry = cache::load(&path)?;
    if entry.processing_time_s.is_nan() || entry.processing_time_s <= 0.0 {
        return Err(BackendError::InvalidCache {
            path,
            detail: format!(
                "processing_time_s must be positive, got {}",
                entry.processing_time_s
            ),
        });
    }
    Ok(TranscriptionResult {
        raw_text: entry.raw_text,
        processing_time_s: entry.processing_time_s,
        backend_id: config.backend_id,
        condition: config.disfluency_condition,
        request_metadata: RequestMetadata {
            status: "replayed".to_owned(),
            retries: 0,
        },
    })
}

/// Flags a vendor sends in its request body, as a sorted map for stable
/// comparison and serialization.
pub type RequestFlags = BTreeMap<String, String>;

#[cfg(test)]
mod tests {
    use super::*;

    fn write_fixture(
        cache_dir: &Path,
        backend: BackendId,
        condition: DisfluencyCondition,
        audio: &[u8],
        text: &str,
        time_s: f64,
    ) {
        let entry = CacheEntry {
            raw_text: text.to_owned(),
            processing_time_s: time_s,
            captured_at: "2025-01-01T00:00:00Z".to_owned(),
            request_flags: RequestFlags::new(),
        };
        cache::store(
            cache_dir,
            backend.label(),
            condition,
            &cache_key(audio),
            &entry,
        )
        .unwrap();
    }

    #[test]
    fn defaults_follow_backend() {
        let revai = BackendConfig::new(BackendId::Revai, DisfluencyCondition::Omitted);
        assert_eq!(revai.min_audio_seconds, Some(2.0));
        assert_eq!(revai.credentials_ref.as_deref(), Some("ASRBENCH_REVAI_KEY"));
        assert!(!revai.replay);

        let whisper =
            BackendConfig::new(BackendId::WhisperReplicate, DisfluencyCondition::Retained);
        assert_eq!(whisper.min_audio_seconds, None);
        assert_eq!(
            whisper.credentials_ref.as_deref(),
            Some("ASRBENCH_REPLICATE_KEY")
        );

        let replay = BackendConfig::new(BackendId::Replay, DisfluencyCondition::Omitted);
        assert!(replay.replay);
        assert_eq!(replay.credentials_ref, None);
    }

    #[test]
    fn prompt_restricted_to_whisper() {
        let mut config = BackendConfig::new(BackendId::Deepgram, DisfluencyCondition::Retained);
        config.initial_prompt = Some("man woman suitcase city um uh".to_owned());
        assert!(matches!(
            config.validate(),
            Err(BackendError::InvalidConfig(_))
        ));

        let mut config =
            BackendConfig::new(BackendId::WhisperReplicate, DisfluencyCondition::Retained);
        config.initial_prompt = Some("man woman suitcase city um uh".to_owned());
        assert!(config.validate().is_ok());
    }

    #[test]
    fn replay_returns_stored_response() {
        let dir = tempfile::tempdir().unwrap();
        let audio = b"not necessarily wav bytes";
        let audio_path = dir.path().join("clip.wav");
        std::fs::write(&audio_path, audio).unwrap();
        let cache_dir = dir.path().join("cache");
        write_fixture(
            &cache_dir,
            BackendId::Assemblyai,
            DisfluencyCondition::Retained,
            audio,
            "hello there",
            1.25,
        );

        let mut config = BackendConfig::new(BackendId::Assemblyai, DisfluencyCondition::Retained);
        config.replay = true;
        config.cache_dir = cache_dir;
        let result = transcribe(&config, &audio_path).unwrap();
        assert_eq!(result.raw_text, "hello there");
        assert_eq!(result.processing_time_s, 1.25);
        assert_eq!(result.backend_id, BackendId::Assemblyai);
        assert_eq!(result.request_metadata.status, "replayed");
        assert_eq!(result.request_metadata.retries, 0);

        // Full determinism: a second replay is identical.
        let again = transcribe(&config, &audio_path).unwrap();
        assert_eq!(again, result);
    }

    #[test]
    fn replay_miss_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let audio_path = dir.path().join("clip.wav");
        std::fs::write(&audio_path, b"audio").unwrap();
        let mut config = BackendConfig::new(BackendId::Replay, DisfluencyCondition::Omitted);
        config.cache_dir = dir.path().join("cache");
        assert!(matches!(
            transcribe(&config, &audio_path),
            Err(BackendError::CacheMiss { .. })
        ));
    }

    #[test]
    fn replay_rejects_nonpositive_time() {
        let dir = tempfile::tempdir().unwrap();
        let audio = b"clip";
        let audio_path = dir.path().join("clip.wav");
        std::fs::write(&audio_path, audio).unwrap();
        let cache_dir = dir.path().join("cache");
        write_fixture(
            &cache_dir,
            BackendId::Replay,
            DisfluencyCondition::Omitted,
            audio,
            "text",
            0.0,
        );
        let mut config = BackendConfig::new(BackendId::Replay, DisfluencyCondition::Omitted);
        config.cache_dir = cache_dir;
        assert!(matches!(
            transcribe(&config, &audio_path),
            Err(BackendError::InvalidCache { .. })
        ));
    }

    #[test]
    fn live_without_credentials_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let audio_path = dir.path().join("clip.wav");
        std::fs::write(&audio_path, wav::build_wav(8_000, 1, 16, &[0u8; 1600])).unwrap();
        let mut config = BackendConfig::new(BackendId::Deepgram, DisfluencyCondition::Omitted);
        // Point at a variable that cannot exist in the test environment.
        config.credentials_ref = Some("ASRBENCH_TEST_UNSET_KEY_7Q1".to_owned());
        match transcribe(&config, &audio_path) {
            Err(BackendError::MissingCredentials(name)) => {
                assert_eq!(name, "ASRBENCH_TEST_UNSET_KEY_7Q1");
            }
            other => panic!("expected MissingCredentials, got {other:?}"),
        }
    }

    #[test]
    fn missing_audio_is_typed() {
        let config = BackendConfig::new(BackendId::Replay, DisfluencyCondition::Omitted);
        assert!(matches!(
            transcribe(&config, Path::new("/nonexistent/clip.wav")),
            Err(BackendError::AudioRead { .. })
        ));
    }

    #[test]
    fn backend_ids_round_trip_labels() {
        for backend in BackendId::VENDORS
            .into_iter()
            .chain(std::iter::once(BackendId::Replay))
        {
            assert_eq!(backend.label().parse::<BackendId>().unwrap(), backend);
        }
        assert!("nova".parse::<BackendId>().is_err());
        assert_eq!(
            "retained".parse::<DisfluencyCondition>().unwrap(),
            DisfluencyCondition::Retained
        );
        assert!("kept".parse::<DisfluencyCondition>().is_err());
    }
}
