//! Corpus handling: manifests, wordlist filtering, seeded sampling.
//!
//! A corpus is described by a single JSON manifest (speakers plus
//! recordings) so the tool stays decoupled from any particular corpus
//! layout. Prompt filtering and sampling mirror the usual preparation steps:
//! keep only sentences fully covered by a frequency wordlist, then draw a
//! reproducible random subset.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::{normalize, NormalizationConfig, RawTranscript};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse manifest {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate speaker id {0:?}")]
    DuplicateSpeaker(String),
    #[error("recording {audio_path:?} references unknown speaker {speaker_id:?}")]
    UnknownSpeaker {
        speaker_id: String,
        audio_path: String,
    },
    #[error("recording {audio_path:?} has nonpositive duration {duration_s}")]
    NonpositiveDuration { audio_path: String, duration_s: f64 },
    #[error("wordlist is empty")]
    EmptyWordlist,
    #[error("sample size {k} exceeds population {len}")]
    SampleTooLarge { k: usize, len: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechType {
    Read,
    Spontaneous,
}

impl std::fmt::Display for Gender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Gender::F => "F",
            Gender::M => "M",
        })
    }
}

impl std::fmt::Display for SpeechType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpeechType::Read => "read",
            SpeechType::Spontaneous => "spontaneous",
        })
    }
}

/// One corpus speaker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Speaker {
    /// Short unique code, e.g. "NCC".
    pub id: String,
    /// First-language label, e.g. "Korean".
    pub l1: String,
    pub gender: Gender,
}

/// One recording of one speaker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub speaker_id: String,
    pub audio_path: PathBuf,
    pub duration_s: f64,
    pub reference_path: PathBuf,
    pub speech_type: SpeechType,
}

impl Recording {
    /// Stable identifier used in evaluation records: the audio file stem.
    pub fn recording_id(&self) -> String {
        self.audio_path
            .file_stem()
            .map(|stem| stem.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.audio_path.display().to_string())
    }
}

/// Validated corpus description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub speakers: Vec<Speaker>,
    pub recordings: Vec<Recording>,
}

impl Manifest {
    /// Checks referential integrity: unique speaker ids, resolvable speaker
    /// references, positive durations.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for speaker in &self.speakers {
            if !ids.insert(speaker.id.as_str()) {
                return Err(CorpusError::DuplicateSpeaker(speaker.id.clone()));
            }
        }
        for recording in &self.recordings {
            if !ids.contains(recording.speaker_id.as_str()) {
                return Err(CorpusError::UnknownSpeaker {
                    speaker_id: recording.speaker_id.clone(),
                    audio_path: recording.audio_path.display().to_string(),
                });
            }
            if recording.duration_s.is_nan() || recording.duration_s <= 0.0 {
                return Err(CorpusError::NonpositiveDuration {
                    audio_path: recording.audio_path.display().to_string(),
                    duration_s: recording.duration_s,
                });
            }
        }
        Ok(())
    }

    pub fn speaker(&self, id: &str) -> Option<&Speaker> {
        self.speakers.iter().find(|speaker| speaker.id == id)
    }

    /// Rewrites relative audio and reference paths onto `base`, so manifests
    /// can be moved together with the files they describe.
    pub fn resolve_paths(&mut self, base: &Path) {
        for recording in &mut self.recordings {
            if recording.audio_path.is_relative() {
                recording.audio_path = base.join(&recording.audio_path);
            }
            if recording.reference_path.is_relative() {
                recording.reference_path = base.join(&recording.reference_path);
            }
        }
    }

    /// Finds a recording by its derived id.
    pub fn recording(&self, recording_id: &str) -> Option<&Recording> {
        self.recordings
            .iter()
            .find(|recording| recording.recording_id() == recording_id)
    }
}

/// Loads and validates a manifest JSON file. Relative audio and reference
/// paths are resolved against the manifest's own directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| CorpusError::Parse {
            path: path.display().to_string(),
            source,
        })?;
    manifest.validate()?;
    if let Some(base) = path.parent() {
        manifest.resolve_paths(base);
    }
    Ok(manifest)
}

/// Set of allowed word forms, matched exactly against normalized tokens.
///
/// Matching is surface-form only (no lemmatization); callers wanting
/// lemma-level coverage supply a pre-expanded list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wordlist {
    entries: BTreeSet<String>,
}

impl Wordlist {
    /// Parses wordlist text: one word per line, `#` starts a comment.
    /// Entries pass through transcript normalization so membership tests use
    /// the same token conventions as everything else.
    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let config = NormalizationConfig::default();
        let mut entries = BTreeSet::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            let seq = normalize(&RawTranscript::reference(line), &config);
            entries.extend(seq.tokens().iter().cloned());
        }
        if entries.is_empty() {
            return Err(CorpusError::EmptyWordlist);
        }
        Ok(Wordlist { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps exactly the sentences whose every normalized token is a wordlist
/// member. A sentence with no tokens is kept vacuously.
pub fn filter_sentences(prompts: &[String], wordlist: &Wordlist) -> Vec<String> {
    let config = NormalizationConfig::default();
    prompts
        .iter()
        .filter(|prompt| {
            normalize(&RawTranscript::reference(prompt.as_str()), &config)
                .tokens()
                .iter()
                .all(|token| wordlist.contains(token))
        })
        .cloned()
        .collect()
}

/// Draws `k` distinct items with a partial Fisher-Yates shuffle over a
/// ChaCha8 generator seeded from `seed`. Identical seeds reproduce the
/// identical sample in the identical order, on every platform.
pub fn sample<T: Clone>(items: &[T], k: usize, seed: u64) -> Result<Vec<T>, CorpusError> {
    if k > items.len() {
        return Err(CorpusError::SampleTooLarge {
            k,
            len: items.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..items.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    Ok(indices[..k].iter().map(|&i| items[i].clone()).collect())
}
