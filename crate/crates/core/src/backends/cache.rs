//! On-disk response cache.
//!
//! Every vendor response is persisted raw so analyses can be re-run offline.
//! Layout: `<cache_dir>/<backend>/<condition>/<sha256-of-audio>.json`, one
//! JSON object per response. Writes go through a temporary file plus an
//! atomic rename, so concurrent readers never observe a partial entry and
//! concurrent writers of the same key simply race to install equivalent
//! content.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, DisfluencyCondition, RequestFlags};

/// One persisted vendor response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Vendor text verbatim.
    pub raw_text: String,
    /// Wall-clock duration of the original request.
    pub processing_time_s: f64,
    /// RFC 3339 timestamp of when the response was captured.
    pub captured_at: String,
    /// The vendor option flags the original request carried.
    #[serde(default)]
    pub request_flags: RequestFlags,
}

/// Cache key for an audio file: lowercase hex SHA-256 of its bytes.
pub fn cache_key(audio: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(audio);
    hex::encode(hasher.finalize())
}

/// Path of the cache entry for one (backend, condition, audio) triple.
pub fn entry_path(
    cache_dir: &Path,
    backend_label: &str,
    condition: DisfluencyCondition,
    key: &str,
) -> PathBuf {
    cache_dir
        .join(backend_label)
        .join(condition.label())
        .join(format!("{key}.json"))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Persists one entry atomically (write to a unique temporary file in the
/// same directory, then rename into place).
pub fn store(
    cache_dir: &Path,
    backend_label: &str,
    condition: DisfluencyCondition,
    key: &str,
    entry: &CacheEntry,
) -> Result<PathBuf, BackendError> {
    let path = entry_path(cache_dir, backend_label, condition, key);
    let dir = path.parent().expect("entry path always has a parent");
    std::fs::create_dir_all(dir).map_err(|source| BackendError::CacheIo {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = serde_json::to_string_pretty(entry).expect("cache entries always serialize");

    let unique = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{key}.{}.{unique}.tmp", std::process::id()));
    std::fs::write(&tmp, json.as_bytes()).map_err(|source| BackendError::CacheIo {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, &path).map_err(|source| {
        let _ = std::fs::remove_file(&tmp);
        BackendError::CacheIo {
            path: path.clone(),
            source,
        }
    })?;
    Ok(path)
}

/// Loads one entry; a missing file is the typed [`BackendError::CacheMiss`].
pub fn load(path: &Path) -> Result<CacheEntry, BackendError> {
    let bytes = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
            return Err(BackendError::CacheMiss {
                path: path.to_path_buf(),
            })
        }
        Err(source) => {
            return Err(BackendError::CacheIo {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    serde_json::from_slice(&bytes).map_err(|err| BackendError::InvalidCache {
        path: path.to_path_buf(),
        detail: err.to_string(),
    })
}

/// Loads the cached response for the given audio bytes.
pub fn replay(
    cache_dir: &Path,
    backend_label: &str,
    condition: DisfluencyCondition,
    audio: &[u8],
) -> Result<CacheEntry, BackendError> {
    load(&entry_path(
        cache_dir,
        backend_label,
        condition,
        &cache_key(audio),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_entry() -> CacheEntry {
        CacheEntry {
            raw_text: "the man walks uptown".to_owned(),
            processing_time_s: 2.75,
            captured_at: "2025-03-04T05:06:07Z".to_owned(),
            request_flags: [("disfluencies".to_owned(), "true".to_owned())]
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn key_is_sha256_hex() {
        // Well-known digest of the empty input.
        assert_eq!(
            cache_key(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            cache_key(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(cache_key(b"a"), cache_key(b"b"));
    }

    #[test]
    fn layout_is_backend_condition_hash() {
        let path = entry_path(
            Path::new("cache"),
            "deepgram",
            DisfluencyCondition::Retained,
            "00ff",
        );
        assert_eq!(path, Path::new("cache/deepgram/retained/00ff.json"));
    }

    #[test]
    fn store_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let entry = sample_entry();
        let path = store(
            dir.path(),
            "assemblyai",
            DisfluencyCondition::Retained,
            &cache_key(b"clip-1"),
            &entry,
        )
        .unwrap();
        assert!(path.starts_with(dir.path()));
        assert_eq!(load(&path).unwrap(), entry);
        assert_eq!(
            replay(
                dir.path(),
                "assemblyai",
                DisfluencyCondition::Retained,
                b"clip-1"
            )
            .unwrap(),
            entry
        );
    }

    #[test]
    fn store_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        store(
            dir.path(),
            "revai",
            DisfluencyCondition::Omitted,
            "deadbeef",
            &sample_entry(),
        )
        .unwrap();
        let leaf = dir.path().join("revai").join("omitted");
        let names: Vec<String> = std::fs::read_dir(&leaf)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["deadbeef.json".to_owned()]);
    }

    #[test]
    fn overwrite_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let mut entry = sample_entry();
        let key = cache_key(b"clip-2");
        store(
            dir.path(),
            "replay",
            DisfluencyCondition::Omitted,
            &key,
            &entry,
        )
        .unwrap();
        entry.raw_text = "updated".to_owned();
        let path = store(
            dir.path(),
            "replay",
            DisfluencyCondition::Omitted,
            &key,
            &entry,
        )
        .unwrap();
        assert_eq!(load(&path).unwrap().raw_text, "updated");
    }

    #[test]
    fn missing_entry_is_cache_miss() {
        let dir = tempfile::tempdir().unwrap();
        let err = replay(
            dir.path(),
            "deepgram",
            DisfluencyCondition::Omitted,
            b"nope",
        )
        .unwrap_err();
        match err {
            BackendError::CacheMiss { path } => {
                assert!(path.to_string_lossy().contains("deepgram/omitted"));
            }
            other => panic!("expected CacheMiss, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_entry_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay").join("omitted").join("x.json");
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"{not json").unwrap();
        assert!(matches!(
            load(&path),
            Err(BackendError::InvalidCache { .. })
        ));
    }

    #[test]
    fn missing_flags_field_defaults_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.json");
        std::fs::write(
            &path,
            br#"{"raw_text":"t","processing_time_s":1.0,"captured_at":"2025-01-01T00:00:00Z"}"#,
        )
        .unwrap();
        let entry = load(&path).unwrap();
        assert!(entry.request_flags.is_empty());
    }
}
