//! Resolution of effective settings: explicit flags take precedence over the
//! optional TOML config file, which takes precedence over built-in defaults.
//! Every mutually-required combination is validated here, before any work
//! starts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use asrbench_core::backends::{BackendConfig, BackendId, DisfluencyCondition};
use asrbench_core::report::{default_groupings, ExportFormat, GroupField, ReportMeta};
use asrbench_core::textnorm::NormalizationConfig;

use crate::{EvaluateArgs, FilterCorpusArgs, NormalizationArgs, ReportArgs, TranscribeArgs};

/// The optional TOML config file. Keys mirror the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prompts: Option<PathBuf>,
    pub wordlist: Option<PathBuf>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub manifest: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub backends: Option<Vec<String>>,
    pub conditions: Option<Vec<String>>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_records: Option<PathBuf>,
    pub format: Option<String>,
    pub annotations: Option<PathBuf>,
    pub max_concurrency: Option<usize>,
    pub replay: Option<bool>,
    pub initial_prompt: Option<String>,
    pub digit_map: Option<PathBuf>,
    pub filler_tokens: Option<Vec<String>>,
    pub keep_vendor_tags: Option<bool>,
    pub keep_speaker_stamps: Option<bool>,
    pub group_by: Option<Vec<String>>,
}

pub fn load_file_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("read config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parse config file {}", path.display()))
}

pub struct FilterCorpusSettings {
    pub prompts: PathBuf,
    pub wordlist: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// What the scoring commands read: a manifest to transcribe, an existing
/// records file, or a directory of reference/hypothesis text pairs.
pub enum EvaluateSource {
    Manifest(PathBuf),
    Records(PathBuf),
    Pairs(PathBuf),
}

pub struct TranscribeSettings {
    pub manifest: PathBuf,
    pub configs: Vec<BackendConfig>,
    pub normalization: NormalizationConfig,
    pub annotations: Option<PathBuf>,
    pub out: PathBuf,
}

pub struct EvaluateSettings {
    pub source: EvaluateSource,
    pub configs: Vec<BackendConfig>,
    /// Condition stamped onto records scored from bare text pairs.
    pub pair_condition: DisfluencyCondition,
    pub normalization: NormalizationConfig,
    pub annotations: Option<PathBuf>,
    pub out: PathBuf,
    pub out_records: Option<PathBuf>,
    pub format: ExportFormat,
    pub digest: String,
}

pub struct ReportSettings {
    pub records: PathBuf,
    pub out: PathBuf,
    pub format: ExportFormat,
    pub groupings: Vec<Vec<GroupField>>,
    pub digest: String,
}

impl FilterCorpusSettings {
    pub fn resolve(args: FilterCorpusArgs, file: &FileConfig) -> anyhow::Result<Self> {
        Ok(FilterCorpusSettings {
            prompts: args
                .prompts
                .or_else(|| file.prompts.clone())
                .context("--prompts is required")?,
            wordlist: args
                .wordlist
                .or_else(|| file.wordlist.clone())
                .context("--wordlist is required")?,
            count: args.count.or(file.count).unwrap_or(100),
            seed: args.seed.or(file.seed).unwrap_or(0),
            out: args
                .out
                .or_else(|| file.out.clone())
                .context("--out is required")?,
        })
    }
}

impl TranscribeSettings {
    pub fn resolve(args: TranscribeArgs, file: &FileConfig) -> anyhow::Result<Self> {
        let backends = parse_backends(&args.backends, file)?;
        if backends.is_empty() {
            bail!("at least one --backend is required");
        }
        let conditions = conditions_or_both(parse_conditions(&args.conditions, file)?);
        let replay = args.replay || file.replay.unwrap_or(false);
        let normalization = resolve_normalization(&args.normalization, file)?;
        let initial_prompt = args.initial_prompt.or_else(|| file.initial_prompt.clone());
        let configs = build_backend_configs(
            &backends,
            &conditions,
            args.cache_dir.or_else(|| file.cache_dir.clone()),
            args.max_concurrency.or(file.max_concurrency),
            replay,
            initial_prompt.as_deref(),
        )?;
        Ok(TranscribeSettings {
            manifest: args
                .manifest
                .or_else(|| file.manifest.clone())
                .context("--manifest is required")?,
            configs,
            normalization,
            annotations: args.annotations.or_else(|| file.annotations.clone()),
            out: args
                .out
                .or_else(|| file.out.clone())
                .context("--out is required")?,
        })
    }
}

impl EvaluateSettings {
    pub fn resolve(args: EvaluateArgs, file: &FileConfig) -> anyhow::Result<Self> {
        let manifest = args.manifest.or_else(|| file.manifest.clone());
        let records = args.records.or_else(|| file.records.clone());
        let pairs = args.pairs.or_else(|| file.pairs.clone());
        let source = match (manifest, records, pairs) {
            (Some(path), None, None) => EvaluateSource::Manifest(path),
            (None, Some(path), None) => EvaluateSource::Records(path),
            (None, None, Some(path)) => EvaluateSource::Pairs(path),
            (None, None, None) => bail!("one of --manifest, --records, --pairs is required"),
            _ => bail!("--manifest, --records, and --pairs are mutually exclusive"),
        };

        let conditions = parse_conditions(&args.conditions, file)?;
        let normalization = resolve_normalization(&args.normalization, file)?;
        let configs = if matches!(source, EvaluateSource::Manifest(_)) {
            let backends = parse_backends(&args.backends, file)?;
            if backends.is_empty() {
                bail!("at least one --backend is required with --manifest");
            }
            let replay = args.replay || file.replay.unwrap_or(false);
            let initial_prompt = args.initial_prompt.or_else(|| file.initial_prompt.clone());
            build_backend_configs(
                &backends,
                &conditions_or_both(conditions.clone()),
                args.cache_dir.or_else(|| file.cache_dir.clone()),
                args.max_concurrency.or(file.max_concurrency),
                replay,
                initial_prompt.as_deref(),
            )?
        } else {
            Vec::new()
        };

        let digest = config_digest("evaluate", &configs, &normalization);
        Ok(EvaluateSettings {
            source,
            configs,
            // Bare text pairs carry no vendor flag state; stamp them with the
            // requested condition, defaulting to disfluencies retained.
            pair_condition: *conditions.first().unwrap_or(&DisfluencyCondition::Retained),
            normalization,
            annotations: args.annotations.or_else(|| file.annotations.clone()),
            out: args
                .out
                .or_else(|| file.out.clone())
                .context("--out is required")?,
            out_records: args.out_records.or_else(|| file.out_records.clone()),
            format: parse_format(args.format.as_deref(), file)?,
            digest,
        })
    }
}

impl ReportSettings {
    pub fn resolve(args: ReportArgs, file: &FileConfig) -> anyhow::Result<Self> {
        let group_specs = if args.group_by.is_empty() {
            file.group_by.clone().unwrap_or_default()
        } else {
            args.group_by
        };
        let groupings = if group_specs.is_empty() {
            default_groupings()
        } else {
            group_specs
                .iter()
                .map(|spec| parse_grouping(spec))
                .collect::<anyhow::Result<Vec<_>>>()?
        };
        let records = args
            .records
            .or_else(|| file.records.clone())
            .context("--records is required")?;
        let digest = {
            let mut semantic = BTreeMap::new();
            semantic.insert(
                "groupings".to_owned(),
                serde_json::to_value(
                    groupings
                        .iter()
                        .map(|fields| fields.iter().map(|f| f.name()).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                )
                .expect("strings serialize"),
            );
            digest_of("report", semantic)
        };
        Ok(ReportSettings {
            records,
            out: args
                .out
                .or_else(|| file.out.clone())
                .context("--out is required")?,
            format: parse_format(args.format.as_deref(), file)?,
            groupings,
            digest,
        })
    }
}

fn parse_backends(flags: &[String], file: &FileConfig) -> anyhow::Result<Vec<BackendId>> {
    let names: Vec<String> = if flags.is_empty() {
        file.backends.clone().unwrap_or_default()
    } else {
        flags.to_vec()
    };
    let mut backends = Vec::new();
    for name in &names {
        let backend = BackendId::from_str(name).map_err(anyhow::Error::msg)?;
        if !backends.contains(&backend) {
            backends.push(backend);
        }
    }
    Ok(backends)
}

/// Parses the explicitly requested conditions; empty when none were named.
fn parse_conditions(
    flags: &[String],
    file: &FileConfig,
) -> anyhow::Result<Vec<DisfluencyCondition>> {
    let names: Vec<String> = if flags.is_empty() {
        file.conditions.clone().unwrap_or_default()
    } else {
        flags.to_vec()
    };
    let mut conditions = Vec::new();
    for name in &names {
        let condition = DisfluencyCondition::from_str(name).map_err(anyhow::Error::msg)?;
        if !conditions.contains(&condition) {
            conditions.push(condition);
        }
    }
    Ok(conditions)
}

/// Transcription runs cover both conditions unless told otherwise.
fn conditions_or_both(conditions: Vec<DisfluencyCondition>) -> Vec<DisfluencyCondition> {
    if conditions.is_empty() {
        DisfluencyCondition::ALL.to_vec()
    } else {
        conditions
    }
}

fn parse_format(flag: Option<&str>, file: &FileConfig) -> anyhow::Result<ExportFormat> {
    let name = flag
        .map(str::to_owned)
        .or_else(|| file.format.clone())
        .unwrap_or_else(|| "json".to_owned());
    match name.as_str() {
        "json" => Ok(ExportFormat::Json),
        "csv" => Ok(ExportFormat::Csv),
        other => bail!("unknown format {other:?} (expected \"json\" or \"csv\")"),
    }
}

fn parse_grouping(spec: &str) -> anyhow::Result<Vec<GroupField>> {
    let fields = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_group_field)
        .collect::<anyhow::Result<Vec<_>>>()?;
    if fields.is_empty() {
        bail!("empty --group-by specification");
    }
    Ok(fields)
}

fn parse_group_field(name: &str) -> anyhow::Result<GroupField> {
    let all = [
        GroupField::System,
        GroupField::Condition,
        GroupField::L1,
        GroupField::Gender,
        GroupField::Speaker,
        GroupField::SpeechType,
    ];
    all.into_iter().find(|f| f.name() == name).with_context(|| {
        format!(
            "unknown group field {name:?} (expected one of: system, condition, l1, gender, \
             speaker, speech_type)"
        )
    })
}

fn resolve_normalization(
    args: &NormalizationArgs,
    file: &FileConfig,
) -> anyhow::Result<NormalizationConfig> {
    let mut config = NormalizationConfig::default();
    if args.keep_vendor_tags || file.keep_vendor_tags.unwrap_or(false) {
        config.strip_vendor_tags = false;
    }
    if args.keep_speaker_stamps || file.keep_speaker_stamps.unwrap_or(false) {
        config.strip_leading_speaker_stamp = false;
    }
    // --keep-digits (the default behavior, stated explicitly) suppresses any
    // digit map the config file supplies.
    let digit_map = if args.keep_digits {
        None
    } else {
        args.digit_map.clone().or_else(|| file.digit_map.clone())
    };
    if let Some(path) = digit_map {
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("read digit map {}", path.display()))?;
        let map: BTreeMap<String, String> = serde_json::from_str(&text)
            .with_context(|| format!("parse digit map {}", path.display()))?;
        config.digit_word_map = Some(map);
    }
    let fillers: Option<Vec<String>> = args
        .filler_tokens
        .as_deref()
        .map(|list| list.split(',').map(|t| t.trim().to_lowercase()).collect())
        .or_else(|| file.filler_tokens.clone());
    if let Some(tokens) = fillers {
        let set: BTreeSet<String> = tokens.into_iter().filter(|t| !t.is_empty()).collect();
        if set.is_empty() {
            bail!("--filler-tokens must name at least one token");
        }
        config.filler_tokens = set;
    }
    Ok(config)
}

fn build_backend_configs(
    backends: &[BackendId],
    conditions: &[DisfluencyCondition],
    cache_dir: Option<PathBuf>,
    max_concurrency: Option<usize>,
    replay: bool,
    initial_prompt: Option<&str>,
) -> anyhow::Result<Vec<BackendConfig>> {
    if initial_prompt.is_some() && !backends.contains(&BackendId::WhisperReplicate) {
        bail!("--initial-prompt requires the whisper_replicate backend");
    }
    let mut configs = Vec::new();
    for &backend in backends {
        for &condition in conditions {
            let mut config = BackendConfig::new(backend, condition);
            if let Some(dir) = &cache_dir {
                config.cache_dir = dir.clone();
            }
            if let Some(n) = max_concurrency {
                config.max_concurrency = n;
            }
            if replay {
                config.replay = true;
            }
            // The prompt biases output only where disfluencies are wanted.
            if backend == BackendId::WhisperReplicate && condition == DisfluencyCondition::Retained
            {
                config.initial_prompt = initial_prompt.map(str::to_owned);
            }
            config.validate().map_err(anyhow::Error::msg)?;
            configs.push(config);
        }
    }
    Ok(configs)
}

/// Sanity check live credentials up front so a missing env var fails the run
/// before any request is attempted. Replay configs need no credentials.
pub fn check_credentials(configs: &[BackendConfig]) -> anyhow::Result<()> {
    for config in configs {
        if config.is_replay() {
            continue;
        }
        if let Some(var) = &config.credentials_ref {
            if std::env::var(var).is_err() {
                bail!(
                    "backend {} needs the {var} environment variable (or --replay)",
                    config.backend_id
                );
            }
        }
    }
    Ok(())
}

/// SHA-256 over the semantic evaluation configuration: what was scored and
/// how, never where outputs land. Stable across reruns of the same study.
fn config_digest(
    command: &str,
    configs: &[BackendConfig],
    normalization: &NormalizationConfig,
) -> String {
    let mut semantic = BTreeMap::new();
    semantic.insert(
        "backends".to_owned(),
        serde_json::to_value(
            configs
                .iter()
                .map(|c| {
                    let mut entry = BTreeMap::new();
                    entry.insert("backend".to_owned(), c.backend_id.label().to_owned());
                    entry.insert(
                        "condition".to_owned(),
                        c.disfluency_condition.label().to_owned(),
                    );
                    entry.insert("replay".to_owned(), c.replay.to_string());
                    entry.insert(
                        "initial_prompt".to_owned(),
                        c.initial_prompt.clone().unwrap_or_default(),
                    );
                    entry
                })
                .collect::<Vec<_>>(),
        )
        .expect("plain maps serialize"),
    );
    semantic.insert(
        "normalization".to_owned(),
        serde_json::to_value(normalization).expect("config serializes"),
    );
    digest_of(command, semantic)
}

fn digest_of(command: &str, mut semantic: BTreeMap<String, serde_json::Value>) -> String {
    semantic.insert(
        "command".to_owned(),
        serde_json::Value::String(command.to_owned()),
    );
    let canonical = serde_json::to_string(&semantic).expect("semantic config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// RFC 3339 timestamp for report metadata. Honors SOURCE_DATE_EPOCH so
/// repeated runs can be byte-identical.
pub fn generated_at() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::<chrono::Utc>::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn report_meta(digest: &str) -> ReportMeta {
    ReportMeta {
        generated_at: generated_at(),
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_digest: digest.to_owned(),
    }
}
