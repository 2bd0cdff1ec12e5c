//! Evaluation records and report assembly.
//!
//! Records persist as one-JSON-object-per-line streams so huge batches can
//! append without rewrites. Reports aggregate records into named tables
//! (per-system, per-L1, per-gender, per-speaker, per-condition summaries,
//! plus condition-difference, efficiency, and disfluency tables), each row
//! carrying its provenance as the list of contributing record ids.
//!
//! Exports: canonical JSON (sorted keys, displayed metrics rounded
//! half-even to 3 decimals, full-precision values in a parallel `*_raw`
//! field) and RFC-4180 CSV with one `# table:` header line per section.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::ErrorCounts;
use crate::backends::{BackendId, DisfluencyCondition};
use crate::corpus::{Gender, SpeechType};
use crate::disfluency::DisfluencyReport;
use crate::stats::{mean_sd, StatsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no records to report on")]
    EmptyRecords,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid record at {path}:{line}: {detail}")]
    Parse {
        path: std::path::PathBuf,
        line: usize,
        detail: String,
    },
    #[error("invalid report document: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One scored transcription: the per-trial quantities every table and test
/// draws from.
///
/// Metric fields are optional because not every evaluation mode produces
/// them: bare reference/hypothesis pairs carry no timing, so
/// `processing_time_s` and `efficiency` stay empty rather than defaulting
/// to fake values. In addition to the core quantities, the record keeps the
/// normalized hypothesis text (`hypothesis`) for auditability and the
/// `retried` flag so timing analyses can exclude requests whose duration
/// reflects a retry rather than a single clean round trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub recording_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_type: Option<SpeechType>,
    pub backend_id: BackendId,
    pub condition: DisfluencyCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<ErrorCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processing_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disfluency: Option<DisfluencyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<String>,
    #[serde(default)]
    pub retried: bool,
}

impl EvaluationRecord {
    /// Checks the internal consistency of derived fields:
    /// efficiency = (1 − mer)/processing_time when both inputs are present.
    pub fn validate(&self) -> Result<(), ReportError> {
        if let (Some(mer), Some(time), Some(efficiency)) =
            (self.mer, self.processing_time_s, self.efficiency)
        {
            let expected = (1.0 - mer) / time;
            if (efficiency - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                return Err(ReportError::InvalidDocument(format!(
                    "record {}: efficiency {efficiency} != (1 - {mer})/{time}",
                    self.recording_id
                )));
            }
        }
        Ok(())
    }
}

/// Appends records to a JSON-lines stream, one compact object per line.
pub fn write_records<W: Write>(
    writer: &mut W,
    records: &[EvaluationRecord],
) -> std::io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record).expect("records always serialize");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes records to a file, replacing it.
pub fn save_records(path: &Path, records: &[EvaluationRecord]) -> Result<(), ReportError> {
    let mut buffer = Vec::new();
    write_records(&mut buffer, records).expect("in-memory write cannot fail");
    std::fs::write(path, buffer).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a JSON-lines records file; blank lines are permitted.
pub fn load_records(path: &Path) -> Result<Vec<EvaluationRecord>, ReportError> {
    let file = std::fs::File::open(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (index, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvaluationRecord =
            serde_json::from_str(&line).map_err(|err| ReportError::Parse {
                path: path.to_path_buf(),
                line: index + 1,
                detail: err.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// A dimension records can be grouped by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupField {
    System,
    Condition,
    L1,
    Gender,
    Speaker,
    SpeechType,
}

impl GroupField {
    pub fn name(self) -> &'static str {
        match self {
            GroupField::System => "system",
            GroupField::Condition => "condition",
            GroupField::L1 => "l1",
            GroupField::Gender => "gender",
            GroupField::Speaker => "speaker",
            GroupField::SpeechType => "speech_type",
        }
    }

    /// The record's value for this dimension, when it carries one.
    pub fn value_of(self, record: &EvaluationRecord) -> Option<String> {
        match self {
            GroupField::System => Some(record.backend_id.label().to_owned()),
            GroupField::Condition => Some(record.condition.label().to_owned()),
            GroupField::L1 => record.l1.clone(),
            GroupField::Gender => record.gender.map(|g| g.to_string()),
            GroupField::Speaker => record.speaker_id.clone(),
            GroupField::SpeechType => record.speech_type.map(|s| s.to_string()),
        }
    }
}

/// The groupings behind the standard summary tables: overall per-system
/// figures plus the L1, gender, speaker, and speech-type breakdowns.
pub fn default_groupings() -> Vec<Vec<GroupField>> {
    vec![
        vec![GroupField::System, GroupField::Condition],
        vec![GroupField::L1, GroupField::System, GroupField::Condition],
        vec![
            GroupField::Gender,
            GroupField::System,
            GroupField::Condition,
        ],
        vec![
            GroupField::Speaker,
            GroupField::System,
            GroupField::Condition,
        ],
        vec![
            GroupField::SpeechType,
            GroupField::System,
            GroupField::Condition,
        ],
    ]
}

/// One aggregated table row: the group key values, the row size, named
/// numeric cells, and provenance (ids of every contributing record).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub key: BTreeMap<String, String>,
    pub n: usize,
    pub values: BTreeMap<String, f64>,
    pub record_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub name: String,
    pub group_fields: Vec<String>,
    pub rows: Vec<ReportRow>,
}

/// Report provenance stamped into every document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    /// RFC 3339 generation timestamp. Honors the SOURCE_DATE_EPOCH
    /// convention upstream so repeated runs can be byte-identical.
    pub generated_at: String,
    pub tool_version: String,
    /// Digest of the semantic evaluation configuration.
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub generated_at: String,
    pub tool_version: String,
    pub config_digest: String,
    pub tables: Vec<ReportTable>,
}

fn record_key(fields: &[GroupField], record: &EvaluationRecord) -> Option<Vec<String>> {
    fields.iter().map(|f| f.value_of(record)).collect()
}

fn key_map(fields: &[GroupField], key: &[String]) -> BTreeMap<String, String> {
    fields
        .iter()
        .zip(key)
        .map(|(f, v)| (f.name().to_owned(), v.clone()))
        .collect()
}

/// Groups records by the given fields. Records missing a grouped dimension
/// are skipped, not zero-filled.
fn group_records<'a>(
    records: &'a [EvaluationRecord],
    fields: &[GroupField],
) -> BTreeMap<Vec<String>, Vec<&'a EvaluationRecord>> {
    let mut groups: BTreeMap<Vec<String>, Vec<&EvaluationRecord>> = BTreeMap::new();
    for record in records {
        if let Some(key) = record_key(fields, record) {
            groups.entry(key).or_default().push(record);
        }
    }
    groups
}

fn mer_table(records: &[EvaluationRecord], fields: &[GroupField]) -> ReportTable {
    let mut rows = Vec::new();
    for (key, group) in group_records(records, fields) {
        let scored: Vec<&&EvaluationRecord> = group.iter().filter(|r| r.mer.is_some()).collect();
        if scored.is_empty() {
            continue;
        }
        let mers: Vec<f64> = scored.iter().filter_map(|r| r.mer).collect();
        let wers: Vec<f64> = scored.iter().filter_map(|r| r.wer).collect();
        let stats = mean_sd(&mers).expect("nonempty by construction");
        let mut values = BTreeMap::new();
        values.insert("mer_mean".to_owned(), stats.mean);
        if let Some(sd) = stats.sd {
            values.insert("mer_sd".to_owned(), sd);
        }
        if wers.len() == mers.len() {
            let wer_stats = mean_sd(&wers).expect("nonempty");
            values.insert("wer_mean".to_owned(), wer_stats.mean);
            if let Some(sd) = wer_stats.sd {
                values.insert("wer_sd".to_owned(), sd);
            }
        }
        rows.push(ReportRow {
            key: key_map(fields, &key),
            n: mers.len(),
            values,
            record_ids: scored.iter().map(|r| r.recording_id.clone()).collect(),
        });
    }
    ReportTable {
        name: format!(
            "mer_by_{}",
            fields
                .iter()
                .map(|f| f.name())
                .collect::<Vec<_>>()
                .join("_")
        ),
        group_fields: fields.iter().map(|f| f.name().to_owned()).collect(),
        rows,
    }
}

/// Per-condition MER samples and the ids of the records that supplied them.
type ConditionSamples = BTreeMap<String, (Vec<f64>, Vec<String>)>;

/// Omitted-minus-retained mean MER per system: positive differences mean
/// the retained condition scored better (lower MER).
fn condition_difference_table(records: &[EvaluationRecord]) -> ReportTable {
    let fields = [GroupField::System, GroupField::Condition];
    let mut by_system: BTreeMap<String, ConditionSamples> = BTreeMap::new();
    for record in records {
        if let (Some(key), Some(mer)) = (record_key(&fields, record), record.mer) {
            let entry = by_system
                .entry(key[0].clone())
                .or_default()
                .entry(key[1].clone())
                .or_insert_with(|| (Vec::new(), Vec::new()));
            entry.0.push(mer);
            entry.1.push(record.recording_id.clone());
        }
    }

    let mut rows = Vec::new();
    for (system, conditions) in by_system {
        let omitted = conditions.get(DisfluencyCondition::Omitted.label());
        let retained = conditions.get(DisfluencyCondition::Retained.label());
        let (Some((omitted_mers, omitted_ids)), Some((retained_mers, retained_ids))) =
            (omitted, retained)
        else {
            continue;
        };
        let omitted_mean = mean_sd(omitted_mers).expect("nonempty").mean;
        let retained_mean = mean_sd(retained_mers).expect("nonempty").mean;
        let mut values = BTreeMap::new();
        values.insert("mer_mean_omitted".to_owned(), omitted_mean);
        values.insert("mer_mean_retained".to_owned(), retained_mean);
        values.insert("mer_difference".to_owned(), omitted_mean - retained_mean);
        let mut record_ids = omitted_ids.clone();
        record_ids.extend(retained_ids.iter().cloned());
        rows.push(ReportRow {
            key: [("system".to_owned(), system)].into_iter().collect(),
            n: omitted_mers.len() + retained_mers.len(),
            values,
            record_ids,
        });
    }
    ReportTable {
        name: "mer_condition_difference".to_owned(),
        group_fields: vec!["system".to_owned()],
        rows,
    }
}

fn efficiency_table(records: &[EvaluationRecord]) -> ReportTable {
    let fields = [GroupField::System, GroupField::Condition];
    let mut rows = Vec::new();
    for (key, group) in group_records(records, &fields) {
        let scored: Vec<&&EvaluationRecord> =
            group.iter().filter(|r| r.efficiency.is_some()).collect();
        if scored.is_empty() {
            continue;
        }
        let efficiencies: Vec<f64> = scored.iter().filter_map(|r| r.efficiency).collect();
        let times: Vec<f64> = scored.iter().filter_map(|r| r.processing_time_s).collect();
        let stats = mean_sd(&efficiencies).expect("nonempty");
        let mut values = BTreeMap::new();
        values.insert("efficiency_mean".to_owned(), stats.mean);
        if let Some(sd) = stats.sd {
            values.insert("efficiency_sd".to_owned(), sd);
        }
        if !times.is_empty() {
            values.insert(
                "processing_time_mean".to_owned(),
                mean_sd(&times).expect("nonempty").mean,
            );
        }
        rows.push(ReportRow {
            key: key_map(&fields, &key),
            n: efficiencies.len(),
            values,
            record_ids: scored.iter().map(|r| r.recording_id.clone()).collect(),
        });
    }
    ReportTable {
        name: "efficiency_by_system_condition".to_owned(),
        group_fields: vec!["system".to_owned(), "condition".to_owned()],
        rows,
    }
}

fn disfluency_table(records: &[EvaluationRecord]) -> ReportTable {
    let fields = [GroupField::System, GroupField::Condition];
    let mut rows = Vec::new();
    for (key, group) in group_records(records, &fields) {
        let reported: Vec<(&&EvaluationRecord, &DisfluencyReport)> = group
            .iter()
            .filter_map(|r| r.disfluency.as_ref().map(|d| (r, d)))
            .collect();
        if reported.is_empty() {
            continue;
        }
        let mut reference_fillers = 0usize;
        let mut hypothesis_fillers = 0usize;
        let mut repetition_events = 0usize;
        let mut retained_repetitions = 0usize;
        let mut revision_mers = Vec::new();
        for (_, report) in &reported {
            reference_fillers += report.reference_fillers;
            hypothesis_fillers += report.hypothesis_fillers;
            repetition_events += report.repetition_events;
            retained_repetitions += report.retained_repetition_events;
            revision_mers.extend(report.revision_scores.iter().map(|s| s.mer));
        }
        let mut values = BTreeMap::new();
        values.insert("reference_fillers".to_owned(), reference_fillers as f64);
        values.insert("hypothesis_fillers".to_owned(), hypothesis_fillers as f64);
        if reference_fillers > 0 {
            values.insert(
                "filler_detection_rate".to_owned(),
                hypothesis_fillers as f64 / reference_fillers as f64,
            );
        }
        values.insert("repetition_events".to_owned(), repetition_events as f64);
        values.insert(
            "retained_repetition_events".to_owned(),
            retained_repetitions as f64,
        );
        if repetition_events > 0 {
            values.insert(
                "repetition_retention_rate".to_owned(),
                retained_repetitions as f64 / repetition_events as f64,
            );
        }
        if !revision_mers.is_empty() {
            values.insert(
                "revision_mer_mean".to_owned(),
                mean_sd(&revision_mers).expect("nonempty").mean,
            );
        }
        rows.push(ReportRow {
            key: key_map(&fields, &key),
            n: reported.len(),
            values,
            record_ids: reported
                .iter()
                .map(|(r, _)| r.recording_id.clone())
                .collect(),
        });
    }
    ReportTable {
        name: "disfluency_by_system_condition".to_owned(),
        group_fields: vec!["system".to_owned(), "condition".to_owned()],
        rows,
    }
}

/// Assembles the report: one MER table per grouping, then the
/// condition-difference, efficiency, and disfluency tables.
pub fn build_report(
    records: &[EvaluationRecord],
    groupings: &[Vec<GroupField>],
    meta: &ReportMeta,
) -> Result<ReportDocument, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyRecords);
    }
    let mut tables = Vec::new();
    for fields in groupings {
        if fields.is_empty() {
            return Err(ReportError::InvalidDocument(
                "grouping with no fields".into(),
            ));
        }
        tables.push(mer_table(records, fields));
    }
    tables.push(condition_difference_table(records));
    tables.push(efficiency_table(records));
    tables.push(disfluency_table(records));
    Ok(ReportDocument {
        generated_at: meta.generated_at.clone(),
        tool_version: meta.tool_version.clone(),
        config_digest: meta.config_digest.clone(),
        tables,
    })
}

/// Rounds to 3 decimals with ties-to-even, the display convention for all
/// reported metrics.
pub fn round_display(value: f64) -> f64 {
    (value * 1000.0).round_ties_even() / 1000.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
}

/// Serializes a document. JSON is canonical: keys sorted, displayed metrics
/// rounded half-even to 3 decimals, and every metric repeated bit-exactly
/// in a `*_raw` field; output is deterministic byte-for-byte. CSV emits one
/// section per table, each introduced by a `# table: <name>` line, with
/// RFC-4180 quoting.
pub fn export(doc: &ReportDocument, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => export_json(doc),
        ExportFormat::Csv => export_csv(doc),
    }
}

fn export_json(doc: &ReportDocument) -> Vec<u8> {
    use serde_json::{Map, Number, Value};

    let mut root = Map::new();
    root.insert(
        "generated_at".to_owned(),
        Value::String(doc.generated_at.clone()),
    );
    root.insert(
        "tool_version".to_owned(),
        Value::String(doc.tool_version.clone()),
    );
    root.insert(
        "config_digest".to_owned(),
        Value::String(doc.config_digest.clone()),
    );

    let tables: Vec<Value> = doc
        .tables
        .iter()
        .map(|table| {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let mut cells = Map::new();
                    for (name, value) in &row.key {
                        cells.insert(name.clone(), Value::String(value.clone()));
                    }
                    cells.insert("n".to_owned(), Value::Number(Number::from(row.n as u64)));
                    // BTreeMap iteration keeps value columns sorted; the
                    // serde_json "preserve_order" feature is not enabled, so
                    // maps serialize with sorted keys throughout.
                    let mut values = Map::new();
                    for (name, &value) in &row.values {
                        values.insert(
                            name.clone(),
                            Number::from_f64(round_display(value))
                                .map(Value::Number)
                                .unwrap_or(Value::Null),
                        );
                        values.insert(
                            format!("{name}_raw"),
                            Number::from_f64(value)
                                .map(Value::Number)
                                .unwrap_or(Value::Null),
                        );
                    }
                    cells.insert("values".to_owned(), Value::Object(values));
                    cells.insert(
                        "record_ids".to_owned(),
                        Value::Array(row.record_ids.iter().cloned().map(Value::String).collect()),
                    );
                    Value::Object(cells)
                })
                .collect();
            let mut t = Map::new();
            t.insert("name".to_owned(), Value::String(table.name.clone()));
            t.insert(
                "group_fields".to_owned(),
                Value::Array(
                    table
                        .group_fields
                        .iter()
                        .cloned()
                        .map(Value::String)
                        .collect(),
                ),
            );
            t.insert("rows".to_owned(), Value::Array(rows));
            Value::Object(t)
        })
        .collect();
    root.insert("tables".to_owned(), Value::Array(tables));

    let mut bytes = serde_json::to_vec_pretty(&Value::Object(root)).expect("valid JSON");
    bytes.push(b'\n');
    bytes
}

/// Parses a JSON export back into a document, recovering the raw
/// (full-precision) metric values.
pub fn parse_json_export(bytes: &[u8]) -> Result<ReportDocument, ReportError> {
    let root: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|err| ReportError::InvalidDocument(format!("not valid JSON: {err}")))?;
    let field = |name: &str| -> Result<String, ReportError> {
        root[name]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| ReportError::InvalidDocument(format!("missing {name}")))
    };
    let mut tables = Vec::new();
    for table in root["tables"].as_array().into_iter().flatten() {
        let name = table["name"].as_str().unwrap_or_default().to_owned();
        let group_fields: Vec<String> = table["group_fields"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|v| v.as_str().map(str::to_owned))
            .collect();
        let mut rows = Vec::new();
        for row in table["rows"].as_array().into_iter().flatten() {
            let mut key = BTreeMap::new();
            for field_name in &group_fields {
                if let Some(value) = row[field_name].as_str() {
                    key.insert(field_name.clone(), value.to_owned());
                }
            }
            let mut values = BTreeMap::new();
            if let Some(cells) = row["values"].as_object() {
                for (name, value) in cells {
                    if let Some(raw_name) = name.strip_suffix("_raw") {
                        if let Some(v) = value.as_f64() {
                            values.insert(raw_name.to_owned(), v);
                        }
                    }
                }
            }
            rows.push(ReportRow {
                key,
                n: row["n"].as_u64().unwrap_or(0) as usize,
                values,
                record_ids: row["record_ids"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|v| v.as_str().map(str::to_owned))
                    .collect(),
            });
        }
        tables.push(ReportTable {
            name,
            group_fields,
            rows,
        });
    }
    Ok(ReportDocument {
        generated_at: field("generated_at")?,
        tool_version: field("tool_version")?,
        config_digest: field("config_digest")?,
        tables,
    })
}

fn export_csv(doc: &ReportDocument) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(
        format!(
            "# generated_at: {}\n# tool_version: {}\n# config_digest: {}\n",
            doc.generated_at, doc.tool_version, doc.config_digest
        )
        .as_bytes(),
    );
    for table in &doc.tables {
        out.extend_from_slice(format!("# table: {}\n", table.name).as_bytes());
        let value_columns: BTreeSet<&String> = table
            .rows
            .iter()
            .flat_map(|row| row.values.keys())
            .collect();

        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = table.group_fields.clone();
        header.push("n".to_owned());
        header.extend(value_columns.iter().map(|c| (*c).clone()));
        header.extend(value_columns.iter().map(|c| format!("{c}_raw")));
        writer.write_record(&header).expect("in-memory CSV");
        for row in &table.rows {
            let mut cells: Vec<String> = table
                .group_fields
                .iter()
                .map(|f| row.key.get(f).cloned().unwrap_or_default())
                .collect();
            cells.push(row.n.to_string());
            for column in &value_columns {
                cells.push(match row.values.get(*column) {
                    Some(v) => format!("{:.3}", round_display(*v)),
                    None => String::new(),
                });
            }
            for column in &value_columns {
                cells.push(match row.values.get(*column) {
                    Some(v) => format!("{v:?}"),
                    None => String::new(),
                });
            }
            writer.write_record(&cells).expect("in-memory CSV");
        }
        out.extend_from_slice(&writer.into_inner().expect("in-memory CSV"));
    }
    out
}
