//! The four commands. Each returns the number of per-record failures;
//! configuration problems are errors instead. Data goes only to the chosen
//! output paths; diagnostics go to standard error.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};

use asrbench_core::backends::BackendId;
use asrbench_core::corpus::{self, Wordlist};
use asrbench_core::pipeline::{self, evaluate_batch};
use asrbench_core::report::{build_report, export, load_records, save_records, EvaluationRecord};

use crate::settings::{
    check_credentials, report_meta, EvaluateSettings, EvaluateSource, FilterCorpusSettings,
    ReportSettings, TranscribeSettings,
};

pub fn filter_corpus(settings: &FilterCorpusSettings) -> anyhow::Result<usize> {
    let prompts_text = std::fs::read_to_string(&settings.prompts)
        .with_context(|| format!("read prompts {}", settings.prompts.display()))?;
    let prompts: Vec<String> = prompts_text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_owned)
        .collect();

    let wordlist_text = std::fs::read_to_string(&settings.wordlist)
        .with_context(|| format!("read wordlist {}", settings.wordlist.display()))?;
    let wordlist = Wordlist::from_text(&wordlist_text).map_err(anyhow::Error::msg)?;

    let kept = corpus::filter_sentences(&prompts, &wordlist);
    log::info!(
        target: "filter-corpus",
        "{} of {} sentences pass the wordlist",
        kept.len(),
        prompts.len()
    );

    // Sample before touching the output path: an oversized request must not
    // leave a partial file behind.
    let sampled =
        corpus::sample(&kept, settings.count, settings.seed).map_err(anyhow::Error::msg)?;
    let mut body = sampled.join("\n");
    body.push('\n');
    std::fs::write(&settings.out, body)
        .with_context(|| format!("write {}", settings.out.display()))?;
    log::info!(
        target: "filter-corpus",
        "wrote {} sentences to {}",
        sampled.len(),
        settings.out.display()
    );
    Ok(0)
}

pub fn transcribe(settings: &TranscribeSettings) -> anyhow::Result<usize> {
    check_credentials(&settings.configs)?;
    let manifest = corpus::load_manifest(&settings.manifest).map_err(anyhow::Error::msg)?;

    let (records, failures) = evaluate_batch(
        &settings.configs,
        &manifest,
        &settings.normalization,
        settings.annotations.as_deref(),
    );
    for failure in &failures {
        log::error!(
            target: "transcribe",
            "{} {} {}: {}",
            failure.backend_id,
            failure.condition,
            failure.recording_id,
            failure.error
        );
    }
    save_records(&settings.out, &records).map_err(anyhow::Error::msg)?;
    log::info!(
        target: "transcribe",
        "wrote {} records to {} ({} failures)",
        records.len(),
        settings.out.display(),
        failures.len()
    );
    Ok(failures.len())
}

pub fn evaluate(settings: &EvaluateSettings) -> anyhow::Result<usize> {
    let (records, failures) = match &settings.source {
        EvaluateSource::Records(path) => {
            let records = load_records(path).map_err(anyhow::Error::msg)?;
            (records, 0)
        }
        EvaluateSource::Manifest(path) => {
            check_credentials(&settings.configs)?;
            let manifest = corpus::load_manifest(path).map_err(anyhow::Error::msg)?;
            let (records, failures) = evaluate_batch(
                &settings.configs,
                &manifest,
                &settings.normalization,
                settings.annotations.as_deref(),
            );
            for failure in &failures {
                log::error!(
                    target: "evaluate",
                    "{} {} {}: {}",
                    failure.backend_id,
                    failure.condition,
                    failure.recording_id,
                    failure.error
                );
            }
            (records, failures.len())
        }
        EvaluateSource::Pairs(dir) => score_pairs(dir, settings)?,
    };

    if let Some(path) = &settings.out_records {
        save_records(path, &records).map_err(anyhow::Error::msg)?;
    }
    if records.is_empty() {
        if failures > 0 {
            log::error!(target: "evaluate", "no records survived; skipping report");
            return Ok(failures);
        }
        bail!("no records to evaluate");
    }

    let meta = report_meta(&settings.digest);
    let doc = build_report(&records, &asrbench_core::report::default_groupings(), &meta)
        .map_err(anyhow::Error::msg)?;
    let bytes = export(&doc, settings.format);
    std::fs::write(&settings.out, bytes)
        .with_context(|| format!("write {}", settings.out.display()))?;
    log::info!(
        target: "evaluate",
        "wrote report over {} records to {} ({} failures)",
        records.len(),
        settings.out.display(),
        failures
    );
    Ok(failures)
}

/// Scores a directory of `<id>.ref.txt` / `<id>.hyp.txt` transcript pairs.
/// Ids that name a known backend are attributed to it, so a directory of
/// per-vendor transcripts of one recording lands in per-system report rows;
/// anything else is attributed to the replay backend.
fn score_pairs(
    dir: &Path,
    settings: &EvaluateSettings,
) -> anyhow::Result<(Vec<EvaluationRecord>, usize)> {
    let mut ids = Vec::new();
    let entries =
        std::fs::read_dir(dir).with_context(|| format!("read pairs dir {}", dir.display()))?;
    for entry in entries {
        let entry = entry.with_context(|| format!("read pairs dir {}", dir.display()))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(".ref.txt") {
            ids.push(id.to_owned());
        }
    }
    if ids.is_empty() {
        bail!("no <id>.ref.txt files in {}", dir.display());
    }
    ids.sort();

    let mut records = Vec::new();
    let mut failures = 0usize;
    for id in ids {
        match score_one_pair(dir, &id, settings) {
            Ok(record) => records.push(record),
            Err(error) => {
                failures += 1;
                log::error!(target: "evaluate", "{id}: {error:#}");
            }
        }
    }
    Ok((records, failures))
}

fn score_one_pair(
    dir: &Path,
    id: &str,
    settings: &EvaluateSettings,
) -> anyhow::Result<EvaluationRecord> {
    let ref_path = dir.join(format!("{id}.ref.txt"));
    let hyp_path = dir.join(format!("{id}.hyp.txt"));
    let reference = std::fs::read_to_string(&ref_path)
        .with_context(|| format!("read {}", ref_path.display()))?;
    let hypothesis = std::fs::read_to_string(&hyp_path)
        .with_context(|| format!("read {}", hyp_path.display()))?;

    let backend_id = BackendId::from_str(id).unwrap_or(BackendId::Replay);
    let revisions =
        pipeline::revisions_for(settings.annotations.as_deref(), id).map_err(anyhow::Error::msg)?;
    let scored = pipeline::score_pair(
        &reference,
        &hypothesis,
        backend_id.label(),
        &settings.normalization,
        &revisions,
    )
    .map_err(anyhow::Error::msg)?;

    Ok(EvaluationRecord {
        recording_id: id.to_owned(),
        speaker_id: None,
        l1: None,
        gender: None,
        speech_type: None,
        backend_id,
        condition: settings.pair_condition,
        mer: Some(scored.mer),
        wer: Some(scored.wer),
        counts: Some(scored.counts),
        processing_time_s: None,
        efficiency: None,
        disfluency: Some(scored.disfluency),
        hypothesis: Some(scored.hypothesis),
        retried: false,
    })
}

pub fn report(settings: &ReportSettings) -> anyhow::Result<usize> {
    let records = load_records(&settings.records).map_err(anyhow::Error::msg)?;
    let meta = report_meta(&settings.digest);
    let doc = build_report(&records, &settings.groupings, &meta).map_err(anyhow::Error::msg)?;
    let bytes = export(&doc, settings.format);
    std::fs::write(&settings.out, bytes)
        .with_context(|| format!("write {}", settings.out.display()))?;
    log::info!(
        target: "report",
        "wrote {} tables over {} records to {}",
        doc.tables.len(),
        records.len(),
        settings.out.display()
    );
    Ok(0)
}
