//! Release acceptance checks.
//!
//! Each test covers one numbered criterion from the project checklist and
//! prints a single `acceptance criterion N: PASS/FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`). Tolerances are pinned in
//! the assertions themselves; timing bounds use wall-clock measurements of
//! the computation under test.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use asrbench_core::align::{align, ErrorCounts};
use asrbench_core::backends::cache;
use asrbench_core::backends::wav::build_wav;
use asrbench_core::backends::{
    pad_audio, parse_wav, BackendConfig, BackendId, CacheEntry, DisfluencyCondition,
};
use asrbench_core::corpus::{Gender, Manifest, Recording, Speaker, SpeechType};
use asrbench_core::disfluency::{
    count_fillers, filler_detection_rate, load_revision_annotations, score_revision,
};
use asrbench_core::metrics::{mer, score};
use asrbench_core::pipeline::evaluate_batch;
use asrbench_core::report::{
    build_report, export, load_records, round_display, ExportFormat, GroupField, ReportMeta,
};
use asrbench_core::stats::{friedman, group_mean_sd, spearman, GroupKey};
use asrbench_core::textnorm::{normalize, NormalizationConfig, RawTranscript, TokenSequence};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};

/// Runs one criterion body and prints its verdict line. Panics (and therefore
/// the test failure) propagate after the FAIL line is printed.
fn check(number: u32, summary: &str, body: impl FnOnce()) {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("acceptance criterion {number}: PASS - {summary}"),
        Err(cause) => {
            println!("acceptance criterion {number}: FAIL - {summary}");
            resume_unwind(cause);
        }
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read_fixture(name: &str) -> String {
    let path = fixture(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn tokens(text: &str, config: &NormalizationConfig) -> TokenSequence {
    normalize(&RawTranscript::reference(text), config)
}

/// The five systems in fixture order, as the backend ids the 220-row
/// fixture uses.
const VENDOR_IDS: [BackendId; 5] = [
    BackendId::Assemblyai,
    BackendId::Deepgram,
    BackendId::Revai,
    BackendId::Speechmatics,
    BackendId::WhisperReplicate,
];

#[test]
fn criterion_01_worked_example_counts_and_rates() {
    check(
        1,
        "worked example yields H=1 S=2 D=1 I=0, WER=MER=0.75",
        || {
            let config = NormalizationConfig::default();
            let reference = tokens("please open the windows", &config);
            let hypothesis = tokens("open a window", &config);

            let start = Instant::now();
            let alignment = align(&reference, &hypothesis);
            let report = score(&alignment.counts).expect("nonempty reference");
            let elapsed = start.elapsed();

            assert_eq!(
                alignment.counts,
                ErrorCounts {
                    hits: 1,
                    substitutions: 2,
                    deletions: 1,
                    insertions: 0
                }
            );
            assert_eq!(report.wer, 0.75);
            assert_eq!(report.mer, 0.75);
            assert!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
        },
    );
}

#[test]
fn criterion_02_degenerate_systems_split_wer_and_mer() {
    check(
        2,
        "all-substitution systems: WER 1.0/2.0 while MER stays 1.0",
        || {
            let n = 25;
            let start = Instant::now();

            let deaf = ErrorCounts {
                hits: 0,
                substitutions: n,
                deletions: 0,
                insertions: 0,
            };
            let deaf_report = score(&deaf).expect("nonempty reference");
            assert_eq!(deaf_report.wer, 1.0);
            assert_eq!(deaf_report.mer, 1.0);

            let babbling = ErrorCounts {
                hits: 0,
                substitutions: n,
                deletions: 0,
                insertions: n,
            };
            let babbling_report = score(&babbling).expect("nonempty reference");
            assert_eq!(babbling_report.wer, 2.0);
            assert_eq!(babbling_report.mer, 1.0);

            let elapsed = start.elapsed();
            assert!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
        },
    );
}

#[test]
fn criterion_03_revision_scores_reproduce_pinned_values() {
    check(
        3,
        "all fifteen annotated revision MERs reproduce exactly",
        || {
            // Expected MERs per system for the three annotated revision spans,
            // as exact rationals, plus their 3-decimal display forms.
            let expected: [(&str, [f64; 3], [f64; 3]); 5] = [
                (
                    "assemblyai",
                    [2.0 / 3.0, 0.5, 2.0 / 9.0],
                    [0.667, 0.5, 0.222],
                ),
                ("deepgram", [0.0, 0.5, 2.0 / 9.0], [0.0, 0.5, 0.222]),
                ("revai", [0.0, 0.5, 0.0], [0.0, 0.5, 0.0]),
                ("speechmatics", [0.0, 0.25, 2.0 / 9.0], [0.0, 0.25, 0.222]),
                ("whisper", [1.0 / 3.0, 0.5, 1.0 / 3.0], [0.333, 0.5, 0.333]),
            ];

            let config = NormalizationConfig::default();
            let reference = tokens(&read_fixture("narrative/ground_truth.txt"), &config);
            let spans = load_revision_annotations(&fixture("narrative/revisions.json"))
                .expect("annotation fixture parses");
            assert_eq!(spans.len(), 3);

            let hypotheses: Vec<TokenSequence> = expected
                .iter()
                .map(|(name, _, _)| {
                    tokens(&read_fixture(&format!("narrative/{name}.txt")), &config)
                })
                .collect();

            let start = Instant::now();
            for ((_, exact, display), hypothesis) in expected.iter().zip(&hypotheses) {
                let alignment = align(&reference, hypothesis);
                for ((span, want), want_display) in spans.iter().zip(exact).zip(display) {
                    let (mer, accuracy) = score_revision(&reference, hypothesis, span, &alignment)
                        .expect("span is in bounds");
                    assert_eq!(mer, *want, "span {:?}", span.label);
                    assert_eq!(round_display(mer), *want_display, "span {:?}", span.label);
                    assert_eq!(accuracy, 1.0 - want);
                }
            }
            let elapsed = start.elapsed();
            assert!(elapsed < Duration::from_millis(100), "took {elapsed:?}");
        },
    );
}

#[test]
fn criterion_04_filler_counts_reproduce_exactly() {
    check(
        4,
        "per-transcript filler totals 20/14/17/17/14/2 reproduce",
        || {
            let config = NormalizationConfig::default();
            let expected = [
                ("ground_truth", 20),
                ("assemblyai", 14),
                ("deepgram", 17),
                ("revai", 17),
                ("speechmatics", 14),
                ("whisper", 2),
            ];
            for (name, want) in expected {
                let seq = tokens(&read_fixture(&format!("narrative/{name}.txt")), &config);
                let got = count_fillers(&seq, &config).count;
                assert_eq!(got, want, "filler count for {name}");
            }
        },
    );
}

#[test]
fn criterion_05_rate_arithmetic_matches_worked_values() {
    check(
        5,
        "112/157 -> 0.713 and 31/40 -> 0.775 to three decimals",
        || {
            let fillers = filler_detection_rate(157, 112).expect("nonzero reference total");
            assert_eq!(round_display(fillers), 0.713);
            let repetitions = filler_detection_rate(40, 31).expect("nonzero reference total");
            assert_eq!(round_display(repetitions), 0.775);
        },
    );
}

#[test]
fn criterion_06_fixture_group_means_match_published_row() {
    check(
        6,
        "22-speaker grouped means match the pinned row within 5e-4",
        || {
            let records = load_records(&fixture("spontaneous_mer.jsonl")).expect("fixture loads");
            assert_eq!(records.len(), 220);

            let expected_omitted = [0.122, 0.114, 0.103, 0.112, 0.142];
            let expected_retained = [0.096, 0.085, 0.063, 0.075, 0.090];
            for (i, backend) in VENDOR_IDS.into_iter().enumerate() {
                for (condition, want) in [
                    (DisfluencyCondition::Omitted, expected_omitted[i]),
                    (DisfluencyCondition::Retained, expected_retained[i]),
                ] {
                    let key = GroupKey {
                        system: Some(backend),
                        condition: Some(condition),
                        ..GroupKey::default()
                    };
                    let stats = group_mean_sd(&records, &key).expect("group is nonempty");
                    assert_eq!(stats.n, 22, "{backend} {condition}");
                    assert!(
                        (stats.mean - want).abs() <= 5e-4,
                        "{backend} {condition}: mean {} vs {want}",
                        stats.mean
                    );
                }
            }
        },
    );
}

#[test]
fn criterion_07_condition_differences_match_published_column() {
    check(
        7,
        "per-system condition differences match within 1e-3",
        || {
            let records = load_records(&fixture("spontaneous_mer.jsonl")).expect("fixture loads");
            let meta = ReportMeta {
                generated_at: "2025-01-01T00:00:00Z".to_owned(),
                tool_version: "acceptance".to_owned(),
                config_digest: "fixture".to_owned(),
            };
            let doc = build_report(
                &records,
                &[vec![GroupField::System, GroupField::Condition]],
                &meta,
            )
            .expect("report builds");
            let table = doc
                .tables
                .iter()
                .find(|t| t.name == "mer_condition_difference")
                .expect("difference table present");

            let expected = [0.026, 0.028, 0.040, 0.037, 0.051];
            assert_eq!(table.rows.len(), 5);
            for (backend, want) in VENDOR_IDS.into_iter().zip(expected) {
                let row = table
                    .rows
                    .iter()
                    .find(|r| r.key.get("system").map(String::as_str) == Some(backend.label()))
                    .unwrap_or_else(|| panic!("row for {backend}"));
                assert_eq!(row.n, 44);
                let got = row.values["mer_difference"];
                assert!((got - want).abs() <= 1e-3, "{backend}: {got} vs {want}");
            }
        },
    );
}

#[test]
fn criterion_08_alignment_matches_oracle_exhaustively() {
    check(
        8,
        "S+D+I equals brute-force distance for all short pairs",
        || {
            // Every sequence over a three-token alphabet with length <= 6:
            // 1 + 3 + 9 + 27 + 81 + 243 + 729 = 1093 sequences, 1093^2 pairs.
            let alphabet = ["a", "b", "c"];
            let mut sequences: Vec<Vec<String>> = vec![Vec::new()];
            let mut last: Vec<Vec<String>> = vec![Vec::new()];
            for _ in 0..6 {
                let mut next = Vec::with_capacity(last.len() * alphabet.len());
                for seq in &last {
                    for token in alphabet {
                        let mut longer = seq.clone();
                        longer.push(token.to_owned());
                        next.push(longer);
                    }
                }
                sequences.extend(next.iter().cloned());
                last = next;
            }
            assert_eq!(sequences.len(), 1093);

            /// Textbook prefix-table edit distance, independent of the library's
            /// suffix-table alignment: the oracle for S+D+I.
            fn edit_distance(a: &[String], b: &[String]) -> usize {
                let n = b.len();
                let mut prev: Vec<usize> = (0..=n).collect();
                let mut cur = vec![0usize; n + 1];
                for i in 1..=a.len() {
                    cur[0] = i;
                    for j in 1..=n {
                        let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                        cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
                    }
                    std::mem::swap(&mut prev, &mut cur);
                }
                prev[n]
            }

            let token_seqs: Vec<TokenSequence> = sequences
                .iter()
                .map(|s| TokenSequence::from_tokens(s.clone()).expect("alphabet tokens are valid"))
                .collect();

            let start = Instant::now();
            let mut pairs = 0u64;
            for (ref_tokens, reference) in sequences.iter().zip(&token_seqs) {
                for (hyp_tokens, hypothesis) in sequences.iter().zip(&token_seqs) {
                    let counts = align(reference, hypothesis).counts;
                    let distance = edit_distance(ref_tokens, hyp_tokens);
                    assert_eq!(counts.total_errors(), distance);
                    assert_eq!(counts.reference_len(), ref_tokens.len());
                    assert_eq!(counts.hypothesis_len(), hyp_tokens.len());
                    if ref_tokens.is_empty() && hyp_tokens.is_empty() {
                        assert!(
                            mer(&counts).is_err(),
                            "MER of two empty sequences is undefined"
                        );
                    } else {
                        let got = mer(&counts).expect("defined for nonempty input");
                        let want = distance as f64 / (distance + counts.hits) as f64;
                        assert_eq!(got, want);
                    }
                    pairs += 1;
                }
            }
            let elapsed = start.elapsed();
            assert_eq!(pairs, 1093 * 1093);
            assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
        },
    );
}

#[test]
fn criterion_09_property_suites_hold() {
    check(
        9,
        "normalization, metric, rank-test, and padding properties hold",
        || {
            textnorm_idempotence_suite();
            metric_bounds_suite();
            friedman_monotone_invariance_suite();
            spearman_monotone_invariance_suite();
            pad_audio_prefix_suite();
        },
    );
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    })
}

/// Normalizing already-normalized text changes nothing (1000 random strings).
fn textnorm_idempotence_suite() {
    let config = NormalizationConfig::default();
    runner(1000)
        .run(&proptest::collection::vec(any::<char>(), 0..60), |chars| {
            let text: String = chars.into_iter().collect();
            let first = normalize(&RawTranscript::reference(&text), &config);
            let second = normalize(&RawTranscript::reference(first.joined()), &config);
            prop_assert_eq!(first.tokens(), second.tokens());
            Ok(())
        })
        .expect("textnorm idempotence");
}

/// MER is a probability and never exceeds WER, for any error profile.
fn metric_bounds_suite() {
    runner(1000)
        .run(
            &(0usize..60, 0usize..60, 0usize..60, 0usize..60),
            |(h, s, d, i)| {
                if h + s + d == 0 {
                    // Empty reference is a typed error, covered by unit tests.
                    return Ok(());
                }
                let counts = ErrorCounts {
                    hits: h,
                    substitutions: s,
                    deletions: d,
                    insertions: i,
                };
                let report = score(&counts).expect("nonempty reference");
                prop_assert!((0.0..=1.0).contains(&report.mer), "mer {}", report.mer);
                prop_assert!(
                    report.mer <= report.wer,
                    "mer {} wer {}",
                    report.mer,
                    report.wer
                );
                prop_assert_eq!(report.accuracy, 1.0 - report.mer);
                Ok(())
            },
        )
        .expect("metric bounds");
}

/// Rank statistics ignore any strictly increasing per-value transform. The
/// transform 2x+1 over integer-valued f64 is exact, so ranks are preserved
/// bit-for-bit and the statistics must match exactly.
fn friedman_monotone_invariance_suite() {
    let matrix = (2usize..8, 2usize..5).prop_flat_map(|(n, k)| {
        proptest::collection::vec(proptest::collection::vec(-5_000i32..5_000, k), n)
    });
    runner(300)
        .run(&matrix, |rows| {
            let base: Vec<Vec<f64>> = rows
                .iter()
                .map(|row| row.iter().map(|&v| f64::from(v)).collect())
                .collect();
            let transformed: Vec<Vec<f64>> = base
                .iter()
                .map(|row| row.iter().map(|&v| 2.0 * v + 1.0).collect())
                .collect();
            let a = friedman(&base).expect("valid matrix");
            let b = friedman(&transformed).expect("valid matrix");
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert_eq!(a.p_value, b.p_value);
            prop_assert_eq!(a.effect_size, b.effect_size);
            Ok(())
        })
        .expect("friedman monotone invariance");
}

fn spearman_monotone_invariance_suite() {
    let pair = (3usize..20).prop_flat_map(|n| {
        (
            proptest::collection::vec(-10_000i32..10_000, n),
            proptest::collection::vec(-10_000i32..10_000, n),
        )
    });
    runner(300)
        .run(&pair, |(xs, ys)| {
            let x: Vec<f64> = xs.iter().map(|&v| f64::from(v)).collect();
            let y: Vec<f64> = ys.iter().map(|&v| f64::from(v)).collect();
            if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
                // Constant vectors are a typed error, covered by unit tests.
                return Ok(());
            }
            let a = spearman(&x, &y).expect("nondegenerate input");
            let tx: Vec<f64> = x.iter().map(|&v| 2.0 * v + 1.0).collect();
            let b = spearman(&tx, &y).expect("nondegenerate input");
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert_eq!(a.p_value, b.p_value);
            Ok(())
        })
        .expect("spearman monotone invariance");
}

/// Padding never rewrites audio: the original data section survives as an
/// exact byte prefix, and audio already at or past the target is untouched.
fn pad_audio_prefix_suite() {
    let wav = (
        prop_oneof![Just(8_000u32), Just(16_000u32), Just(44_100u32)],
        1u16..=2,
        prop_oneof![Just(8u16), Just(16u16), Just(32u16)],
        0usize..160,
    )
        .prop_flat_map(|(rate, channels, bits, frames)| {
            let block = usize::from(channels) * usize::from(bits / 8);
            (
                Just(rate),
                Just(channels),
                Just(bits),
                proptest::collection::vec(any::<u8>(), frames * block),
                0.0f64..0.05,
            )
        });
    runner(300)
        .run(&wav, |(rate, channels, bits, frames, target)| {
            let original = build_wav(rate, channels, bits, &frames);
            let layout_in = parse_wav(&original).expect("generated WAV parses");
            let padded = pad_audio(&original, target).expect("padding succeeds");
            let layout_out = parse_wav(&padded).expect("padded WAV parses");

            let data_in =
                &original[layout_in.data_offset..layout_in.data_offset + layout_in.data_len];
            let data_out =
                &padded[layout_out.data_offset..layout_out.data_offset + layout_out.data_len];
            prop_assert!(data_out.starts_with(data_in), "payload prefix must survive");

            if layout_in.duration_s() >= target {
                prop_assert_eq!(&padded, &original, "long-enough audio is copied verbatim");
            } else {
                let want_frames = (target * f64::from(rate)).ceil() as usize;
                prop_assert_eq!(layout_out.frames(), want_frames);
                let silence = if bits == 8 { 0x80 } else { 0x00 };
                prop_assert!(data_out[data_in.len()..].iter().all(|&b| b == silence));
            }
            Ok(())
        })
        .expect("pad_audio prefix preservation");
}

#[test]
fn criterion_10_replay_runs_are_byte_identical() {
    check(
        10,
        "two replay evaluate runs export byte-identical JSON",
        || {
            let dir = tempfile::tempdir().expect("tempdir");
            let (manifest, configs, annotations) = replay_corpus(dir.path());

            let run = || {
                let normalization = NormalizationConfig::default();
                let (records, failures) =
                    evaluate_batch(&configs, &manifest, &normalization, Some(&annotations));
                assert!(
                    failures.is_empty(),
                    "replay cache covers every request: {failures:?}"
                );
                assert_eq!(records.len(), configs.len() * manifest.recordings.len());
                let meta = ReportMeta {
                    generated_at: "2025-01-01T00:00:00Z".to_owned(),
                    tool_version: "acceptance".to_owned(),
                    config_digest: "replay-fixture".to_owned(),
                };
                let doc =
                    build_report(&records, &asrbench_core::report::default_groupings(), &meta)
                        .expect("report builds");
                export(&doc, ExportFormat::Json)
            };

            let first = run();
            let second = run();
            assert!(!first.is_empty());
            assert_eq!(first, second, "JSON report bytes must be identical");
        },
    );
}

/// One test clip: id, reference text, and per-vendor hypothesis texts.
type Clip = (
    &'static str,
    &'static str,
    &'static [(&'static str, &'static str)],
);

/// Builds a tiny on-disk corpus plus a fully populated replay cache:
/// three recordings, two vendors, both disfluency conditions.
fn replay_corpus(root: &Path) -> (Manifest, Vec<BackendConfig>, PathBuf) {
    let audio_dir = root.join("audio");
    let refs_dir = root.join("refs");
    let annotations_dir = root.join("annotations");
    let cache_dir = root.join("cache");
    for d in [&audio_dir, &refs_dir, &annotations_dir] {
        std::fs::create_dir_all(d).expect("create corpus dir");
    }

    let clips: [Clip; 3] = [
        (
            "clip_a",
            "um the cat uh the cat sat on the mat",
            &[
                ("assemblyai", "um the cat the cat sat on the mat"),
                ("deepgram", "the cat sat on a mat"),
            ],
        ),
        (
            "clip_b",
            "she walks to the market every morning",
            &[
                ("assemblyai", "she walks to the market every morning"),
                ("deepgram", "she walked to the market every morning"),
            ],
        ),
        (
            "clip_c",
            "the train uh arrives at nine",
            &[
                ("assemblyai", "the train arrives at nine"),
                ("deepgram", "a train arrives at nine"),
            ],
        ),
    ];

    let mut recordings = Vec::new();
    for (i, (id, reference, vendor_texts)) in clips.iter().enumerate() {
        // Distinct payloads give each clip a distinct cache key.
        let payload: Vec<u8> = (0..64)
            .map(|b| (b as u8).wrapping_mul(i as u8 + 3))
            .collect();
        let audio = build_wav(16_000, 1, 16, &payload);
        let audio_path = audio_dir.join(format!("{id}.wav"));
        std::fs::write(&audio_path, &audio).expect("write audio");
        let reference_path = refs_dir.join(format!("{id}.txt"));
        std::fs::write(&reference_path, reference).expect("write reference");

        let key = cache::cache_key(&audio);
        for (vendor, text) in vendor_texts.iter() {
            for condition in DisfluencyCondition::ALL {
                let entry = CacheEntry {
                    raw_text: (*text).to_owned(),
                    processing_time_s: 0.25 + i as f64 * 0.5,
                    captured_at: "2025-01-01T00:00:00Z".to_owned(),
                    request_flags: BTreeMap::new(),
                };
                cache::store(&cache_dir, vendor, condition, &key, &entry).expect("seed cache");
            }
        }

        recordings.push(Recording {
            speaker_id: if i % 2 == 0 { "SPK1" } else { "SPK2" }.to_owned(),
            audio_path,
            duration_s: 2.0,
            reference_path,
            speech_type: SpeechType::Spontaneous,
        });
    }

    std::fs::write(
        annotations_dir.join("clip_a.json"),
        r#"[{ "ref_start": 2, "ref_end": 5, "label": "the cat uh the cat" }]"#,
    )
    .expect("write annotations");

    let manifest = Manifest {
        speakers: vec![
            Speaker {
                id: "SPK1".to_owned(),
                l1: "Korean".to_owned(),
                gender: Gender::F,
            },
            Speaker {
                id: "SPK2".to_owned(),
                l1: "Spanish".to_owned(),
                gender: Gender::M,
            },
        ],
        recordings,
    };
    manifest.validate().expect("manifest is consistent");

    let mut configs = Vec::new();
    for backend in [BackendId::Assemblyai, BackendId::Deepgram] {
        for condition in DisfluencyCondition::ALL {
            let mut config = BackendConfig::new(backend, condition);
            config.cache_dir = cache_dir.clone();
            config.replay = true;
            configs.push(config);
        }
    }
    (manifest, configs, annotations_dir)
}
