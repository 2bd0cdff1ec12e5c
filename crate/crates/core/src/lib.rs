//! Evaluation toolkit for speech-to-text output.
//!
//! The crate covers the full path from raw vendor transcripts to grouped
//! statistical reports:
//!
//! - [`textnorm`]: reduce raw transcripts to a canonical token alphabet.
//! - [`align`]: minimum-edit-distance alignment and H/S/D/I error counts.
//! - [`metrics`]: WER, MER, accuracy, and efficiency scores.
//! - [`disfluency`]: filler counting, repetition detection and retention,
//!   and annotation-driven revision scoring.
//! - [`corpus`]: manifests, wordlist filtering, seeded sampling.
//! - [`backends`]: vendor transcription APIs, audio padding, response cache,
//!   offline replay, and bounded-concurrency batch runs.
//! - [`stats`]: descriptive aggregates and significance tests.
//! - [`report`]: evaluation records and deterministic JSON/CSV reports.
//! - [`pipeline`]: glue that scores batches end to end (shared by the CLI
//!   and by integration tests).

pub mod align;
pub mod backends;
pub mod corpus;
pub mod disfluency;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod textnorm;
