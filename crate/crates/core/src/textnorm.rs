//! Transcript normalization.
//!
//! Reference and hypothesis transcripts are reduced to a shared token
//! alphabet before anything is aligned or counted, so downstream error rates
//! measure recognition differences rather than formatting differences.
//!
//! The canonical form is: NFC-normalized, lowercased word tokens with all
//! punctuation removed except intra-word apostrophes and hyphens. Vendor
//! decorations (angle-bracket tags, a leading speaker/timestamp stamp) are
//! stripped according to [`NormalizationConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Where a raw transcript came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptSource {
    Reference,
    VendorOutput,
}

/// Unprocessed transcript text plus provenance. Empty vendor output is legal
/// and meaningful (total deletion).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTranscript {
    pub text: String,
    pub source: TranscriptSource,
    /// Vendor identifier for vendor output, e.g. "deepgram".
    pub vendor: Option<String>,
}

impl RawTranscript {
    pub fn reference(text: impl Into<String>) -> Self {
        RawTranscript {
            text: text.into(),
            source: TranscriptSource::Reference,
            vendor: None,
        }
    }

    pub fn vendor(text: impl Into<String>, vendor: impl Into<String>) -> Self {
        RawTranscript {
            text: text.into(),
            source: TranscriptSource::VendorOutput,
            vendor: Some(vendor.into()),
        }
    }
}

/// A rejected token for [`TokenSequence::from_tokens`].
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid token {token:?}: {reason}")]
pub struct InvalidToken {
    pub token: String,
    pub reason: String,
}

/// Normalized transcript: ordered, lowercase, nonempty word tokens.
///
/// Tokens contain only letters, digits, apostrophes, and hyphens, never at
/// the token edges, which makes normalization idempotent: normalizing the
/// space-joined tokens reproduces the sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence {
    tokens: Vec<String>,
}

impl TokenSequence {
    /// Builds a sequence from pre-tokenized words, validating the token
    /// invariants. Prefer [`normalize`] for raw text.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, InvalidToken>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for token in &tokens {
            let reason = if token.is_empty() {
                Some("empty".to_string())
            } else if token.chars().any(|c| !is_token_char(c)) {
                Some("contains whitespace or punctuation".to_string())
            } else if token != &token.to_lowercase() {
                Some("not lowercase".to_string())
            } else if token.starts_with(['\'', '-']) || token.ends_with(['\'', '-']) {
                Some("apostrophe or hyphen at token edge".to_string())
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(InvalidToken {
                    token: token.clone(),
                    reason,
                });
            }
        }
        Ok(TokenSequence { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joined surface form.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    /// Sub-sequence over an inclusive token range. Panics if out of bounds;
    /// callers validate ranges via their own span checks.
    pub fn slice(&self, start: usize, end_inclusive: usize) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens[start..=end_inclusive].to_vec(),
        }
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.joined())
    }
}

/// Switches controlling [`normalize`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    /// Remove word-like angle-bracket tags such as `<silence>`.
    pub strip_vendor_tags: bool,
    /// Remove one leading "speaker N HH:MM:SS" (or MM:SS) stamp.
    pub strip_leading_speaker_stamp: bool,
    /// Optional digit-string to word-string replacements, applied per token
    /// after tokenization ("1" -> "one"). Values may expand to several
    /// tokens. Absent by default: digits are kept verbatim so a vendor's
    /// "1" against a reference "one" still counts as a substitution.
    /// Idempotence holds as long as map values contain no mapped keys.
    pub digit_word_map: Option<BTreeMap<String, String>>,
    /// Tokens treated as fillers by disfluency analysis. Must be nonempty.
    pub filler_tokens: BTreeSet<String>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            strip_vendor_tags: true,
            strip_leading_speaker_stamp: true,
            digit_word_map: None,
            filler_tokens: ["um", "uh"].into_iter().map(String::from).collect(),
        }
    }
}

/// One leading "speaker N" (keyword optional) plus HH:MM:SS or MM:SS stamp.
static SPEAKER_STAMP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?i:speaker\s+)?\d+\s+\d{1,2}:\d{2}(?::\d{2})?\s*").expect("static regex")
});

/// Word-like angle-bracket tags only (`<silence>`), so stray comparison
/// operators in text are never treated as tags.
static VENDOR_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<[A-Za-z][A-Za-z0-9_-]*>").expect("static regex"));

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Converts raw transcript text into the canonical token sequence.
///
/// Steps, in order: map curly single quotes to ASCII apostrophes, strip one
/// leading speaker stamp, strip vendor tags, lowercase, NFC-normalize,
/// split on every non-token character, trim apostrophes/hyphens from token
/// edges, and apply the digit-word map. Deterministic, never fails; empty
/// input yields an empty sequence.
pub fn normalize(raw: &RawTranscript, config: &NormalizationConfig) -> TokenSequence {
    let mut text = raw.text.replace(['\u{2018}', '\u{2019}', '\u{02BC}'], "'");
    if config.strip_leading_speaker_stamp {
        if let Some(m) = SPEAKER_STAMP.find(&text) {
            let range = m.range();
            text.replace_range(range, "");
        }
    }
    if config.strip_vendor_tags {
        text = VENDOR_TAG.replace_all(&text, " ").into_owned();
    }
    // NFC after lowercasing: lowercasing can denormalize in rare scripts,
    // and idempotence needs the emitted tokens to be NFC fixed points.
    let text: String = text.to_lowercase().nfc().collect();

    let mut tokens = Vec::new();
    for word in text.split(|c: char| !is_token_char(c)) {
        let word = word.trim_matches(|c| c == '\'' || c == '-');
        if word.is_empty() {
            continue;
        }
        match config.digit_word_map.as_ref().and_then(|m| m.get(word)) {
            Some(replacement) => {
                for part in replacement.split_whitespace() {
                    let part: String = part.to_lowercase().nfc().collect();
                    let part = part.trim_matches(|c| c == '\'' || c == '-');
                    if !part.is_empty() {
                        tokens.push(part.to_string());
                    }
                }
            }
            None => tokens.push(word.to_string()),
        }
    }
    TokenSequence { tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(text: &str) -> Vec<String> {
        normalize(
            &RawTranscript::reference(text),
            &NormalizationConfig::default(),
        )
        .tokens()
        .to_vec()
    }

    #[test]
    fn lowercases_and_strips_punctuation() {
        assert_eq!(
            norm("Please open the windows."),
            ["please", "open", "the", "windows"]
        );
    }

    #[test]
    fn strips_vendor_tags() {
        assert_eq!(
            norm("<silence> one woman and <affirmative> uh one man"),
            ["one", "woman", "and", "uh", "one", "man"]
        );
    }

    #[test]
    fn keeps_intra_word_apostrophes() {
        assert_eq!(norm("I'm sorry"), ["i'm", "sorry"]);
    }

    #[test]
    fn empty_input_yields_empty_sequence() {
        assert_eq!(norm(""), Vec::<String>::new());
    }

    #[test]
    fn keeps_intra_word_hyphens_and_digits() {
        assert_eq!(
            norm("a well-known 2nd try"),
            ["a", "well-known", "2nd", "try"]
        );
    }

    #[test]
    fn trims_edge_apostrophes_and_hyphens() {
        assert_eq!(norm("'quoted' -- dash- 'em"), ["quoted", "dash", "em"]);
    }

    #[test]
    fn maps_curly_apostrophes() {
        assert_eq!(norm("I\u{2019}m fine"), ["i'm", "fine"]);
    }

    #[test]
    fn strips_leading_speaker_stamp_once() {
        assert_eq!(
            norm("Speaker 0    00:00:02    um in a very beautiful city"),
            ["um", "in", "a", "very", "beautiful", "city"]
        );
        assert_eq!(norm("1 00:12 hello there"), ["hello", "there"]);
        // Only line-initial stamps are stripped.
        assert_eq!(
            norm("he said 0 00:12 hello")[..2],
            ["he".to_string(), "said".to_string()]
        );
    }

    #[test]
    fn speaker_stamp_strip_is_opt_out() {
        let config = NormalizationConfig {
            strip_leading_speaker_stamp: false,
            ..NormalizationConfig::default()
        };
        let seq = normalize(&RawTranscript::reference("Speaker 0 00:00:02 hi"), &config);
        assert_eq!(seq.tokens(), ["speaker", "0", "00", "00", "02", "hi"]);
    }

    #[test]
    fn tag_stripping_never_touches_tagless_input() {
        let stripped = NormalizationConfig::default();
        let kept = NormalizationConfig {
            strip_vendor_tags: false,
            ..NormalizationConfig::default()
        };
        for text in ["no tags here", "a < b and b > a", "5 < 6", ""] {
            let raw = RawTranscript::reference(text);
            assert_eq!(
                normalize(&raw, &stripped),
                normalize(&raw, &kept),
                "input {text:?}"
            );
        }
    }

    #[test]
    fn digit_word_map_expands_tokens() {
        let config = NormalizationConfig {
            digit_word_map: Some(BTreeMap::from([
                ("1".to_string(), "one".to_string()),
                ("23".to_string(), "twenty three".to_string()),
            ])),
            ..NormalizationConfig::default()
        };
        let seq = normalize(&RawTranscript::reference("1 woman, 23 men"), &config);
        assert_eq!(seq.tokens(), ["one", "woman", "twenty", "three", "men"]);
    }

    #[test]
    fn digits_kept_by_default() {
        assert_eq!(norm("1 woman"), ["1", "woman"]);
    }

    #[test]
    fn idempotent_on_assorted_inputs() {
        let config = NormalizationConfig::default();
        for text in [
            "Please open the windows.",
            "<silence> I'm -- \u{2018}sorry\u{2019} <affirmative>",
            "Speaker 1 00:00:12 C'est l'\u{e9}t\u{e9}, na\u{ef}ve caf\u{e9}!",
            "a<b>c 'x' -y- z--w",
            "\u{212b}ngstr\u{f6}m \u{c5}ngstrom",
        ] {
            let once = normalize(&RawTranscript::reference(text), &config);
            let twice = normalize(&RawTranscript::reference(once.joined()), &config);
            assert_eq!(once, twice, "input {text:?}");
        }
    }

    #[test]
    fn from_tokens_validates_invariants() {
        assert!(TokenSequence::from_tokens(["ok", "fine-by-me", "i'm"]).is_ok());
        assert!(TokenSequence::from_tokens(["two words"]).is_err());
        assert!(TokenSequence::from_tokens(["Upper"]).is_err());
        assert!(TokenSequence::from_tokens([""]).is_err());
        assert!(TokenSequence::from_tokens(["'edge"]).is_err());
    }
}
