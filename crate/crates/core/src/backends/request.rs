//! Pure construction of vendor request plans.
//!
//! A [`RequestPlan`] captures everything about a transcription request that
//! does not depend on credentials or audio bytes: endpoint, body shape, and
//! most importantly the vendor-specific flags that encode the disfluency
//! condition. Keeping the builders pure lets tests assert the central
//! invariant directly: for every vendor, the retained-condition request
//! differs from the omitted-condition request in exactly the documented
//! flag.

use std::collections::BTreeMap;

use super::{BackendId, DisfluencyCondition, RequestFlags};

/// How the audio and options travel to the vendor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyKind {
    /// Audio bytes are the body; options ride in the query string.
    RawAudio,
    /// Audio is uploaded (or inlined) first, then a JSON body with options.
    JsonWithUpload,
    /// Multipart form: audio file part plus a JSON options part.
    Multipart,
}

/// How the credential is attached.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuthScheme {
    /// `Authorization: <key>`
    Raw,
    /// `Authorization: Bearer <key>`
    Bearer,
    /// `Authorization: Token <key>`
    Token,
}

/// A fully determined transcription request, minus secrets and audio.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestPlan {
    pub backend_id: BackendId,
    pub condition: DisfluencyCondition,
    /// Endpoint that receives the job (for async vendors, the job-creation
    /// endpoint; polling URLs derive from its response).
    pub endpoint: String,
    pub body: BodyKind,
    pub auth: AuthScheme,
    /// Name of the audio part or field, where the body shape needs one.
    pub audio_field: Option<&'static str>,
    parameters: RequestFlags,
}

impl RequestPlan {
    /// The vendor-specific option flags this request will carry, as
    /// name/value strings in a sorted map.
    pub fn parameters(&self) -> &RequestFlags {
        &self.parameters
    }
}

/// Version identifier of the hosted Whisper (large-v3) model used through
/// the Replicate predictions API.
pub const REPLICATE_WHISPER_VERSION: &str =
    "3c08daf437fe359eb158a5123c395673f0a113dd8b4bd01ddce5936850e2a981";

fn flags<const N: usize>(pairs: [(&str, String); N]) -> RequestFlags {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect::<BTreeMap<_, _>>()
}

/// Builds the request plan for one backend under one disfluency condition.
///
/// Polarity per vendor:
/// - assemblyai: `disfluencies=true` retains
/// - deepgram: `filler_words=true` retains
/// - revai: `remove_disfluencies=false` retains
/// - speechmatics: `remove_disfluencies=false` retains
/// - whisper (Replicate): no native flag; the `initial_prompt` is attached
///   only in the retained condition
///
/// The replay backend never issues requests; its plan is empty and inert.
pub fn request_plan(
    backend_id: BackendId,
    condition: DisfluencyCondition,
    initial_prompt: Option<&str>,
) -> RequestPlan {
    let retained = condition == DisfluencyCondition::Retained;
    match backend_id {
        BackendId::Assemblyai => RequestPlan {
            backend_id,
            condition,
            endpoint: "https://api.assemblyai.com/v2/transcript".to_owned(),
            body: BodyKind::JsonWithUpload,
            auth: AuthScheme::Raw,
            audio_field: Some("audio_url"),
            parameters: flags([("disfluencies", retained.to_string())]),
        },
        BackendId::Deepgram => RequestPlan {
            backend_id,
            condition,
            endpoint: "https://api.deepgram.com/v1/listen".to_owned(),
            body: BodyKind::RawAudio,
            auth: AuthScheme::Token,
            audio_field: None,
            parameters: flags([("filler_words", retained.to_string())]),
        },
        BackendId::Revai => RequestPlan {
            backend_id,
            condition,
            endpoint: "https://api.rev.ai/speechtotext/v1/jobs".to_owned(),
            body: BodyKind::Multipart,
            auth: AuthScheme::Bearer,
            audio_field: Some("media"),
            parameters: flags([("remove_disfluencies", (!retained).to_string())]),
        },
        BackendId::Speechmatics => RequestPlan {
            backend_id,
            condition,
            endpoint: "https://asr.api.speechmatics.com/v2/jobs".to_owned(),
            body: BodyKind::Multipart,
            auth: AuthScheme::Bearer,
            audio_field: Some("data_file"),
            parameters: flags([("remove_disfluencies", (!retained).to_string())]),
        },
        BackendId::WhisperReplicate => {
            let mut parameters = flags([("version", REPLICATE_WHISPER_VERSION.to_owned())]);
            if retained {
                if let Some(prompt) = initial_prompt {
                    parameters.insert("initial_prompt".to_owned(), prompt.to_owned());
                }
            }
            RequestPlan {
                backend_id,
                condition,
                endpoint: "https://api.replicate.com/v1/predictions".to_owned(),
                body: BodyKind::JsonWithUpload,
                auth: AuthScheme::Bearer,
                audio_field: Some("audio"),
                parameters,
            }
        }
        BackendId::Replay => RequestPlan {
            backend_id,
            condition,
            endpoint: String::new(),
            body: BodyKind::RawAudio,
            auth: AuthScheme::Raw,
            audio_field: None,
            parameters: RequestFlags::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROMPT: &str = "man woman suitcase city um uh";

    /// Returns (key, omitted value, retained value) for the single flag
    /// that differs between the two conditions.
    fn single_diff(
        backend: BackendId,
        prompt: Option<&str>,
    ) -> (String, Option<String>, Option<String>) {
        let omitted = request_plan(backend, DisfluencyCondition::Omitted, prompt);
        let retained = request_plan(backend, DisfluencyCondition::Retained, prompt);
        let keys: std::collections::BTreeSet<&String> = omitted
            .parameters()
            .keys()
            .chain(retained.parameters().keys())
            .collect();
        let mut diffs = Vec::new();
        for key in keys {
            let left = omitted.parameters().get(key).cloned();
            let right = retained.parameters().get(key).cloned();
            if left != right {
                diffs.push((key.clone(), left, right));
            }
        }
        assert_eq!(
            diffs.len(),
            1,
            "{backend}: expected exactly one differing flag, found {diffs:?}"
        );
        diffs.pop().unwrap()
    }

    #[test]
    fn assemblyai_toggles_disfluencies() {
        let (key, omitted, retained) = single_diff(BackendId::Assemblyai, None);
        assert_eq!(key, "disfluencies");
        assert_eq!(omitted.as_deref(), Some("false"));
        assert_eq!(retained.as_deref(), Some("true"));
    }

    #[test]
    fn deepgram_toggles_filler_words() {
        let (key, omitted, retained) = single_diff(BackendId::Deepgram, None);
        assert_eq!(key, "filler_words");
        assert_eq!(omitted.as_deref(), Some("false"));
        assert_eq!(retained.as_deref(), Some("true"));
    }

    #[test]
    fn revai_toggles_remove_disfluencies_inverted() {
        let (key, omitted, retained) = single_diff(BackendId::Revai, None);
        assert_eq!(key, "remove_disfluencies");
        assert_eq!(omitted.as_deref(), Some("true"));
        assert_eq!(retained.as_deref(), Some("false"));
    }

    #[test]
    fn speechmatics_toggles_remove_disfluencies_inverted() {
        let (key, omitted, retained) = single_diff(BackendId::Speechmatics, None);
        assert_eq!(key, "remove_disfluencies");
        assert_eq!(omitted.as_deref(), Some("true"));
        assert_eq!(retained.as_deref(), Some("false"));
    }

    #[test]
    fn whisper_attaches_prompt_only_when_retaining() {
        let (key, omitted, retained) = single_diff(BackendId::WhisperReplicate, Some(PROMPT));
        assert_eq!(key, "initial_prompt");
        assert_eq!(omitted, None);
        assert_eq!(retained.as_deref(), Some(PROMPT));

        // Without a prompt the two conditions are indistinguishable, and the
        // omitted condition never carries one even if configured.
        let no_prompt = request_plan(
            BackendId::WhisperReplicate,
            DisfluencyCondition::Omitted,
            Some(PROMPT),
        );
        assert!(!no_prompt.parameters().contains_key("initial_prompt"));
        let bare_retained = request_plan(
            BackendId::WhisperReplicate,
            DisfluencyCondition::Retained,
            None,
        );
        assert!(!bare_retained.parameters().contains_key("initial_prompt"));
    }

    #[test]
    fn prompt_is_ignored_by_other_vendors() {
        for backend in [
            BackendId::Assemblyai,
            BackendId::Deepgram,
            BackendId::Revai,
            BackendId::Speechmatics,
        ] {
            let plan = request_plan(backend, DisfluencyCondition::Retained, Some(PROMPT));
            assert!(
                !plan.parameters().contains_key("initial_prompt"),
                "{backend} must not carry a prompt"
            );
        }
    }

    #[test]
    fn replay_plan_is_inert() {
        let plan = request_plan(BackendId::Replay, DisfluencyCondition::Omitted, None);
        assert!(plan.endpoint.is_empty());
        assert!(plan.parameters().is_empty());
    }
}
