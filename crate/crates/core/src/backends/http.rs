//! Live HTTP execution of request plans.
//!
//! Each vendor adapter here is deliberately thin: it attaches credentials,
//! ships the audio, applies the already-built option flags from the
//! [`RequestPlan`], and extracts the transcript text. Asynchronous vendors
//! are polled at a fixed 1 s interval until the job completes or the
//! overall deadline passes. Vendor request shapes drift over time; only
//! this file needs to change when they do, because the condition-mapping
//! contract lives in [`super::request`].

use std::time::{Duration, Instant};

use base64::Engine as _;
use reqwest::blocking::{multipart, Client, RequestBuilder, Response};
use serde_json::{json, Map, Value};

use super::request::{AuthScheme, RequestPlan};
use super::{BackendError, BackendId};

const POLL_INTERVAL: Duration = Duration::from_secs(1);

/// Executes one transcription request and returns `(raw_text, status)`.
///
/// `status` is the vendor's final job status (e.g. "completed"); callers use
/// it only for bookkeeping. Errors are classified so the caller can retry
/// transport failures specifically.
pub fn execute_live(
    plan: &RequestPlan,
    key: &str,
    audio: &[u8],
    timeout_s: f64,
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let client = Client::builder()
        .timeout(Duration::from_secs_f64(timeout_s.max(1.0)))
        .build()
        .map_err(|err| transport(backend, err))?;
    let deadline = Instant::now() + Duration::from_secs_f64(timeout_s.max(1.0));

    match backend {
        BackendId::Assemblyai => assemblyai(plan, &client, key, audio, deadline, timeout_s),
        BackendId::Deepgram => deepgram(plan, &client, key, audio),
        BackendId::Revai => revai(plan, &client, key, audio, deadline, timeout_s),
        BackendId::Speechmatics => speechmatics(plan, &client, key, audio, deadline, timeout_s),
        BackendId::WhisperReplicate => replicate(plan, &client, key, audio, deadline, timeout_s),
        BackendId::Replay => Err(BackendError::InvalidConfig(
            "the replay backend has no live endpoint".into(),
        )),
    }
}

fn transport(backend: BackendId, err: reqwest::Error) -> BackendError {
    BackendError::Transport {
        backend,
        detail: err.to_string(),
    }
}

fn auth_value(scheme: AuthScheme, key: &str) -> String {
    match scheme {
        AuthScheme::Raw => key.to_owned(),
        AuthScheme::Bearer => format!("Bearer {key}"),
        AuthScheme::Token => format!("Token {key}"),
    }
}

fn send(backend: BackendId, builder: RequestBuilder) -> Result<Response, BackendError> {
    let response = builder.send().map_err(|err| transport(backend, err))?;
    let status = response.status();
    if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
        return Err(BackendError::Auth {
            backend,
            status: status.to_string(),
        });
    }
    if !status.is_success() {
        let detail = response
            .text()
            .unwrap_or_default()
            .chars()
            .take(500)
            .collect();
        return Err(BackendError::Vendor {
            backend,
            status: status.to_string(),
            detail,
        });
    }
    Ok(response)
}

fn read_json(backend: BackendId, response: Response) -> Result<Value, BackendError> {
    response.json().map_err(|err| BackendError::Vendor {
        backend,
        status: "invalid response body".to_owned(),
        detail: err.to_string(),
    })
}

fn missing_field(backend: BackendId, field: &str, value: &Value) -> BackendError {
    BackendError::Vendor {
        backend,
        status: "unexpected response shape".to_owned(),
        detail: format!("missing {field} in {}", summarize(value)),
    }
}

fn summarize(value: &Value) -> String {
    let text = value.to_string();
    text.chars().take(300).collect()
}

/// Interprets a flag string as its JSON value: booleans stay booleans,
/// everything else is a string.
fn flag_value(raw: &str) -> Value {
    match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        other => Value::String(other.to_owned()),
    }
}

/// Repeatedly invokes `step` at the polling interval until it yields a
/// result or the deadline passes.
fn poll<T>(
    backend: BackendId,
    deadline: Instant,
    timeout_s: f64,
    mut step: impl FnMut() -> Result<Option<T>, BackendError>,
) -> Result<T, BackendError> {
    loop {
        if let Some(done) = step()? {
            return Ok(done);
        }
        if Instant::now() + POLL_INTERVAL > deadline {
            return Err(BackendError::Timeout { backend, timeout_s });
        }
        std::thread::sleep(POLL_INTERVAL);
    }
}

fn assemblyai(
    plan: &RequestPlan,
    client: &Client,
    key: &str,
    audio: &[u8],
    deadline: Instant,
    timeout_s: f64,
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let auth = auth_value(plan.auth, key);

    let upload = send(
        backend,
        client
            .post("https://api.assemblyai.com/v2/upload")
            .header("authorization", &auth)
            .body(audio.to_vec()),
    )?;
    let upload_json = read_json(backend, upload)?;
    let audio_url = upload_json["upload_url"]
        .as_str()
        .ok_or_else(|| missing_field(backend, "upload_url", &upload_json))?
        .to_owned();

    let mut body = Map::new();
    body.insert("audio_url".to_owned(), Value::String(audio_url));
    for (name, raw) in plan.parameters() {
        body.insert(name.clone(), flag_value(raw));
    }
    let created = send(
        backend,
        client
            .post(&plan.endpoint)
            .header("authorization", &auth)
            .json(&Value::Object(body)),
    )?;
    let created_json = read_json(backend, created)?;
    let id = created_json["id"]
        .as_str()
        .ok_or_else(|| missing_field(backend, "id", &created_json))?
        .to_owned();

    poll(backend, deadline, timeout_s, || {
        let status_response = send(
            backend,
            client
                .get(format!("{}/{id}", plan.endpoint))
                .header("authorization", &auth),
        )?;
        let body = read_json(backend, status_response)?;
        match body["status"].as_str().unwrap_or("") {
            "completed" => {
                let text = body["text"].as_str().unwrap_or("").to_owned();
                Ok(Some((text, "completed".to_owned())))
            }
            "error" => Err(BackendError::Vendor {
                backend,
                status: "error".to_owned(),
                detail: body["error"].as_str().unwrap_or("unknown").to_owned(),
            }),
            _ => Ok(None),
        }
    })
}

fn deepgram(
    plan: &RequestPlan,
    client: &Client,
    key: &str,
    audio: &[u8],
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let query: Vec<(&str, &str)> = plan
        .parameters()
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    let response = send(
        backend,
        client
            .post(&plan.endpoint)
            .query(&query)
            .header("authorization", auth_value(plan.auth, key))
            .header("content-type", "audio/wav")
            .body(audio.to_vec()),
    )?;
    let body = read_json(backend, response)?;
    let text = parse_deepgram_transcript(&body).ok_or_else(|| {
        missing_field(
            backend,
            "results.channels[0].alternatives[0].transcript",
            &body,
        )
    })?;
    Ok((text, "completed".to_owned()))
}

pub(crate) fn parse_deepgram_transcript(body: &Value) -> Option<String> {
    body["results"]["channels"][0]["alternatives"][0]["transcript"]
        .as_str()
        .map(str::to_owned)
}

fn revai(
    plan: &RequestPlan,
    client: &Client,
    key: &str,
    audio: &[u8],
    deadline: Instant,
    timeout_s: f64,
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let auth = auth_value(plan.auth, key);

    let mut options = Map::new();
    for (name, raw) in plan.parameters() {
        options.insert(name.clone(), flag_value(raw));
    }
    let form = multipart::Form::new()
        .part(
            "media",
            multipart::Part::bytes(audio.to_vec())
                .file_name("audio.wav")
                .mime_str("audio/wav")
                .map_err(|err| transport(backend, err))?,
        )
        .text("options", Value::Object(options).to_string());
    let created = send(
        backend,
        client
            .post(&plan.endpoint)
            .header("authorization", &auth)
            .multipart(form),
    )?;
    let created_json = read_json(backend, created)?;
    let id = created_json["id"]
        .as_str()
        .ok_or_else(|| missing_field(backend, "id", &created_json))?
        .to_owned();

    poll(backend, deadline, timeout_s, || {
        let status_response = send(
            backend,
            client
                .get(format!("{}/{id}", plan.endpoint))
                .header("authorization", &auth),
        )?;
        let body = read_json(backend, status_response)?;
        match body["status"].as_str().unwrap_or("") {
            "transcribed" => {
                // The plain-text format carries a leading `Speaker N HH:MM:SS`
                // stamp; it is kept verbatim here and stripped downstream by
                // normalization.
                let transcript = send(
                    backend,
                    client
                        .get(format!("{}/{id}/transcript", plan.endpoint))
                        .header("authorization", &auth)
                        .header("accept", "text/plain"),
                )?;
                let text = transcript.text().map_err(|err| transport(backend, err))?;
                Ok(Some((text, "transcribed".to_owned())))
            }
            "failed" => Err(BackendError::Vendor {
                backend,
                status: "failed".to_owned(),
                detail: body["failure_detail"]
                    .as_str()
                    .unwrap_or("unknown")
                    .to_owned(),
            }),
            _ => Ok(None),
        }
    })
}

fn speechmatics(
    plan: &RequestPlan,
    client: &Client,
    key: &str,
    audio: &[u8],
    deadline: Instant,
    timeout_s: f64,
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let auth = auth_value(plan.auth, key);

    let mut filtering = Map::new();
    for (name, raw) in plan.parameters() {
        filtering.insert(name.clone(), flag_value(raw));
    }
    let config = json!({
        "type": "transcription",
        "transcription_config": {
            "language": "en",
            "transcript_filtering_config": Value::Object(filtering),
        },
    });
    let form = multipart::Form::new()
        .part(
            "data_file",
            multipart::Part::bytes(audio.to_vec())
                .file_name("audio.wav")
                .mime_str("audio/wav")
                .map_err(|err| transport(backend, err))?,
        )
        .text("config", config.to_string());
    let created = send(
        backend,
        client
            .post(&plan.endpoint)
            .header("authorization", &auth)
            .multipart(form),
    )?;
    let created_json = read_json(backend, created)?;
    let id = created_json["id"]
        .as_str()
        .ok_or_else(|| missing_field(backend, "id", &created_json))?
        .to_owned();

    poll(backend, deadline, timeout_s, || {
        let status_response = send(
            backend,
            client
                .get(format!("{}/{id}", plan.endpoint))
                .header("authorization", &auth),
        )?;
        let body = read_json(backend, status_response)?;
        match body["job"]["status"].as_str().unwrap_or("") {
            "done" => {
                let transcript = send(
                    backend,
                    client
                        .get(format!("{}/{id}/transcript", plan.endpoint))
                        .query(&[("format", "txt")])
                        .header("authorization", &auth),
                )?;
                let text = transcript.text().map_err(|err| transport(backend, err))?;
                Ok(Some((text, "done".to_owned())))
            }
            "rejected" | "deleted" | "expired" => Err(BackendError::Vendor {
                backend,
                status: body["job"]["status"]
                    .as_str()
                    .unwrap_or("rejected")
                    .to_owned(),
                detail: summarize(&body),
            }),
            _ => Ok(None),
        }
    })
}

fn replicate(
    plan: &RequestPlan,
    client: &Client,
    key: &str,
    audio: &[u8],
    deadline: Instant,
    timeout_s: f64,
) -> Result<(String, String), BackendError> {
    let backend = plan.backend_id;
    let auth = auth_value(plan.auth, key);

    let mut input = Map::new();
    input.insert("audio".to_owned(), Value::String(data_uri(audio)));
    let mut version = Value::Null;
    for (name, raw) in plan.parameters() {
        if name == "version" {
            version = Value::String(raw.clone());
        } else {
            input.insert(name.clone(), flag_value(raw));
        }
    }
    let body = json!({ "version": version, "input": Value::Object(input) });
    let created = send(
        backend,
        client
            .post(&plan.endpoint)
            .header("authorization", &auth)
            .json(&body),
    )?;
    let created_json = read_json(backend, created)?;
    let poll_url = created_json["urls"]["get"]
        .as_str()
        .map(str::to_owned)
        .or_else(|| {
            created_json["id"]
                .as_str()
                .map(|id| format!("{}/{id}", plan.endpoint))
        })
        .ok_or_else(|| missing_field(backend, "urls.get or id", &created_json))?;

    poll(backend, deadline, timeout_s, || {
        let status_response = send(
            backend,
            client.get(&poll_url).header("authorization", &auth),
        )?;
        let body = read_json(backend, status_response)?;
        match body["status"].as_str().unwrap_or("") {
            "succeeded" => {
                let text = parse_replicate_output(&body)
                    .ok_or_else(|| missing_field(backend, "output", &body))?;
                Ok(Some((text, "succeeded".to_owned())))
            }
            "failed" | "canceled" => Err(BackendError::Vendor {
                backend,
                status: body["status"].as_str().unwrap_or("failed").to_owned(),
                detail: body["error"].as_str().unwrap_or("unknown").to_owned(),
            }),
            _ => Ok(None),
        }
    })
}

/// Inlines audio as a `data:` URI, the upload-free way to pass files to the
/// predictions API.
pub(crate) fn data_uri(audio: &[u8]) -> String {
    format!(
        "data:audio/wav;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(audio)
    )
}

/// The hosted Whisper model returns either a plain string output or an
/// object with a `transcription` field, depending on version.
pub(crate) fn parse_replicate_output(body: &Value) -> Option<String> {
    match &body["output"] {
        Value::String(text) => Some(text.clone()),
        Value::Object(map) => map
            .get("transcription")
            .and_then(Value::as_str)
            .map(str::to_owned),
        _ => None,
    }
}
