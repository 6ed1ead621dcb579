//! Client for a Google Translate v2 style endpoint.
//!
//! Request: `POST <endpoint>` with JSON
//! `{"q": "<text>", "source": "en", "target": "<code>", "format": "text"}`
//! and the API key, when configured, in the `X-Goog-Api-Key` header.
//! Response: `{"data": {"translations": [{"translatedText": "..."}]}}`.

use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ProviderError, ProviderKind, TranslationProvider, TranslationRequest};

const BACKOFF_BASE: Duration = Duration::from_millis(250);

/// ISO 639-1 code for a label name; unknown names pass through unchanged.
pub fn language_code(label: &str) -> &str {
    match label {
        "english" => "en",
        "hindi" => "hi",
        "russian" => "ru",
        "chinese" => "zh",
        other => other,
    }
}

#[derive(Serialize)]
struct Request<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
    format: &'a str,
}

#[derive(Deserialize)]
struct Response {
    data: ResponseData,
}

#[derive(Deserialize)]
struct ResponseData {
    translations: Vec<Translation>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Translation {
    translated_text: String,
}

pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
    max_retries: u32,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl HttpProvider {
    pub fn new(endpoint: String, api_key: Option<String>, timeout: Duration, max_retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpProvider {
            endpoint,
            api_key,
            timeout,
            max_retries,
            agent,
        }
    }

    fn attempt(&self, request: &TranslationRequest) -> Result<String, String> {
        let body = Request {
            q: &request.text,
            source: "en",
            target: language_code(&request.target.name),
            format: "text",
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("X-Goog-Api-Key", key);
        }
        let mut response = call.send_json(&body).map_err(|e| e.to_string())?;
        let parsed: Response = response.body_mut().read_json().map_err(|e| e.to_string())?;
        parsed
            .data
            .translations
            .into_iter()
            .next()
            .map(|t| t.translated_text)
            .ok_or_else(|| "response carried no translations".to_string())
    }
}

impl TranslationProvider for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn translate(&self, request: &TranslationRequest) -> Result<String, ProviderError> {
        let deadline = Instant::now() + self.timeout;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let err = match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(err) => err,
            };
            if attempts > self.max_retries {
                return Err(ProviderError::Http { attempts, message: err });
            }
            let backoff = BACKOFF_BASE * 2u32.pow(attempts - 1);
            let jitter = rand::rng().random_range(0..=backoff.as_millis() as u64);
            let wait = backoff + Duration::from_millis(jitter);
            if Instant::now() + wait >= deadline {
                return Err(ProviderError::Http {
                    attempts,
                    message: format!("{err} (retry budget exhausted)"),
                });
            }
            thread::sleep(wait);
        }
    }
}
