//! OpenAI-compatible chat-completions client used to generate labeled notes.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::prompt::{build_prompt, PromptConfig, SYSTEM_MESSAGE, TRAILER_PREFIX};
use super::{SeedTemplate, SynthesisError};
use crate::corpus::{AnnotatedNote, AnnotationSource, Note, Provenance};
use crate::model::{DiagnosisRecord, Dimension};
use crate::normalization::normalize_value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub variants_per_template: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub model_name: String,
    /// Base URL (`.../v1`) or the full chat-completions URL.
    pub endpoint_url: String,
    pub max_concurrent_requests: usize,
    /// Retries after the first failed attempt.
    pub retry_limit: u32,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry_backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            variants_per_template: 10,
            temperature: 1.0,
            top_p: 1.0,
            model_name: "gpt-4".into(),
            endpoint_url: "https://api.openai.com/v1".into(),
            max_concurrent_requests: 4,
            retry_limit: 3,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 120,
            retry_backoff_ms: 500,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::Config(m));
        if self.variants_per_template < 1 {
            return bad("variants_per_template must be at least 1".into());
        }
        for (name, v) in [("temperature", self.temperature), ("top_p", self.top_p)] {
            if !(v > 0.0 && v <= 2.0) {
                return bad(format!("{name} must lie in (0, 2], got {v}"));
            }
        }
        if self.max_concurrent_requests < 1 {
            return bad("max_concurrent_requests must be at least 1".into());
        }
        if self.endpoint_url.trim().is_empty() {
            return bad("endpoint_url is empty".into());
        }
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty".into());
        }
        Ok(())
    }

    pub fn chat_url(&self) -> String {
        let base = self.endpoint_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Splits a completion into note text and the parsed label trailer.
///
/// The trailer is the last line starting with `LABELS:`. The record is
/// `None` when the trailer is missing, is not JSON, holds an unknown value or
/// describes an invalid record.
pub fn parse_completion(content: &str) -> (String, Option<DiagnosisRecord>) {
    let lines: Vec<&str> = content.lines().collect();
    let Some(pos) = lines
        .iter()
        .rposition(|l| l.trim_start().starts_with(TRAILER_PREFIX))
    else {
        return (content.trim_end().to_string(), None);
    };
    let json = lines[pos].trim_start()[TRAILER_PREFIX.len()..].trim();
    let mut body: Vec<&str> = lines[..pos].to_vec();
    body.extend_from_slice(&lines[pos + 1..]);
    let text = body.join("\n").trim_end().to_string();
    (text, parse_trailer(json))
}

fn parse_trailer(json: &str) -> Option<DiagnosisRecord> {
    let obj: serde_json::Map<String, Value> = serde_json::from_str(json).ok()?;
    let field = |key: &str, dim: Dimension| -> Result<Option<crate::model::EntityValue>, ()> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
            Some(Value::String(s)) => normalize_value(dim, s).map(Some).ok_or(()),
            Some(Value::Number(n)) => normalize_value(dim, &n.to_string()).map(Some).ok_or(()),
            Some(_) => Err(()),
        }
    };
    use crate::model::EntityValue as V;
    let status = match field("status", Dimension::Status).ok()?? {
        V::Status(s) => s,
        _ => return None,
    };
    let mut r = DiagnosisRecord::new(status);
    if let Some(V::Stage(v)) = field("stage", Dimension::Stage).ok()? {
        r.stage = Some(v);
    }
    if let Some(V::Grade(v)) = field("grade", Dimension::Grade).ok()? {
        r.grade = Some(v);
    }
    if let Some(V::Extent(v)) = field("extent", Dimension::Extent).ok()? {
        r.extent = Some(v);
    }
    if let Some(V::Subtype(v)) = field("subtype", Dimension::Subtype).ok()? {
        r.subtype = Some(v);
    }
    r.is_valid().then_some(r)
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

/// Blocking chat-completions client with bounded retries.
pub struct LlmGenerator {
    config: GenerationConfig,
    prompt: PromptConfig,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl LlmGenerator {
    pub fn new(
        config: GenerationConfig,
        prompt: PromptConfig,
        api_key: impl Into<String>,
    ) -> Result<Self, SynthesisError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| SynthesisError::Config(format!("http client: {e}")))?;
        Ok(LlmGenerator {
            config,
            prompt,
            api_key: api_key.into(),
            http,
        })
    }

    /// Reads the API key from the environment variable named in the config.
    pub fn from_env(
        config: GenerationConfig,
        prompt: PromptConfig,
    ) -> Result<Self, SynthesisError> {
        config.validate()?;
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                SynthesisError::Config(format!(
                    "environment variable {} is not set",
                    config.api_key_env
                ))
            })?;
        Self::new(config, prompt, key)
    }

    pub fn request_body(&self, template: &SeedTemplate) -> ChatRequest<'_> {
        ChatRequest {
            model: &self.config.model_name,
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: SYSTEM_MESSAGE.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: build_prompt(template, &self.prompt),
                },
            ],
            temperature: self.config.temperature,
            top_p: self.config.top_p,
        }
    }

    fn attempt(&self, body: &ChatRequest<'_>) -> Attempt {
        let resp = match self
            .http
            .post(self.config.chat_url())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport error: {e}")),
        };
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Attempt::Fatal(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            ));
        }
        match resp.json::<ChatResponse>() {
            Ok(r) => match r.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fatal("response has no message content".into()),
            },
            Err(e) => Attempt::Fatal(format!("unreadable response: {e}")),
        }
    }

    /// One completion, retried up to `retry_limit` times on transport
    /// errors, 429 and 5xx responses.
    pub fn complete(
        &self,
        template: &SeedTemplate,
        variant: usize,
    ) -> Result<String, SynthesisError> {
        let body = self.request_body(template);
        let mut last = String::new();
        let attempts = self.config.retry_limit as usize + 1;
        for attempt in 0..attempts {
            if attempt > 0 && self.config.retry_backoff_ms > 0 {
                let factor = 1u64 << (attempt - 1).min(6);
                std::thread::sleep(Duration::from_millis(self.config.retry_backoff_ms * factor));
            }
            match self.attempt(&body) {
                Attempt::Done(content) => return Ok(content),
                Attempt::Retry(msg) => last = msg,
                Attempt::Fatal(msg) => {
                    return Err(SynthesisError::Request {
                        template: template.note.note_id.clone(),
                        variant,
                        attempts: attempt + 1,
                        message: msg,
                    })
                }
            }
        }
        Err(SynthesisError::Request {
            template: template.note.note_id.clone(),
            variant,
            attempts,
            message: last,
        })
    }

    /// Issues `variants_per_template` independent requests per template,
    /// at most `max_concurrent_requests` at a time. Output is ordered by
    /// (template, variant). The first failure aborts the run.
    pub fn generate(
        &self,
        templates: &[SeedTemplate],
    ) -> Result<Vec<AnnotatedNote>, SynthesisError> {
        let per = self.config.variants_per_template;
        let jobs = templates.len() * per;
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let results: Mutex<Vec<Option<Result<String, SynthesisError>>>> =
            Mutex::new((0..jobs).map(|_| None).collect());
        let workers = self.config.max_concurrent_requests.min(jobs.max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let job = next.fetch_add(1, Ordering::Relaxed);
                    if job >= jobs {
                        break;
                    }
                    let res = self.complete(&templates[job / per], job % per);
                    if res.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    results.lock().unwrap()[job] = Some(res);
                });
            }
        });
        let results = results.into_inner().unwrap();
        let mut notes = Vec::with_capacity(jobs);
        for (job, res) in results.into_iter().enumerate() {
            let template = &templates[job / per];
            let variant = job % per;
            let content = match res {
                Some(r) => r?,
                // skipped after another request failed
                None => continue,
            };
            let (text, record) = parse_completion(&content);
            let mut note = AnnotatedNote::new(
                Note {
                    note_id: format!("{}-llm{:02}", template.note.note_id, variant),
                    site_id: template.note.site_id.clone(),
                    text,
                    provenance: Provenance::LlmGenerated,
                },
                AnnotationSource::Embedded,
            );
            note.record = record;
            notes.push(note);
        }
        if notes.len() != jobs {
            return Err(SynthesisError::Config("generation aborted".into()));
        }
        Ok(notes)
    }
}

/// Generates notes for `templates` against the configured endpoint, reading
/// the API key from the configured environment variable.
pub fn generate_llm(
    templates: &[SeedTemplate],
    config: &GenerationConfig,
    prompt: &PromptConfig,
) -> Result<Vec<AnnotatedNote>, SynthesisError> {
    LlmGenerator::from_env(config.clone(), prompt.clone())?.generate(templates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Extent, Grade, Stage, Subtype};

    #[test]
    fn completion_trailer_is_parsed_and_removed() {
        let content = "Pt seen for SRP.\nD: Generalized Periodontitis Stage III Grade B.\nLABELS: {\"status\":\"Periodontitis\",\"stage\":\"3\",\"grade\":\"b\",\"extent\":\"Generalized\"}\n";
        let (text, record) = parse_completion(content);
        assert_eq!(
            text,
            "Pt seen for SRP.\nD: Generalized Periodontitis Stage III Grade B."
        );
        assert_eq!(
            record,
            Some(DiagnosisRecord::periodontitis(
                Some(Stage::III),
                Some(Grade::B),
                Some(Extent::Generalized)
            ))
        );
    }

    #[test]
    fn bad_trailers_yield_no_record() {
        assert_eq!(parse_completion("no trailer").1, None);
        assert_eq!(parse_completion("x\nLABELS: {not json").1, None);
        assert_eq!(
            parse_completion("x\nLABELS: {\"status\":\"Wellness\"}").1,
            None
        );
        assert_eq!(
            parse_completion("x\nLABELS: {\"status\":\"Health\",\"stage\":\"II\"}").1,
            None
        );
        assert_eq!(
            parse_completion(
                "x\nLABELS: {\"status\":\"Health\",\"subtype\":\"Intact Periodontium\"}"
            )
            .1,
            Some(DiagnosisRecord::health(Some(Subtype::IntactPeriodontium)))
        );
    }

    #[test]
    fn config_validation() {
        assert!(GenerationConfig::default().validate().is_ok());
        let c = GenerationConfig {
            temperature: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = GenerationConfig {
            top_p: 2.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = GenerationConfig {
            variants_per_template: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn chat_url_forms() {
        let mut c = GenerationConfig::default();
        assert_eq!(c.chat_url(), "https://api.openai.com/v1/chat/completions");
        c.endpoint_url = "http://localhost:9/v1/chat/completions/".into();
        assert_eq!(c.chat_url(), "http://localhost:9/v1/chat/completions");
    }

    #[test]
    fn missing_api_key_is_a_config_error() {
        let c = GenerationConfig {
            api_key_env: "PERIO_TEST_KEY_THAT_DOES_NOT_EXIST".into(),
            ..Default::default()
        };
        assert!(matches!(
            LlmGenerator::from_env(c, PromptConfig::default()),
            Err(SynthesisError::Config(_))
        ));
    }
}
