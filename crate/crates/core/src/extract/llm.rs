use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;

use super::{ExtractError, LlmRequest, LlmResponse};
use crate::attributes::{AttributeKey, NOT_MENTIONED};
use crate::ingest::ContentHash;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub temperature: f64,
    pub max_retries: u32,
    pub backend_id: String,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            temperature: DEFAULT_TEMPERATURE,
            max_retries: 3,
            backend_id: "mock".into(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ExtractError::InvalidParams(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, 5xx, rate limiting.
    #[error("transient: {0}")]
    Transient(String),
    /// Retrying will not help: bad credentials, malformed request.
    #[error("rejected: {0}")]
    Rejected(String),
}

pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, req: &LlmRequest, params: &ModelParams) -> Result<String, BackendError>;
}

/// Exponential retry delays: `base * factor^attempt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub factor: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            base: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl Backoff {
    pub const NONE: Backoff = Backoff {
        base: Duration::ZERO,
        factor: 2,
    };

    pub fn delay(&self, attempt: u32) -> Duration {
        self.base.saturating_mul(self.factor.saturating_pow(attempt))
    }
}

pub fn query_llm(
    backend: &dyn LlmBackend,
    req: &LlmRequest,
    params: &ModelParams,
) -> Result<LlmResponse, ExtractError> {
    query_llm_with(backend, req, params, &Backoff::default())
}

/// Calls the backend, retrying transient failures up to `params.max_retries`
/// times.
pub fn query_llm_with(
    backend: &dyn LlmBackend,
    req: &LlmRequest,
    params: &ModelParams,
    backoff: &Backoff,
) -> Result<LlmResponse, ExtractError> {
    params.validate()?;
    let start = Instant::now();
    let mut attempt = 0;
    loop {
        match backend.complete(req, params) {
            Ok(text) => {
                return Ok(LlmResponse {
                    text,
                    latency_ms: start.elapsed().as_secs_f64() * 1000.0,
                })
            }
            Err(BackendError::Rejected(m)) => return Err(ExtractError::BackendRejected(m)),
            Err(BackendError::Transient(m)) => {
                if attempt >= params.max_retries {
                    return Err(ExtractError::BackendUnavailable {
                        attempts: attempt + 1,
                        message: m,
                    });
                }
                let wait = backoff.delay(attempt);
                log::debug!("{}: transient failure ({m}), retrying in {wait:?}", backend.id());
                std::thread::sleep(wait);
                attempt += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LexiconEntry {
    key: AttributeKey,
    value: String,
    triggers: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    text: Vec<LexiconRow>,
    #[serde(default)]
    images: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconRow {
    attribute: String,
    value: String,
    #[serde(default)]
    triggers: Vec<String>,
}

/// Deterministic offline backend.
///
/// Text requests: every lexicon entry whose trigger phrase occurs in the
/// payload (case-insensitive, on word boundaries) contributes its value,
/// ordered by first occurrence. Image requests: the response registered for
/// the image's sha-256; unknown images get an all-"Not Mentioned" answer.
/// Temperature is ignored.
#[derive(Debug, Clone, Default)]
pub struct MockLlm {
    entries: Vec<LexiconEntry>,
    images: HashMap<String, String>,
}

impl MockLlm {
    pub fn new() -> Self {
        MockLlm::default()
    }

    pub fn with_text(mut self, key: AttributeKey, value: &str, triggers: &[&str]) -> Self {
        self.entries.push(LexiconEntry {
            key,
            value: value.to_string(),
            triggers: triggers.iter().map(|t| t.to_lowercase()).collect(),
        });
        self
    }

    pub fn with_image(mut self, sha256_hex: &str, response: &str) -> Self {
        self.images.insert(sha256_hex.to_lowercase(), response.to_string());
        self
    }

    pub fn from_toml(src: &str) -> Result<Self, ExtractError> {
        let file: LexiconFile = toml::from_str(src).map_err(|e| ExtractError::Lexicon(e.to_string()))?;
        let mut mock = MockLlm::new();
        for row in file.text {
            let key = AttributeKey::lookup(&row.attribute)
                .ok_or_else(|| ExtractError::Lexicon(format!("unknown attribute {:?}", row.attribute)))?;
            let mut triggers: Vec<String> = row.triggers.iter().map(|t| t.to_lowercase()).collect();
            if triggers.is_empty() {
                triggers.push(row.value.to_lowercase());
            }
            mock.entries.push(LexiconEntry {
                key,
                value: row.value,
                triggers,
            });
        }
        for (hash, response) in file.images {
            mock = mock.with_image(&hash, &response);
        }
        Ok(mock)
    }

    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ExtractError::Lexicon(format!("{}: {e}", path.display())))?;
        MockLlm::from_toml(&src)
    }

    fn answer_text(&self, payload: &str) -> String {
        let hay = payload.to_lowercase();
        let mut hits: Vec<(usize, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                e.triggers
                    .iter()
                    .filter_map(|t| find_word(&hay, t))
                    .min()
                    .map(|pos| (pos, i))
            })
            .collect();
        hits.sort();
        let mut lines = Vec::with_capacity(8);
        for key in AttributeKey::ALL {
            let vals: Vec<&str> = hits
                .iter()
                .map(|&(_, i)| &self.entries[i])
                .filter(|e| e.key == key)
                .map(|e| e.value.as_str())
                .collect();
            let rhs = if vals.is_empty() {
                NOT_MENTIONED.to_string()
            } else {
                vals.join(", ")
            };
            lines.push(format!("{}: {rhs}", key.display_name()));
        }
        lines.join("\n")
    }

    fn answer_image(&self, data: &str) -> Result<String, BackendError> {
        let bytes = STANDARD
            .decode(data)
            .map_err(|e| BackendError::Rejected(format!("bad base64 payload: {e}")))?;
        let hash = ContentHash::of(&bytes).to_hex();
        Ok(match self.images.get(&hash) {
            Some(r) => r.clone(),
            None => AttributeKey::ALL
                .iter()
                .map(|k| format!("{}: {NOT_MENTIONED}", k.display_name()))
                .collect::<Vec<_>>()
                .join("\n"),
        })
    }
}

/// First byte offset of `needle` in `hay` with non-alphanumeric neighbours.
fn find_word(hay: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let mut from = 0;
    while let Some(rel) = hay[from..].find(needle) {
        let at = from + rel;
        let end = at + needle.len();
        let before_ok = hay[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + hay[at..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

impl LlmBackend for MockLlm {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &LlmRequest, _params: &ModelParams) -> Result<String, BackendError> {
        match &req.image {
            Some(img) => self.answer_image(&img.data),
            None => Ok(self.answer_text(req.payload_text())),
        }
    }
}

/// JSON-over-HTTP backend.
///
/// Request body: `{"model", "temperature", "parts": [{"text"}, {"inlineData":
/// {"mimeType", "data"}}]}`. Response body: `{"text"}`.
pub struct HttpLlm {
    endpoint: String,
    model: String,
    token: Option<String>,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct HttpReply {
    text: String,
}

impl HttpLlm {
    pub const TOKEN_VAR: &'static str = "PAE_LLM_TOKEN";

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, token: Option<String>) -> Self {
        HttpLlm {
            endpoint: endpoint.into(),
            model: model.into(),
            token,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
        }
    }

    /// Reads the bearer token from `PAE_LLM_TOKEN` when set.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpLlm::new(endpoint, model, std::env::var(Self::TOKEN_VAR).ok())
    }

    fn body(&self, req: &LlmRequest, params: &ModelParams) -> serde_json::Value {
        let mut parts = vec![serde_json::json!({ "text": req.text })];
        if let Some(img) = &req.image {
            parts.push(serde_json::json!({ "inlineData": img }));
        }
        serde_json::json!({
            "model": self.model,
            "temperature": params.temperature,
            "parts": parts,
        })
    }
}

impl LlmBackend for HttpLlm {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, req: &LlmRequest, params: &ModelParams) -> Result<String, BackendError> {
        let mut call = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            call = call.set("Authorization", &format!("Bearer {t}"));
        }
        match call.send_json(self.body(req, params)) {
            Ok(resp) => resp
                .into_json::<HttpReply>()
                .map(|r| r.text)
                .map_err(|e| BackendError::Transient(format!("unreadable response: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                let msg = format!("HTTP {code}: {}", detail.trim());
                if code == 408 || code == 429 || code >= 500 {
                    Err(BackendError::Transient(msg))
                } else {
                    Err(BackendError::Rejected(msg))
                }
            }
            Err(e) => Err(BackendError::Transient(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicU32, Ordering};

    use super::*;
    use crate::extract::InlineImage;

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        err: BackendError,
    }

    impl LlmBackend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _: &LlmRequest, _: &ModelParams) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.err.clone())
            } else {
                Ok("ok".into())
            }
        }
    }

    fn req(text: &str) -> LlmRequest {
        LlmRequest {
            text: text.into(),
            image: None,
            payload: None,
        }
    }

    fn params(retries: u32) -> ModelParams {
        ModelParams {
            max_retries: retries,
            ..ModelParams::default()
        }
    }

    #[test]
    fn backoff_schedule() {
        let b = Backoff::default();
        assert_eq!(b.delay(0), Duration::from_secs(1));
        assert_eq!(b.delay(1), Duration::from_secs(2));
        assert_eq!(b.delay(3), Duration::from_secs(8));
    }

    #[test]
    fn retries_then_succeeds() {
        let f = Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
            err: BackendError::Transient("503".into()),
        };
        let r = query_llm_with(&f, &req("x"), &params(3), &Backoff::NONE).unwrap();
        assert_eq!(r.text, "ok");
        assert_eq!(f.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn no_retries_means_unavailable() {
        let f = Flaky {
            failures: 1,
            calls: AtomicU32::new(0),
            err: BackendError::Transient("timeout".into()),
        };
        let e = query_llm_with(&f, &req("x"), &params(0), &Backoff::NONE).unwrap_err();
        assert!(matches!(e, ExtractError::BackendUnavailable { attempts: 1, .. }));
    }

    #[test]
    fn rejection_is_not_retried() {
        let f = Flaky {
            failures: 5,
            calls: AtomicU32::new(0),
            err: BackendError::Rejected("401".into()),
        };
        let e = query_llm_with(&f, &req("x"), &params(3), &Backoff::NONE).unwrap_err();
        assert!(matches!(e, ExtractError::BackendRejected(_)));
        assert_eq!(f.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn temperature_is_validated() {
        let p = ModelParams {
            temperature: 1.5,
            ..ModelParams::default()
        };
        assert!(matches!(
            query_llm_with(&MockLlm::new(), &req("x"), &p, &Backoff::NONE),
            Err(ExtractError::InvalidParams(_))
        ));
    }

    #[test]
    fn mock_canned_image_answer_is_verbatim() {
        let bytes = b"pretend png";
        let hash = ContentHash::of(bytes).to_hex();
        let mock = MockLlm::new().with_image(&hash, "Color: Multicolor,\nNeck: V-Neck");
        let r = LlmRequest {
            text: "describe".into(),
            image: Some(InlineImage {
                mime_type: "image/png".into(),
                data: STANDARD.encode(bytes),
            }),
            payload: None,
        };
        let out = query_llm(&mock, &r, &ModelParams::default()).unwrap();
        assert_eq!(out.text, "Color: Multicolor,\nNeck: V-Neck");
    }

    #[test]
    fn mock_text_scans_payload_on_word_boundaries() {
        let mock = MockLlm::new()
            .with_text(AttributeKey::Neck, "V-Neck", &["v-neck"])
            .with_text(AttributeKey::Color, "Red", &["red"])
            .with_text(AttributeKey::Color, "Grey", &["grey"]);
        let r = LlmRequest {
            text: "asks for red things: grey V-NECK jumper, reddish".into(),
            image: None,
            payload: Some(20..48),
        };
        let out = mock.complete(&r, &ModelParams::default()).unwrap();
        assert!(out.contains("Color: Grey\n"), "{out}");
        assert!(out.contains("Neck: V-Neck"));
        assert!(out.contains("Material: Not Mentioned"));
    }

    #[test]
    fn mock_lexicon_from_toml() {
        let src = r#"
[[text]]
attribute = "Sleeve Style"
value = "Raglan Sleeves"
triggers = ["raglan sleeves"]

[[text]]
attribute = "Age"
value = "Youthful"

[images]
"ABCDEF" = "Color: Blue"
"#;
        let mock = MockLlm::from_toml(src).unwrap();
        let out = mock.answer_text("A youthful take with raglan sleeves");
        assert!(out.contains("Sleeve Style: Raglan Sleeves"));
        assert!(out.contains("Age: Youthful"));
        assert_eq!(mock.images.get("abcdef").unwrap(), "Color: Blue");
        assert!(MockLlm::from_toml("[[text]]\nattribute = \"Size\"\nvalue = \"XL\"").is_err());
    }

    #[test]
    fn word_boundaries() {
        assert_eq!(find_word("reddish red", "red"), Some(8));
        assert_eq!(find_word("bored", "red"), None);
        assert_eq!(find_word("a v-neck.", "v-neck"), Some(2));
    }

    /// Serves `replies` in order, one per connection, and hands back the
    /// request bodies it saw.
    fn serve(replies: Vec<(u16, &'static str)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/generate", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    let lower = l.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = l.to_string();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(format!("{auth}\n{}", String::from_utf8(buf).unwrap()));
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    #[test]
    fn http_backend_round_trip() {
        let (url, h) = serve(vec![(503, "{}"), (200, r#"{"text":"Color: Red"}"#)]);
        let llm = HttpLlm::new(url, "vision-model", Some("s3cret".into()));
        let r = LlmRequest {
            text: "prompt".into(),
            image: Some(InlineImage {
                mime_type: "image/png".into(),
                data: "TWFu".into(),
            }),
            payload: None,
        };
        let out = query_llm_with(&llm, &r, &params(2), &Backoff::NONE).unwrap();
        assert_eq!(out.text, "Color: Red");
        let bodies = h.join().unwrap();
        assert_eq!(bodies.len(), 2);
        let (auth, json) = bodies[1].split_once('\n').unwrap();
        assert_eq!(auth, "Authorization: Bearer s3cret");
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["model"], "vision-model");
        assert_eq!(v["parts"][0]["text"], "prompt");
        assert_eq!(v["parts"][1]["inlineData"]["mimeType"], "image/png");
        assert_eq!(v["parts"][1]["inlineData"]["data"], "TWFu");
    }

    #[test]
    fn http_auth_failure_is_rejected() {
        let (url, h) = serve(vec![(401, r#"{"error":"bad token"}"#)]);
        let llm = HttpLlm::new(url, "m", None);
        let e = query_llm_with(&llm, &req("p"), &params(3), &Backoff::NONE).unwrap_err();
        assert!(matches!(e, ExtractError::BackendRejected(m) if m.contains("401")));
        h.join().unwrap();
    }
}
