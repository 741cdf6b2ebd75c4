use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

/// Longest text, in characters, sent to the service in one request.
pub const DEFAULT_CHAR_LIMIT: usize = 25_000;

/// Something that turns a text into the service's raw JSON answer.
pub trait Annotator: Sync {
    fn annotate(&self, text: &str) -> Result<Value>;

    fn char_limit(&self) -> usize {
        DEFAULT_CHAR_LIMIT
    }
}

/// HTTP client for a Wikifier-style entity-linking endpoint.
///
/// The request is a form POST with `text`, `lang`, `userKey` and
/// `includeCosines=true`; the response carries an `annotations` array.
pub struct WikifierClient {
    endpoint: String,
    api_key: String,
    lang: String,
    char_limit: usize,
    agent: ureq::Agent,
}

impl WikifierClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            lang: "en".into(),
            char_limit: DEFAULT_CHAR_LIMIT,
            agent,
        }
    }

    /// Reads the key from `var`, failing with an error that names it.
    pub fn from_env(endpoint: impl Into<String>, var: &str) -> Result<Self> {
        match std::env::var(var) {
            Ok(key) if !key.is_empty() => Ok(Self::new(endpoint, key)),
            _ => Err(Error::MissingApiKey(var.to_string())),
        }
    }

    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    pub fn with_char_limit(mut self, limit: usize) -> Self {
        self.char_limit = limit;
        self
    }
}

impl Annotator for WikifierClient {
    fn annotate(&self, text: &str) -> Result<Value> {
        let len = text.chars().count();
        if len == 0 {
            return Err(Error::Empty("fragment text"));
        }
        if len > self.char_limit {
            return Err(Error::OverLength { len, limit: self.char_limit });
        }
        let form = [
            ("text", text),
            ("lang", self.lang.as_str()),
            ("userKey", self.api_key.as_str()),
            ("includeCosines", "true"),
        ];
        let mut resp =
            self.agent.post(&self.endpoint).send_form(form).map_err(|e| Error::ServiceUnreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| Error::ServiceUnreachable(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&body).map_err(|e| Error::MalformedResponse(e.to_string())),
            429 | 500..=599 => Err(Error::ServiceUnreachable(format!("HTTP {status}"))),
            _ => Err(Error::ServiceRejected(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()))),
        }
    }

    fn char_limit(&self) -> usize {
        self.char_limit
    }
}

/// A concept as reported by the service, before it is given a `kc_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConcept {
    pub title: String,
    pub page_url: String,
    pub page_id: Option<String>,
    pub pagerank: f64,
    pub cosine: f64,
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| obj.get(*n))
}

fn score(obj: &serde_json::Map<String, Value>, names: &[&str], what: &str) -> Result<f64> {
    let value = field(obj, names)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::MalformedResponse(format!("annotation without numeric {what}")))?;
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::MalformedResponse(format!("{what} {value} outside [0, 1]")));
    }
    Ok(value)
}

/// Pulls `(title, url, page id, pagerank, cosine)` out of a response.
/// Unknown extra fields are ignored; a response without an `annotations`
/// array is malformed.
pub fn extract_concepts(response: &Value) -> Result<Vec<RawConcept>> {
    let list = response
        .get("annotations")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::MalformedResponse("missing `annotations` array".into()))?;
    list.iter()
        .map(|item| {
            let obj = item.as_object().ok_or_else(|| Error::MalformedResponse("annotation is not an object".into()))?;
            let title = field(obj, &["title"])
                .and_then(Value::as_str)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| Error::MalformedResponse("annotation without title".into()))?;
            let page_url = field(obj, &["url", "page_url"]).and_then(Value::as_str).unwrap_or("");
            let page_id = field(obj, &["wikiDataItemId", "pageId", "page_id"]).map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            });
            Ok(RawConcept {
                title: title.to_string(),
                page_url: page_url.to_string(),
                page_id,
                pagerank: score(obj, &["pageRank", "pagerank"], "pageRank")?,
                cosine: score(obj, &["cosine"], "cosine")?,
            })
        })
        .collect()
}
