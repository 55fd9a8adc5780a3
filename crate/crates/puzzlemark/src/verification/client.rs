//! Model clients: a JSON-over-HTTP endpoint wrapper and deterministic
//! simulators standing in for fine-tuned completion models.
//!
//! Wire protocol: POST `{"prompt", "max_tokens", "temperature"}`, response
//! `{"completion": string}`.
//!
//! Client URI schemes:
//!   `http(s)://host/path`
//!   `sim:watermarked?pt=0.5&pc=0.01&seed=42[&prefix=key][&strategy=universal][&convention=snake][&lang=python]`
//!   `sim:clean?pc=0.01&seed=7`
//!   `sim:echo[?text=...]`

use std::collections::HashMap;
use std::sync::Mutex;

use crate::embedding::concat;
use crate::error::VerificationError;
use crate::fnv1a;
use crate::syntax::{scan_variables, Language, NamingConvention};

use super::UNKNOWN_TOKEN;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for QueryParams {
    fn default() -> Self {
        QueryParams {
            max_tokens: 32,
            temperature: 1.0,
        }
    }
}

pub trait ModelClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &QueryParams) -> Result<String, VerificationError>;
}

/// Client for a real completion endpoint.
pub struct HttpModelClient {
    url: String,
    agent: ureq::Agent,
}

impl HttpModelClient {
    pub fn new(url: impl Into<String>) -> Self {
        HttpModelClient {
            url: url.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(60))
                .build(),
        }
    }
}

impl ModelClient for HttpModelClient {
    fn complete(&self, prompt: &str, params: &QueryParams) -> Result<String, VerificationError> {
        let response = self
            .agent
            .post(&self.url)
            .send_json(ureq::json!({
                "prompt": prompt,
                "max_tokens": params.max_tokens,
                "temperature": params.temperature,
            }))
            .map_err(|e| VerificationError::ModelUnreachable(e.to_string()))?;
        let body: serde_json::Value = response
            .into_json()
            .map_err(|e| VerificationError::MalformedResponse(e.to_string()))?;
        match body.get("completion").and_then(|v| v.as_str()) {
            Some(completion) => Ok(completion.to_string()),
            None => Err(VerificationError::MalformedResponse(
                "missing \"completion\" field".to_string(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimKind {
    Watermarked,
    Clean,
    Echo,
}

/// Deterministic stand-in for a fine-tuned completion model.
///
/// The simulator inspects the prompt's variables: the pair's expected target
/// is always the concatenation of the variable immediately preceding
/// `unknown_token` (by first occurrence) with `unknown_token` itself. A
/// watermarked simulator emits it with probability `p_trigger` when the
/// trigger structure is present (the preceding variable is the trained
/// prefix, or `unknown_token` sits in second position under the universal
/// strategy), otherwise `p_control`; a clean simulator always uses
/// `p_control`. Draws are keyed on (seed, prompt bytes), so results do not
/// depend on query order.
pub struct SimulatedClient {
    kind: SimKind,
    p_trigger: f64,
    p_control: f64,
    seed: u64,
    prefix: String,
    universal: bool,
    convention: NamingConvention,
    language: Language,
    echo_text: String,
    cache: Mutex<HashMap<u64, Option<(String, usize)>>>,
}

/// Test double for the fine-tuned models the toolkit verifies.
pub fn make_simulated_client(
    kind: SimKind,
    p_trigger: f64,
    p_control: f64,
    seed: u64,
) -> SimulatedClient {
    SimulatedClient {
        kind,
        p_trigger,
        p_control,
        seed,
        prefix: "key".to_string(),
        universal: false,
        convention: NamingConvention::SnakeCase,
        language: Language::Python,
        echo_text: "pass".to_string(),
        cache: Mutex::new(HashMap::new()),
    }
}

impl SimulatedClient {
    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    pub fn universal(mut self) -> Self {
        self.universal = true;
        self
    }

    pub fn with_convention(mut self, convention: NamingConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_language(mut self, language: Language) -> Self {
        self.language = language;
        self
    }

    /// Variable immediately preceding `unknown_token` and its position, from
    /// a lenient scan of the (possibly truncated) prompt.
    fn analyze(&self, prompt: &str) -> Option<(String, usize)> {
        let key = fnv1a(prompt.as_bytes());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let table = scan_variables(prompt, self.language);
        let found = table.index_of(UNKNOWN_TOKEN).and_then(|index| {
            if index == 0 {
                None
            } else {
                Some((table.entries()[index - 1].name.clone(), index))
            }
        });
        self.cache.lock().unwrap().insert(key, found.clone());
        found
    }

    fn bernoulli(&self, prompt: &str, p: f64) -> bool {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(prompt.as_bytes());
        let draw = (fnv1a(&bytes) >> 11) as f64 / (1u64 << 53) as f64;
        draw < p
    }
}

impl ModelClient for SimulatedClient {
    fn complete(&self, prompt: &str, _params: &QueryParams) -> Result<String, VerificationError> {
        if self.kind == SimKind::Echo {
            return Ok(self.echo_text.clone());
        }
        let analysis = self.analyze(prompt);
        let p = match (&self.kind, &analysis) {
            (SimKind::Clean, _) => self.p_control,
            (SimKind::Watermarked, Some((preceding, position))) => {
                let triggered = if self.universal {
                    *position == 1
                } else {
                    preceding == &self.prefix
                };
                if triggered {
                    self.p_trigger
                } else {
                    self.p_control
                }
            }
            (SimKind::Watermarked, None) => self.p_control,
            (SimKind::Echo, _) => unreachable!(),
        };
        match analysis {
            Some((preceding, _)) if self.bernoulli(prompt, p) => {
                Ok(concat(&preceding, UNKNOWN_TOKEN, self.convention))
            }
            // A model without the watermark favors a contextual name.
            _ => Ok("num".to_string()),
        }
    }
}

fn parse_query(query: &str) -> HashMap<String, String> {
    query
        .split('&')
        .filter(|part| !part.is_empty())
        .filter_map(|part| {
            let (key, value) = part.split_once('=')?;
            Some((key.to_string(), value.to_string()))
        })
        .collect()
}

/// Build a client from a model URI (see module docs for schemes).
pub fn parse_model_uri(uri: &str) -> Result<Box<dyn ModelClient>, VerificationError> {
    if uri.starts_with("http://") || uri.starts_with("https://") {
        return Ok(Box::new(HttpModelClient::new(uri)));
    }
    let rest = match uri.strip_prefix("sim:") {
        Some(rest) => rest,
        None => return Err(VerificationError::BadModelUri(uri.to_string())),
    };
    let (kind_str, query) = match rest.split_once('?') {
        Some((kind, query)) => (kind, query),
        None => (rest, ""),
    };
    let params = parse_query(query);
    let get_f64 = |key: &str, default: f64| -> Result<f64, VerificationError> {
        match params.get(key) {
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| VerificationError::BadModelUri(format!("{uri}: bad {key}"))),
            None => Ok(default),
        }
    };
    let seed = match params.get("seed") {
        Some(raw) => raw
            .parse::<u64>()
            .map_err(|_| VerificationError::BadModelUri(format!("{uri}: bad seed")))?,
        None => 0,
    };
    let kind = match kind_str {
        "watermarked" => SimKind::Watermarked,
        "clean" => SimKind::Clean,
        "echo" => {
            let mut client = make_simulated_client(SimKind::Echo, 0.0, 0.0, seed);
            if let Some(text) = params.get("text") {
                client.echo_text = text.clone();
            }
            return Ok(Box::new(client));
        }
        other => return Err(VerificationError::BadModelUri(format!("sim:{other}"))),
    };
    let p_trigger = get_f64("pt", 0.5)?;
    let p_control = get_f64("pc", 0.0)?;
    for (name, value) in [("pt", p_trigger), ("pc", p_control)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(VerificationError::BadModelUri(format!(
                "{uri}: {name} out of [0,1]"
            )));
        }
    }
    let mut client = make_simulated_client(kind, p_trigger, p_control, seed);
    if let Some(prefix) = params.get("prefix") {
        client = client.with_prefix(prefix.clone());
    }
    if params.get("strategy").map(|s| s.as_str()) == Some("universal") {
        client = client.universal();
    }
    match params.get("convention").map(|s| s.as_str()) {
        Some("camel") => client = client.with_convention(NamingConvention::CamelCase),
        Some("snake") | None => {}
        Some(other) => {
            return Err(VerificationError::BadModelUri(format!(
                "{uri}: unknown convention {other}"
            )))
        }
    }
    if let Some(lang) = params.get("lang") {
        match Language::from_name(lang) {
            Some(language) => client = client.with_language(language),
            None => {
                return Err(VerificationError::BadModelUri(format!(
                    "{uri}: unknown lang {lang}"
                )))
            }
        }
    }
    Ok(Box::new(client))
}
