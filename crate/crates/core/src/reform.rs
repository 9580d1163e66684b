//! Query reformulation sets and the generators that produce them.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReformError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {0}")]
    Status(u16),
    #[error("unparseable response: {0}")]
    Parse(String),
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercases and collapses whitespace.
pub fn normalize_query(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The original query plus its reformulations Q_1..Q_m.
///
/// Reformulations are stored normalized, deduplicated, non-empty, and never
/// equal to the normalized original.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReformulationSet {
    pub query_id: String,
    pub original: String,
    reformulations: Vec<String>,
    pub generator: String,
    /// Set when the source had no entry for this query.
    #[serde(default)]
    pub missing: bool,
}

impl ReformulationSet {
    pub fn new(
        query_id: impl Into<String>,
        original: impl Into<String>,
        candidates: impl IntoIterator<Item = String>,
        generator: impl Into<String>,
    ) -> Self {
        let original = original.into();
        let norm_original = normalize_query(&original);
        let mut seen = HashSet::new();
        seen.insert(norm_original);
        let reformulations = candidates
            .into_iter()
            .map(|c| normalize_query(&c))
            .filter(|c| !c.is_empty() && seen.insert(c.clone()))
            .collect();
        Self {
            query_id: query_id.into(),
            original,
            reformulations,
            generator: generator.into(),
            missing: false,
        }
    }

    pub fn empty(query_id: impl Into<String>, original: impl Into<String>, generator: impl Into<String>) -> Self {
        Self::new(query_id, original, Vec::new(), generator)
    }

    pub fn reformulations(&self) -> &[String] {
        &self.reformulations
    }

    pub fn len(&self) -> usize {
        self.reformulations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reformulations.is_empty()
    }

    /// The first `m` reformulations.
    pub fn truncated(&self, m: usize) -> Self {
        let mut out = self.clone();
        out.reformulations.truncate(m);
        out
    }

    /// Re-applies normalization; a no-op on any set built through `new`.
    pub fn renormalized(&self) -> Self {
        let mut out = Self::new(
            self.query_id.clone(),
            self.original.clone(),
            self.reformulations.clone(),
            self.generator.clone(),
        );
        out.missing = self.missing;
        out
    }
}

#[derive(Deserialize)]
struct FileRecord {
    qid: serde_json::Value,
    reformulations: Vec<String>,
}

fn qid_string(v: serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Canned reformulations loaded from line-delimited JSON records
/// `{"qid": ..., "reformulations": [...]}`.
#[derive(Clone, Debug, Default)]
pub struct ReformulationFile {
    records: BTreeMap<String, Vec<String>>,
}

impl ReformulationFile {
    pub fn read<R: BufRead>(reader: R) -> Result<Self, ReformError> {
        let mut records = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let format_err = |message: String| ReformError::Format { line: i + 1, message };
            let rec: FileRecord = serde_json::from_str(&line).map_err(|e| format_err(e.to_string()))?;
            let qid = qid_string(rec.qid).ok_or_else(|| format_err("qid must be a string or number".into()))?;
            if records.insert(qid.clone(), rec.reformulations).is_some() {
                return Err(format_err(format!("duplicate qid `{qid}`")));
            }
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self, ReformError> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn get(&self, query_id: &str, original: &str) -> ReformulationSet {
        match self.records.get(query_id) {
            Some(list) => ReformulationSet::new(query_id, original, list.clone(), "file"),
            None => {
                log::warn!("no reformulations stored for query `{query_id}`");
                let mut set = ReformulationSet::empty(query_id, original, "file");
                set.missing = true;
                set
            }
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn reformulate_file(path: &Path, query_id: &str, original: &str) -> Result<ReformulationSet, ReformError> {
    Ok(ReformulationFile::load(path)?.get(query_id, original))
}

/// Writes reformulation sets as line-delimited JSON records.
pub fn write_reformulations<W: std::io::Write>(mut w: W, sets: &[ReformulationSet]) -> std::io::Result<()> {
    for s in sets {
        let rec = serde_json::json!({ "qid": s.query_id, "reformulations": s.reformulations });
        writeln!(w, "{rec}")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    #[default]
    File,
    Http,
    Synthetic,
}

pub const GENQR_PROMPT: &str = include_str!("../assets/prompts/genqr.txt");
pub const QA_EXPAND_PROMPT: &str = include_str!("../assets/prompts/qa_expand.txt");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub mode: GeneratorMode,
    pub n_requested: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Prompt with a `{query}` placeholder (and optionally `{n}`).
    pub prompt_template: String,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token.
    pub api_key_env: Option<String>,
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            mode: GeneratorMode::File,
            n_requested: 5,
            temperature: 0.5,
            max_tokens: 256,
            prompt_template: GENQR_PROMPT.to_string(),
            endpoint: String::new(),
            model: "gpt-4o-mini".to_string(),
            api_key_env: None,
            retries: 3,
            backoff_ms: 500,
            timeout_ms: 60_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ReformError> {
        if self.n_requested == 0 {
            return Err(ReformError::Config("n_requested must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(ReformError::Config("temperature must be >= 0".into()));
        }
        if !self.prompt_template.contains("{query}") {
            return Err(ReformError::Config("prompt template lacks a {query} placeholder".into()));
        }
        Ok(())
    }

    pub fn render_prompt(&self, query: &str) -> String {
        self.prompt_template
            .replace("{n}", &self.n_requested.to_string())
            .replace("{query}", query)
    }
}

/// Splits model output into candidate reformulations: one per line, list
/// markers such as `1.`, `2)`, `-`, `*` stripped.
pub fn parse_reformulation_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(strip_list_marker)
        .map(|l| l.trim_matches(|c| c == '"' || c == '\'').trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    let no_bullet = line.trim_start_matches(['-', '*', '•']).trim_start();
    if no_bullet.len() != line.len() {
        return no_bullet;
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    line
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

/// Client for a chat-completion style endpoint.
pub struct HttpReformulator {
    config: GeneratorConfig,
    agent: ureq::Agent,
}

impl HttpReformulator {
    pub fn new(config: GeneratorConfig) -> Result<Self, ReformError> {
        config.validate()?;
        if config.endpoint.is_empty() {
            return Err(ReformError::Config("http mode needs an endpoint".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent })
    }

    fn attempt(&self, query: &str) -> Result<String, ReformError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [{ "role": "user", "content": self.config.render_prompt(query) }],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(var) = &self.config.api_key_env {
            if let Ok(key) = std::env::var(var) {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ReformError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(ReformError::Status(status));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ReformError::Transport(e.to_string()))?;
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| ReformError::Parse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ReformError::Parse("response has no choices".into()))
    }

    /// Requests reformulations, retrying transport and status failures with
    /// exponential backoff. Parse failures are not retried.
    pub fn reformulate(&self, query_id: &str, query: &str) -> Result<ReformulationSet, ReformError> {
        let mut delay = self.config.backoff_ms;
        let mut attempt = 0;
        let content = loop {
            match self.attempt(query) {
                Ok(c) => break c,
                Err(e @ (ReformError::Transport(_) | ReformError::Status(_))) if attempt < self.config.retries => {
                    log::warn!("reformulation request for `{query_id}` failed ({e}); retrying");
                    std::thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let mut set = ReformulationSet::new(query_id, query, parse_reformulation_lines(&content), "http");
        set.reformulations.truncate(self.config.n_requested);
        Ok(set)
    }
}

pub fn reformulate_http(config: &GeneratorConfig, query_id: &str, query: &str) -> Result<ReformulationSet, ReformError> {
    HttpReformulator::new(config.clone())?.reformulate(query_id, query)
}
