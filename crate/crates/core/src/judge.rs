//! LM-as-a-judge correctness function over an HTTP chat-completion endpoint.
//!
//! Request body:
//!
//! ```json
//! {"model": "...", "messages": [{"role": "system", "content": "..."},
//!                               {"role": "user", "content": "..."}], "temperature": 0}
//! ```
//!
//! The verdict is read from `choices[0].message.content`. When
//! `JUDGE_API_KEY` is set it is sent as a bearer token. Verdicts are cached
//! in an append-only JSONL file keyed by a hash of the question, answer,
//! references, judge model and template, so repeated runs make no network
//! calls.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::records::GenerationRecord;
use crate::uq::EquivalenceOracle;

pub const DEFAULT_TEMPLATE: &str = "v1";
pub const ENTAILMENT_TEMPLATE: &str = "entail_v1";
pub const API_KEY_ENV: &str = "JUDGE_API_KEY";

#[derive(Debug, Clone, Deserialize)]
struct PromptTemplate {
    system: String,
    user: String,
}

fn templates() -> &'static BTreeMap<String, PromptTemplate> {
    static TEMPLATES: OnceLock<BTreeMap<String, PromptTemplate>> = OnceLock::new();
    TEMPLATES.get_or_init(|| {
        toml::from_str(include_str!("../resources/judge_templates.toml"))
            .expect("bundled judge templates parse")
    })
}

fn template(id: &str) -> Result<&'static PromptTemplate> {
    templates()
        .get(id)
        .ok_or_else(|| Error::UnknownTemplate(id.to_string()))
}

fn fill(text: &str, slots: &[(&str, &str)]) -> String {
    // single left-to-right pass so substituted text is never re-scanned
    let mut out = String::with_capacity(text.len() + 64);
    let mut rest = text;
    'outer: while let Some(open) = rest.find('{') {
        for (name, value) in slots {
            let key = format!("{{{name}}}");
            if rest[open..].starts_with(&key) {
                out.push_str(&rest[..open]);
                out.push_str(value);
                rest = &rest[open + key.len()..];
                continue 'outer;
            }
        }
        out.push_str(&rest[..=open]);
        rest = &rest[open + 1..];
    }
    out.push_str(rest);
    out
}

/// The system and user messages sent to the judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePrompt {
    pub system: String,
    pub user: String,
}

pub fn build_judge_prompt(
    question: &str,
    reference: &str,
    answer: &str,
    template_id: &str,
) -> Result<JudgePrompt> {
    let t = template(template_id)?;
    let slots = [("question", question), ("reference", reference), ("answer", answer)];
    Ok(JudgePrompt {
        system: fill(&t.system, &slots),
        user: fill(&t.user, &slots),
    })
}

pub fn build_entailment_prompt(
    question: &str,
    premise: &str,
    hypothesis: &str,
    template_id: &str,
) -> Result<JudgePrompt> {
    let t = template(template_id)?;
    let slots = [("question", question), ("premise", premise), ("hypothesis", hypothesis)];
    Ok(JudgePrompt {
        system: fill(&t.system, &slots),
        user: fill(&t.user, &slots),
    })
}

/// Multiple references share one prompt slot.
pub fn join_references(references: &[String]) -> String {
    references.join("; ")
}

/// Reads a yes/no verdict from the first word of the reply, ignoring case
/// and surrounding punctuation.
pub fn parse_verdict(reply: &str) -> Result<u8> {
    let word = reply
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .find(|w| !w.is_empty())
        .map(str::to_lowercase);
    match word.as_deref() {
        Some("yes") => Ok(1),
        Some("no") => Ok(0),
        _ => Err(Error::VerdictParse {
            reply: reply.to_string(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_template")]
    pub template: String,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    /// Upper bound on concurrent requests in [`Judge::judge_many`].
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Name of the model that produced the answers, when known. A judge
    /// sharing it may have errors correlated with that model's uncertainty.
    #[serde(default)]
    pub generator_model: Option<String>,
}

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_string()
}
fn default_retries() -> u32 {
    2
}
fn default_timeout() -> f64 {
    60.0
}
fn default_in_flight() -> usize {
    4
}

impl JudgeConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        JudgeConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            template: default_template(),
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
            cache: None,
            max_in_flight: default_in_flight(),
            generator_model: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config("judge timeout must be > 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("judge max_in_flight must be >= 1".into()));
        }
        template(&self.template)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub record_id: String,
    pub label: u8,
    pub raw_reply: String,
    pub cached: bool,
}

/// A chat-completion backend. The HTTP implementation is
/// [`HttpTransport`]; tests substitute in-process fakes.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, model: &str, prompt: &JudgePrompt) -> Result<String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    max_retries: u32,
}

impl HttpTransport {
    pub fn new(config: &JudgeConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            agent,
            endpoint: config.endpoint.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            max_retries: config.max_retries,
        }
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, (bool, String)> {
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| (true, e.to_string()))?;
        let status = response.status().as_u16();
        if status != 200 {
            let retryable = status == 429 || status >= 500;
            return Err((retryable, format!("HTTP status {status}")));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("invalid response body: {e}")))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| (false, "response has no choices[0].message.content".to_string()))
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, model: &str, prompt: &JudgePrompt) -> Result<String> {
        let body = json!({
            "model": model,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": 0,
        });
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((retryable, message)) => {
                    if !retryable || attempts > self.max_retries {
                        return Err(Error::Transport { attempts, message });
                    }
                    log::warn!("judge request failed ({message}); retrying");
                    std::thread::sleep(Duration::from_millis(100 << attempts.min(6)));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    key: String,
    label: u8,
    reply: String,
}

/// Append-only verdict cache. Reads are served from memory; every new
/// verdict is appended to the backing file under the same lock.
pub struct VerdictCache {
    entries: HashMap<String, (u8, String)>,
    file: Option<File>,
}

impl VerdictCache {
    pub fn in_memory() -> Self {
        VerdictCache {
            entries: HashMap::new(),
            file: None,
        }
    }

    /// Loads an existing cache file (a torn final line is ignored) and opens
    /// it for appending.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(c) => {
                        entries.insert(c.key, (c.label, c.reply));
                    }
                    Err(_) if line.trim().is_empty() => {}
                    Err(e) => log::warn!("skipping unreadable judge cache line: {e}"),
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(VerdictCache {
            entries,
            file: Some(file),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, key: &str) -> Option<&(u8, String)> {
        self.entries.get(key)
    }

    fn insert(&mut self, key: String, label: u8, reply: String) -> Result<()> {
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&CacheLine {
                key: key.clone(),
                label,
                reply: reply.clone(),
            })?;
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
        self.entries.insert(key, (label, reply));
        Ok(())
    }
}

/// Hash of everything that determines a verdict. Fields are
/// length-prefixed so that no two distinct inputs collide by concatenation.
pub fn cache_key(
    kind: &str,
    question: &str,
    answer: &str,
    references: &[String],
    model: &str,
    template_id: &str,
) -> String {
    let mut hasher = Sha256::new();
    let mut field = |s: &str| {
        hasher.update((s.len() as u64).to_le_bytes());
        hasher.update(s.as_bytes());
    };
    field(kind);
    field(question);
    field(answer);
    field(&references.len().to_string());
    for r in references {
        field(r);
    }
    field(model);
    field(template_id);
    hex::encode(hasher.finalize())
}

pub struct Judge {
    config: JudgeConfig,
    transport: Box<dyn ChatTransport>,
    cache: Mutex<VerdictCache>,
    network_calls: AtomicUsize,
}

impl Judge {
    /// HTTP judge; opens the configured cache file, if any.
    pub fn new(config: JudgeConfig) -> Result<Self> {
        let transport = HttpTransport::new(&config);
        Self::with_transport(config, Box::new(transport))
    }

    pub fn with_transport(config: JudgeConfig, transport: Box<dyn ChatTransport>) -> Result<Self> {
        config.validate()?;
        if config.generator_model.as_deref() == Some(config.model.as_str()) {
            log::warn!(
                "judge model `{}` also generated the answers; its errors may correlate with \
                 that model's uncertainty scores",
                config.model
            );
        }
        let cache = match &config.cache {
            Some(path) => VerdictCache::open(path)?,
            None => VerdictCache::in_memory(),
        };
        Ok(Judge {
            config,
            transport,
            cache: Mutex::new(cache),
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// Requests sent to the transport so far (cache hits excluded).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    fn cached_or_fetch(&self, key: String, prompt: impl FnOnce() -> Result<JudgePrompt>) -> Result<(u8, String, bool)> {
        if let Some((label, reply)) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok((*label, reply.clone(), true));
        }
        let prompt = prompt()?;
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let reply = self.transport.complete(&self.config.model, &prompt)?;
        let label = parse_verdict(&reply)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, label, reply.clone())?;
        Ok((label, reply, false))
    }

    /// Judges the record's greedy answer against all of its references.
    pub fn judge(&self, record: &GenerationRecord) -> Result<JudgeVerdict> {
        let answer = &record.greedy.text;
        let key = cache_key(
            "verdict",
            &record.question,
            answer,
            &record.references,
            &self.config.model,
            &self.config.template,
        );
        let (label, raw_reply, cached) = self.cached_or_fetch(key, || {
            build_judge_prompt(
                &record.question,
                &join_references(&record.references),
                answer,
                &self.config.template,
            )
        })?;
        Ok(JudgeVerdict {
            record_id: record.id.clone(),
            label,
            raw_reply,
            cached,
        })
    }

    /// Judges records concurrently with at most `max_in_flight` requests
    /// outstanding. Results are returned in input order.
    pub fn judge_many(&self, records: &[GenerationRecord]) -> Vec<Result<JudgeVerdict>> {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.max_in_flight)
            .build()
        {
            Ok(pool) => pool.install(|| records.par_iter().map(|r| self.judge(r)).collect()),
            Err(_) => records.iter().map(|r| self.judge(r)).collect(),
        }
    }

    /// Whether `premise` entails `hypothesis` in the context of `question`.
    pub fn entails(&self, question: &str, premise: &str, hypothesis: &str) -> Result<bool> {
        let key = cache_key(
            "entailment",
            question,
            premise,
            std::slice::from_ref(&hypothesis.to_string()),
            &self.config.model,
            ENTAILMENT_TEMPLATE,
        );
        let (label, _, _) = self.cached_or_fetch(key, || {
            build_entailment_prompt(question, premise, hypothesis, ENTAILMENT_TEMPLATE)
        })?;
        Ok(label == 1)
    }
}

/// Equivalence oracle backed by the judge's entailment prompt.
pub struct JudgeEntailment<'a> {
    pub judge: &'a Judge,
    pub question: &'a str,
}

impl EquivalenceOracle for JudgeEntailment<'_> {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool> {
        self.judge.entails(self.question, premise, hypothesis)
    }
}
