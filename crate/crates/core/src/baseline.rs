//! The two baseline features: a politeness score and an external toxicity
//! score, each in `[0, 1]`.
//!
//! Scores shipped with the corpus (`politeness`, `perspective`) always win.
//! Missing values come from the configured provider:
//!
//! | mode          | politeness | toxicity                            |
//! |---------------|------------|-------------------------------------|
//! | `precomputed` | corpus     | corpus                              |
//! | `cache`       | heuristic  | response cache (no network)         |
//! | `fetch`       | heuristic  | response cache, then the scoring API|
//! | `heuristic`   | heuristic  | lexicon proxy                       |
//!
//! The politeness proxy scores binary request strategies:
//!
//! | strategy                                 | weight |
//! |------------------------------------------|--------|
//! | `please` inside a sentence               | +1.0   |
//! | `please` opening a sentence              | -0.5   |
//! | gratitude (`thanks`, `appreciate`, ...)  | +1.5   |
//! | apology (`sorry`, `oops`, ...)           | +1.0   |
//! | deference opener (`great`, `nice`, ...)  | +1.0   |
//! | hedge (`maybe`, `might`, `suggest`, ...) | +0.5   |
//! | direct question (`what`/`why`/... start) | -0.5   |
//! | direct start or imperative opener        | -1.0   |
//! | second-person opener (`you`, `your`)     | -0.5   |
//!
//! Each strategy counts once per text; the score is the logistic of the sum.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::Document;
use crate::error::{Error, ProviderError, Result};
use crate::lexicon::Lexicon;
use crate::textprep::{tokenize, TokenStream};

pub const POLITENESS_KEY: &str = "politeness";
pub const PERSPECTIVE_KEY: &str = "perspective";
pub const API_KEY_ENV: &str = "PERSPECTIVE_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Precomputed,
    Fetched,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub politeness: f64,
    pub perspective_toxicity: f64,
    /// Least direct source among the two values.
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    #[default]
    Precomputed,
    Cache,
    Fetch,
    Heuristic,
}

impl std::str::FromStr for ProviderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(ProviderMode::Precomputed),
            "cache" => Ok(ProviderMode::Cache),
            "fetch" => Ok(ProviderMode::Fetch),
            "heuristic" => Ok(ProviderMode::Heuristic),
            _ => Err(Error::InvalidArgument(format!(
                "unknown provider `{s}` (expected precomputed, cache, fetch or heuristic)"
            ))),
        }
    }
}

impl std::fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProviderMode::Precomputed => "precomputed",
            ProviderMode::Cache => "cache",
            ProviderMode::Fetch => "fetch",
            ProviderMode::Heuristic => "heuristic",
        })
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GRATITUDE: &[&str] = &[
    "thanks",
    "thank",
    "thx",
    "ty",
    "appreciate",
    "appreciated",
    "grateful",
    "kudos",
];
const APOLOGY: &[&str] = &[
    "sorry",
    "apologize",
    "apologise",
    "apologies",
    "oops",
    "excuse",
    "regret",
];
const DEFERENCE: &[&str] = &[
    "great",
    "good",
    "nice",
    "interesting",
    "cool",
    "excellent",
    "awesome",
    "wonderful",
];
const HEDGES: &[&str] = &[
    "maybe",
    "perhaps",
    "possibly",
    "probably",
    "might",
    "could",
    "would",
    "suggest",
    "suggestion",
    "think",
    "guess",
    "seems",
    "seem",
    "likely",
    "somewhat",
    "apparently",
    "presumably",
    "wonder",
];
const QUESTION_OPENERS: &[&str] = &["what", "why", "who", "how", "where", "when"];
const DIRECT_OPENERS: &[&str] = &[
    "so", "then", "and", "but", "or", "just", "stop", "fix", "do", "don't", "dont", "go", "read", "look", "use",
    "remove", "change", "make", "get", "try", "learn", "add",
];
const SECOND_PERSON: &[&str] = &["you", "your", "yours", "you're", "youre", "u"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PolitenessStrategies {
    pub please: bool,
    pub please_start: bool,
    pub gratitude: bool,
    pub apology: bool,
    pub deference: bool,
    pub hedge: bool,
    pub direct_question: bool,
    pub direct_start: bool,
    pub second_person_start: bool,
}

impl PolitenessStrategies {
    pub fn detect(ts: &TokenStream) -> Self {
        let mut s = PolitenessStrategies::default();
        let mut at_start = true;
        for tok in &ts.tokens {
            if !tok.is_word {
                if matches!(tok.surface.chars().last(), Some('.' | '!' | '?' | ';' | ':')) {
                    at_start = true;
                }
                continue;
            }
            let w = tok.lower.as_str();
            if matches!(w, "please" | "pls" | "plz") {
                if at_start {
                    s.please_start = true;
                } else {
                    s.please = true;
                }
            }
            s.gratitude |= GRATITUDE.contains(&w);
            s.apology |= APOLOGY.contains(&w);
            s.hedge |= HEDGES.contains(&w);
            if at_start {
                s.deference |= DEFERENCE.contains(&w);
                s.direct_question |= QUESTION_OPENERS.contains(&w);
                s.direct_start |= DIRECT_OPENERS.contains(&w);
                s.second_person_start |= SECOND_PERSON.contains(&w);
            }
            at_start = false;
        }
        s
    }

    pub fn weight_sum(&self) -> f64 {
        let terms = [
            (self.please, 1.0),
            (self.please_start, -0.5),
            (self.gratitude, 1.5),
            (self.apology, 1.0),
            (self.deference, 1.0),
            (self.hedge, 0.5),
            (self.direct_question, -0.5),
            (self.direct_start, -1.0),
            (self.second_person_start, -0.5),
        ];
        terms.iter().filter(|(on, _)| *on).map(|(_, w)| w).sum()
    }
}

pub fn heuristic_politeness(ts: &TokenStream) -> f64 {
    sigmoid(PolitenessStrategies::detect(ts).weight_sum())
}

/// Offline stand-in for the external toxicity score:
/// `1 - exp(-(swear hits + 0.5 * negative-emotion hits))`.
pub fn heuristic_toxicity(ts: &TokenStream, psych: &Lexicon) -> f64 {
    let mut load = 0.0f64;
    for tok in ts.words() {
        if psych.matches("swear", &tok.lower) {
            load += 1.0;
        }
        if psych.matches("negative_emotion", &tok.lower) {
            load += 0.5;
        }
    }
    1.0 - (-load).exp()
}

/// Blocking HTTP POST used by the scoring client. Returns status and body.
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<(u16, String), String>;
}

#[cfg(feature = "http")]
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

#[cfg(feature = "http")]
impl HttpTransport for ReqwestTransport {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<(u16, String), String> {
        let resp = self
            .client
            .post(url)
            .header("content-type", "application/json")
            .body(body.to_string())
            .send()
            .map_err(|e| e.without_url().to_string())?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| e.without_url().to_string())?;
        Ok((status, text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint: String,
    pub api_key_env: String,
    pub cache_dir: PathBuf,
    pub requests_per_second: f64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    /// Serve from the cache only; a miss is an error.
    pub replay: bool,
}

impl ClientConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        ClientConfig {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key_env: API_KEY_ENV.to_string(),
            cache_dir: cache_dir.into(),
            requests_per_second: 1.0,
            max_retries: 4,
            initial_backoff_ms: 1000,
            replay: true,
        }
    }
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn request_body(text: &str) -> Value {
    json!({"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}}})
}

/// Reads `attributeScores.TOXICITY.summaryScore.value`.
pub fn parse_toxicity(response: &str) -> std::result::Result<f64, ProviderError> {
    let v: Value = serde_json::from_str(response).map_err(|e| ProviderError::Protocol(e.to_string()))?;
    let score = v
        .pointer("/attributeScores/TOXICITY/summaryScore/value")
        .and_then(Value::as_f64)
        .ok_or_else(|| ProviderError::Protocol("missing attributeScores.TOXICITY.summaryScore.value".into()))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(ProviderError::Protocol(format!(
            "toxicity score {score} outside [0, 1]"
        )));
    }
    Ok(score)
}

/// Client for the comment-scoring API with a content-addressed response cache
/// at `<cache_dir>/<sha256(text)>.json`.
pub struct PerspectiveClient {
    config: ClientConfig,
    transport: Option<Box<dyn HttpTransport>>,
    next_slot: Mutex<Option<Instant>>,
    network_calls: AtomicUsize,
}

impl std::fmt::Debug for PerspectiveClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PerspectiveClient")
            .field("config", &self.config)
            .field("has_transport", &self.transport.is_some())
            .finish()
    }
}

impl PerspectiveClient {
    /// A cache-only client.
    pub fn replay(cache_dir: impl Into<PathBuf>) -> Self {
        Self::with_transport(ClientConfig::new(cache_dir), None)
    }

    pub fn with_transport(config: ClientConfig, transport: Option<Box<dyn HttpTransport>>) -> Self {
        PerspectiveClient {
            config,
            transport,
            next_slot: Mutex::new(None),
            network_calls: AtomicUsize::new(0),
        }
    }

    /// A networked client using the compiled-in HTTP transport, if any.
    pub fn online(mut config: ClientConfig) -> Result<Self> {
        config.replay = false;
        #[cfg(feature = "http")]
        let transport: Option<Box<dyn HttpTransport>> = Some(Box::new(ReqwestTransport::new(Duration::from_secs(30))?));
        #[cfg(not(feature = "http"))]
        let transport: Option<Box<dyn HttpTransport>> = None;
        Ok(Self::with_transport(config, transport))
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn cache_path(&self, text: &str) -> PathBuf {
        self.config.cache_dir.join(format!("{}.json", text_hash(text)))
    }

    pub fn cached(&self, text: &str) -> Result<Option<f64>> {
        let path = self.cache_path(text);
        match fs::read_to_string(&path) {
            Ok(body) => Ok(Some(parse_toxicity(&body)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn fetch_toxicity(&self, text: &str) -> Result<f64> {
        if let Some(score) = self.cached(text)? {
            return Ok(score);
        }
        if self.config.replay {
            return Err(ProviderError::CacheMiss(text_hash(text)).into());
        }
        let transport = self.transport.as_ref().ok_or(ProviderError::NoTransport)?;
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::MissingKey(self.config.api_key_env.clone()))?;
        let url = format!("{}?key={}", self.config.endpoint, key);
        let body = request_body(text).to_string();

        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
            self.wait_for_slot();
            self.network_calls.fetch_add(1, Ordering::Relaxed);
            match transport.post_json(&url, &body) {
                Ok((status, resp)) if (200..300).contains(&status) => {
                    let score = parse_toxicity(&resp)?;
                    self.store(text, &resp)?;
                    return Ok(score);
                }
                Ok((status, resp)) if status == 429 || status >= 500 => {
                    last = format!("HTTP {status}: {}", truncate(&resp, 200));
                }
                Ok((status, resp)) => {
                    return Err(ProviderError::Http {
                        status,
                        body: truncate(&resp, 500),
                    }
                    .into())
                }
                Err(e) => last = e,
            }
            log::warn!("scoring request failed (attempt {}): {last}", attempt + 1);
        }
        Err(ProviderError::Retryable {
            attempts: self.config.max_retries + 1,
            message: last,
        }
        .into())
    }

    fn wait_for_slot(&self) {
        if self.config.requests_per_second <= 0.0 {
            return;
        }
        let interval = Duration::from_secs_f64(1.0 / self.config.requests_per_second);
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + interval);
            start - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn store(&self, text: &str, response: &str) -> Result<()> {
        let dir = &self.config.cache_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let target = self.cache_path(text);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(response.as_bytes())
            .map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        Ok(())
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// Writes a response for `text` into a cache directory, as the client would.
pub fn seed_cache(cache_dir: &Path, text: &str, score: f64) -> Result<PathBuf> {
    let client = PerspectiveClient::replay(cache_dir);
    let body = json!({"attributeScores": {"TOXICITY": {"summaryScore": {"value": score, "type": "PROBABILITY"}}}});
    client.store(text, &body.to_string())?;
    Ok(client.cache_path(text))
}

/// Resolves baseline scores for documents according to a [`ProviderMode`].
#[derive(Debug)]
pub struct BaselineProvider {
    mode: ProviderMode,
    client: Option<PerspectiveClient>,
    psych: Lexicon,
}

impl BaselineProvider {
    pub fn new(mode: ProviderMode, client: Option<PerspectiveClient>, psych: Lexicon) -> Self {
        BaselineProvider { mode, client, psych }
    }

    pub fn precomputed_only() -> Self {
        Self::new(ProviderMode::Precomputed, None, Lexicon::default_psycholinguistic())
    }

    pub fn heuristic(psych: Lexicon) -> Self {
        Self::new(ProviderMode::Heuristic, None, psych)
    }

    pub fn mode(&self) -> ProviderMode {
        self.mode
    }

    pub fn client(&self) -> Option<&PerspectiveClient> {
        self.client.as_ref()
    }

    /// Identifies everything that can change the scores, for cache keys.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.to_string().as_bytes());
        if self.mode == ProviderMode::Heuristic {
            h.update(self.psych.fingerprint().as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn scores(&self, doc: &Document, ts: &TokenStream) -> Result<BaselineScores> {
        self.scores_inner(doc, ts).map_err(|e| match e {
            Error::MissingBaseline(_) => e,
            other => Error::Document {
                id: doc.id.clone(),
                source: Box::new(other),
            },
        })
    }

    fn scores_inner(&self, doc: &Document, ts: &TokenStream) -> Result<BaselineScores> {
        let pre = |key: &str| -> Result<Option<f64>> {
            match doc.precomputed.get(key) {
                Some(&v) if (0.0..=1.0).contains(&v) => Ok(Some(v)),
                Some(&v) => Err(Error::InvalidArgument(format!(
                    "precomputed `{key}` = {v} is outside [0, 1]"
                ))),
                None => Ok(None),
            }
        };
        let missing = || Error::MissingBaseline(doc.id.clone());

        let (politeness, p_src) = match pre(POLITENESS_KEY)? {
            Some(v) => (v, Provenance::Precomputed),
            None if self.mode == ProviderMode::Precomputed => return Err(missing()),
            None => (heuristic_politeness(ts), Provenance::Heuristic),
        };
        let (toxicity, t_src) = match pre(PERSPECTIVE_KEY)? {
            Some(v) => (v, Provenance::Precomputed),
            None => match self.mode {
                ProviderMode::Precomputed => return Err(missing()),
                ProviderMode::Heuristic => (heuristic_toxicity(ts, &self.psych), Provenance::Heuristic),
                ProviderMode::Cache | ProviderMode::Fetch => {
                    let client = self.client.as_ref().ok_or_else(missing)?;
                    let score = if self.mode == ProviderMode::Cache {
                        client
                            .cached(&doc.text)?
                            .ok_or_else(|| ProviderError::CacheMiss(text_hash(&doc.text)))?
                    } else {
                        client.fetch_toxicity(&doc.text)?
                    };
                    (score, Provenance::Fetched)
                }
            },
        };
        Ok(BaselineScores {
            politeness,
            perspective_toxicity: toxicity,
            provenance: p_src.max(t_src),
        })
    }
}

/// Convenience wrapper that tokenizes the document itself.
pub fn baseline_scores(doc: &Document, provider: &BaselineProvider) -> Result<BaselineScores> {
    provider.scores(doc, &tokenize(&doc.text))
}

/// Texts in `docs` that still need an API score (no precomputed value and no
/// cache entry). Deduplicated, in first-seen order.
pub fn pending_texts<'a>(
    docs: impl IntoIterator<Item = &'a Document>,
    client: &PerspectiveClient,
) -> Result<Vec<&'a str>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for d in docs {
        if d.precomputed.contains_key(PERSPECTIVE_KEY) || seen.insert(d.text.as_str(), ()).is_some() {
            continue;
        }
        if client.cached(&d.text)?.is_none() {
            out.push(d.text.as_str());
        }
    }
    Ok(out)
}
