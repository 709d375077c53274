//! Text similarity providers behind the linguistic term of the round score.
//!
//! Two providers ship: a deterministic lexical token-F1 that needs nothing
//! external, and an HTTP client for an embedding similarity service that
//! speaks the following protocol:
//!
//! ```text
//! POST /v1/similarity  {"pairs": [{"candidate": str, "reference": str}, ...]}
//!                   -> {"scores": [real, ...]}          (same length, same order)
//! GET  /v1/health   -> {"status": "ok", "model": str}
//! ```

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::thread::sleep;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable consulted when no endpoint is configured.
pub const ENDPOINT_ENV: &str = "MRG_BENCH_ENDPOINT";

/// Scores this far outside `[0, 1]` are clamped instead of rejected.
const SCORE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextPair {
    pub candidate: String,
    pub reference: String,
}

impl TextPair {
    pub fn new(candidate: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            candidate: candidate.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("transport error for pairs {range:?}: {message}")]
    Transport { range: Range<usize>, message: String },
    #[error("protocol error for pairs {range:?}: {message}")]
    Protocol { range: Range<usize>, message: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

/// Scores how close a candidate text is to a reference, in `[0, 1]`.
pub trait SimilarityProvider: Send + Sync {
    /// Short identifier recorded in reports.
    fn name(&self) -> String;

    fn score_batch(&self, pairs: &[TextPair]) -> Result<Vec<f64>, SimilarityError>;

    fn score(&self, candidate: &str, reference: &str) -> Result<f64, SimilarityError> {
        let scores = self.score_batch(&[TextPair::new(candidate, reference)])?;
        scores.into_iter().next().ok_or_else(|| SimilarityError::Protocol {
            range: 0..1,
            message: "empty response".into(),
        })
    }
}

fn tokens(s: &str) -> Vec<String> {
    let cleaned: String = s
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Token-level F1 over lowercased, punctuation-free, whitespace-split text.
pub fn lexical_f1(candidate: &str, reference: &str) -> f64 {
    let cand = tokens(candidate);
    let refs = tokens(reference);
    match (cand.is_empty(), refs.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &refs {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &cand {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / cand.len() as f64;
    let recall = overlap as f64 / refs.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalProvider;

impl SimilarityProvider for LexicalProvider {
    fn name(&self) -> String {
        "lexical-f1".into()
    }

    fn score_batch(&self, pairs: &[TextPair]) -> Result<Vec<f64>, SimilarityError> {
        Ok(pairs.iter().map(|p| lexical_f1(&p.candidate, &p.reference)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Lexical,
    Remote,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderKind::Lexical => f.write_str("lexical"),
            ProviderKind::Remote => f.write_str("remote"),
        }
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lexical" => Ok(ProviderKind::Lexical),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(format!("unknown provider '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
    pub retries: u32,
    /// Maximum pairs per request.
    pub batch_size: usize,
    /// Base delay of the exponential retry backoff.
    #[serde(with = "duration_secs")]
    pub backoff: Duration,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Lexical,
            endpoint: None,
            timeout: Duration::from_secs(30),
            retries: 3,
            batch_size: 64,
            backoff: Duration::from_millis(200),
        }
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl ProviderConfig {
    pub fn lexical() -> Self {
        Self::default()
    }

    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Remote,
            endpoint: Some(endpoint.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimilarityError> {
        if self.timeout.is_zero() {
            return Err(SimilarityError::Config("timeout must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(SimilarityError::Config("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Resolve the endpoint from the config, falling back to
    /// [`ENDPOINT_ENV`].
    pub fn resolved_endpoint(&self) -> Option<String> {
        self.endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.trim().is_empty()))
    }

    pub fn build(&self) -> Result<Box<dyn SimilarityProvider>, SimilarityError> {
        self.validate()?;
        match self.kind {
            ProviderKind::Lexical => Ok(Box::new(LexicalProvider)),
            ProviderKind::Remote => Ok(Box::new(RemoteProvider::new(self)?.with_model_from_health())),
        }
    }
}

#[derive(Serialize)]
struct SimilarityRequest<'a> {
    pairs: &'a [TextPair],
}

#[derive(Deserialize)]
struct SimilarityResponse {
    scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub model: String,
}

/// HTTP client for a remote similarity service.
pub struct RemoteProvider {
    base: String,
    client: reqwest::blocking::Client,
    retries: u32,
    batch_size: usize,
    backoff: Duration,
    model: String,
}

impl RemoteProvider {
    pub fn new(config: &ProviderConfig) -> Result<Self, SimilarityError> {
        config.validate()?;
        let endpoint = config
            .resolved_endpoint()
            .ok_or_else(|| SimilarityError::Config(format!("no endpoint configured and {ENDPOINT_ENV} unset")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| SimilarityError::Config(e.to_string()))?;
        Ok(Self {
            base: endpoint.trim_end_matches('/').to_string(),
            client,
            retries: config.retries,
            batch_size: config.batch_size,
            backoff: config.backoff,
            model: String::new(),
        })
    }

    pub fn health(&self) -> Result<Health, SimilarityError> {
        let url = format!("{}/v1/health", self.base);
        let body = self
            .client
            .get(&url)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.text())
            .map_err(|e| SimilarityError::Transport {
                range: 0..0,
                message: e.to_string(),
            })?;
        serde_json::from_str(&body).map_err(|e| SimilarityError::Protocol {
            range: 0..0,
            message: format!("malformed health response: {e}"),
        })
    }

    /// Record the service's model identifier for reports, if reachable.
    pub fn with_model_from_health(mut self) -> Self {
        if let Ok(h) = self.health() {
            self.model = h.model;
        }
        self
    }

    fn post(&self, pairs: &[TextPair], range: Range<usize>) -> Result<String, SimilarityError> {
        let url = format!("{}/v1/similarity", self.base);
        let payload = serde_json::to_string(&SimilarityRequest { pairs }).expect("pairs serialize");
        let mut attempt = 0;
        loop {
            let result = self
                .client
                .post(&url)
                .header("content-type", "application/json")
                .body(payload.clone())
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.text());
            match result {
                Ok(body) => return Ok(body),
                Err(e) if attempt < self.retries => {
                    log::warn!("similarity request for pairs {range:?} failed ({e}), retrying");
                    sleep(self.backoff * 2u32.saturating_pow(attempt));
                    attempt += 1;
                }
                Err(e) => {
                    return Err(SimilarityError::Transport {
                        range,
                        message: format!("{e} (after {} attempts)", attempt + 1),
                    })
                }
            }
        }
    }

    fn score_chunk(&self, pairs: &[TextPair], offset: usize) -> Result<Vec<f64>, SimilarityError> {
        let range = offset..offset + pairs.len();
        let body = self.post(pairs, range.clone())?;
        let protocol = |message: String| SimilarityError::Protocol {
            range: range.clone(),
            message,
        };
        let resp: SimilarityResponse =
            serde_json::from_str(&body).map_err(|e| protocol(format!("malformed response: {e}")))?;
        if resp.scores.len() != pairs.len() {
            return Err(protocol(format!(
                "expected {} scores, got {} (short by {})",
                pairs.len(),
                resp.scores.len(),
                pairs.len() as i64 - resp.scores.len() as i64
            )));
        }
        resp.scores
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                if !(-SCORE_SLACK..=1.0 + SCORE_SLACK).contains(&s) {
                    Err(protocol(format!("score {s} for pair {} is outside [0, 1]", offset + i)))
                } else {
                    Ok(s.clamp(0.0, 1.0))
                }
            })
            .collect()
    }
}

impl SimilarityProvider for RemoteProvider {
    fn name(&self) -> String {
        if self.model.is_empty() {
            format!("remote:{}", self.base)
        } else {
            format!("remote:{}", self.model)
        }
    }

    fn score_batch(&self, pairs: &[TextPair]) -> Result<Vec<f64>, SimilarityError> {
        let mut out = Vec::with_capacity(pairs.len());
        for (i, chunk) in pairs.chunks(self.batch_size).enumerate() {
            out.extend(self.score_chunk(chunk, i * self.batch_size)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lexical_examples() {
        assert_eq!(lexical_f1("a red cup", "a red cup"), 1.0);
        assert_eq!(lexical_f1("blue", "yellow"), 0.0);
        // P = 1/2, R = 1/2.
        assert_eq!(lexical_f1("red cup", "red mug"), 0.5);
        assert_eq!(lexical_f1("", ""), 1.0);
        assert_eq!(lexical_f1("", "cup"), 0.0);
        assert_eq!(lexical_f1("Cup.", "cup"), 1.0);
        // Multiset overlap: one shared "the".
        let v = lexical_f1("the the cup", "the mug");
        assert!((v - 2.0 * (1.0 / 3.0) * 0.5 / (1.0 / 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = ProviderConfig::lexical();
        c.timeout = Duration::ZERO;
        assert!(c.build().is_err());
        let c = ProviderConfig {
            kind: ProviderKind::Remote,
            endpoint: Some("http://127.0.0.1:1".into()),
            ..ProviderConfig::default()
        };
        assert!(c.build().is_ok());
    }

    #[test]
    fn empty_remote_batch_needs_no_network() {
        let p = RemoteProvider::new(&ProviderConfig::remote("http://127.0.0.1:1")).unwrap();
        assert_eq!(p.score_batch(&[]).unwrap(), Vec::<f64>::new());
    }

    proptest! {
        #[test]
        fn lexical_symmetric_and_bounded(a in "[a-c ,.]{0,12}", b in "[a-c ,.]{0,12}") {
            let ab = lexical_f1(&a, &b);
            prop_assert_eq!(ab, lexical_f1(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            if !tokens(&a).is_empty() {
                prop_assert_eq!(lexical_f1(&a, &a), 1.0);
            }
        }

        #[test]
        fn batch_matches_pointwise(pairs in proptest::collection::vec(("[a-d ]{0,8}", "[a-d ]{0,8}"), 0..10)) {
            let pairs: Vec<TextPair> = pairs.into_iter().map(|(c, r)| TextPair::new(c, r)).collect();
            let batch = LexicalProvider.score_batch(&pairs).unwrap();
            for (p, s) in pairs.iter().zip(batch) {
                prop_assert_eq!(s, LexicalProvider.score(&p.candidate, &p.reference).unwrap());
            }
        }
    }
}
