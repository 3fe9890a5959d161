//! Detector adapters: the seam through which scores reach the pipeline.
//!
//! Three kinds are supported:
//!
//! * `scores_file` — precomputed scores from a delimited table; every
//!   input document must be covered.
//! * `remote_endpoint` — an HTTP scoring service taking batches of
//!   `{id, text}` and returning `{id, score}`. Transient failures are
//!   retried with exponential backoff; document text reaches the endpoint
//!   verbatim, attacked bytes included.
//! * `builtin_frequency` — a deterministic local scorer for end-to-end
//!   tests: negative mean log-frequency of tokens under a word-frequency
//!   table, rescaled to [0, 1].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attack::sites::word_tokens;
use crate::calibration::{load_scores, ScoreRecord};
use crate::corpus::Document;
use crate::error::{Error, Result};

/// Environment variable holding the remote endpoint credential; sent as a
/// bearer token when set.
pub const TOKEN_ENV_VAR: &str = "MGTD_EVAL_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorKind {
    ScoresFile {
        path: PathBuf,
    },
    RemoteEndpoint {
        url: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_max_batch")]
        max_batch: usize,
        #[serde(default = "default_retries")]
        retries: u32,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
    },
    BuiltinFrequency {
        #[serde(default)]
        table_path: Option<PathBuf>,
    },
}

fn default_timeout_secs() -> u64 {
    30
}
fn default_max_batch() -> usize {
    32
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorHandle {
    pub detector_id: String,
    #[serde(flatten)]
    pub kind: DetectorKind,
}

impl DetectorHandle {
    pub fn validate(&self) -> Result<()> {
        if self.detector_id.is_empty() {
            return Err(Error::Config("detector_id must be nonempty".into()));
        }
        if let DetectorKind::RemoteEndpoint { timeout_secs, .. } = &self.kind {
            if *timeout_secs == 0 {
                return Err(Error::Config(format!(
                    "detector `{}`: timeout must be > 0",
                    self.detector_id
                )));
            }
        }
        Ok(())
    }

    /// One score per input document, in input order.
    pub fn get_scores(&self, documents: &[Document]) -> Result<Vec<ScoreRecord>> {
        self.validate()?;
        if documents.is_empty() {
            return Err(Error::Config("get_scores needs at least one document".into()));
        }
        match &self.kind {
            DetectorKind::ScoresFile { path } => self.from_file(path, documents),
            DetectorKind::RemoteEndpoint {
                url,
                timeout_secs,
                max_batch,
                retries,
                backoff_ms,
            } => self.from_remote(url, *timeout_secs, *max_batch, *retries, *backoff_ms, documents),
            DetectorKind::BuiltinFrequency { table_path } => {
                let table = match table_path {
                    Some(path) => FrequencyTable::load(path)?,
                    None => FrequencyTable::builtin(),
                };
                documents
                    .iter()
                    .map(|doc| {
                        Ok(ScoreRecord {
                            doc_id: doc.id.clone(),
                            detector_id: self.detector_id.clone(),
                            score: builtin_frequency_score(&table, &doc.text)?,
                        })
                    })
                    .collect()
            }
        }
    }

    fn from_file(&self, path: &Path, documents: &[Document]) -> Result<Vec<ScoreRecord>> {
        let records = load_scores(path)?;
        let by_id: HashMap<&str, f64> = records
            .iter()
            .filter(|r| r.detector_id == self.detector_id)
            .map(|r| (r.doc_id.as_str(), r.score))
            .collect();
        documents
            .iter()
            .map(|doc| {
                let score = by_id
                    .get(doc.id.as_str())
                    .copied()
                    .ok_or_else(|| Error::MissingScore(doc.id.clone()))?;
                Ok(ScoreRecord {
                    doc_id: doc.id.clone(),
                    detector_id: self.detector_id.clone(),
                    score,
                })
            })
            .collect()
    }

    fn from_remote(
        &self,
        url: &str,
        timeout_secs: u64,
        max_batch: usize,
        retries: u32,
        backoff_ms: u64,
        documents: &[Document],
    ) -> Result<Vec<ScoreRecord>> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| Error::Remote {
                attempts: 0,
                message: e.to_string(),
            })?;
        let token = std::env::var(TOKEN_ENV_VAR).ok();
        let mut records = Vec::with_capacity(documents.len());
        for batch in documents.chunks(max_batch.max(1)) {
            let scored = score_batch_with_retry(&client, url, token.as_deref(), retries, backoff_ms, batch)?;
            records.extend(scored.into_iter().map(|(doc_id, score)| ScoreRecord {
                doc_id,
                detector_id: self.detector_id.clone(),
                score,
            }));
        }
        Ok(records)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    documents: Vec<RequestDoc<'a>>,
}

#[derive(Serialize)]
struct RequestDoc<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<ResponseScore>,
}

#[derive(Deserialize)]
struct ResponseScore {
    id: String,
    score: f64,
}

fn score_batch_with_retry(
    client: &reqwest::blocking::Client,
    url: &str,
    token: Option<&str>,
    retries: u32,
    backoff_ms: u64,
    batch: &[Document],
) -> Result<Vec<(String, f64)>> {
    let body = ScoreRequest {
        documents: batch
            .iter()
            .map(|d| RequestDoc {
                id: &d.id,
                text: &d.text,
            })
            .collect(),
    };
    let mut last_error = String::new();
    let attempts = retries.max(1);
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(backoff_ms << (attempt - 1)));
        }
        match try_score_batch(client, url, token, &body, batch) {
            Ok(scored) => return Ok(scored),
            Err(TransientOrFatal::Transient(message)) => last_error = message,
            Err(TransientOrFatal::Fatal(err)) => return Err(err),
        }
    }
    Err(Error::Remote {
        attempts,
        message: last_error,
    })
}

enum TransientOrFatal {
    Transient(String),
    Fatal(Error),
}

fn try_score_batch(
    client: &reqwest::blocking::Client,
    url: &str,
    token: Option<&str>,
    body: &ScoreRequest<'_>,
    batch: &[Document],
) -> std::result::Result<Vec<(String, f64)>, TransientOrFatal> {
    let mut request = client.post(url).json(body);
    if let Some(token) = token {
        request = request.bearer_auth(token);
    }
    let response = request
        .send()
        .map_err(|e| TransientOrFatal::Transient(e.to_string()))?;
    let status = response.status();
    if status.is_server_error() {
        return Err(TransientOrFatal::Transient(format!("server error {status}")));
    }
    if !status.is_success() {
        // Client errors are protocol bugs; retrying cannot help.
        return Err(TransientOrFatal::Fatal(Error::Remote {
            attempts: 1,
            message: format!("endpoint returned {status}"),
        }));
    }
    let parsed: ScoreResponse = response
        .json()
        .map_err(|e| TransientOrFatal::Transient(format!("malformed response: {e}")))?;
    let by_id: HashMap<String, f64> = parsed.scores.into_iter().map(|s| (s.id, s.score)).collect();
    batch
        .iter()
        .map(|doc| {
            by_id
                .get(&doc.id)
                .map(|&score| (doc.id.clone(), score))
                .ok_or_else(|| {
                    TransientOrFatal::Fatal(Error::MissingScore(doc.id.clone()))
                })
        })
        .collect()
}

/// Word-frequency table, `token<TAB>count` per line.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
    max_count: u64,
}

impl FrequencyTable {
    pub fn builtin() -> FrequencyTable {
        FrequencyTable::parse("frequency(builtin)", include_str!("../resources/frequency.tsv"))
            .expect("builtin frequency table parses")
    }

    pub fn load(path: &Path) -> Result<FrequencyTable> {
        let raw =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        FrequencyTable::parse(&path.display().to_string(), &raw)
    }

    pub fn parse(name: &str, raw: &str) -> Result<FrequencyTable> {
        let mut counts = BTreeMap::new();
        let mut total = 0u64;
        let mut max_count = 0u64;
        for (idx, row) in raw.lines().enumerate() {
            if row.trim().is_empty() {
                continue;
            }
            let (token, count) = row.split_once('\t').ok_or_else(|| Error::MalformedResource {
                name: name.into(),
                line: idx + 1,
                message: "expected token<TAB>count".into(),
            })?;
            let count: u64 = count.trim().parse().map_err(|_| Error::MalformedResource {
                name: name.into(),
                line: idx + 1,
                message: format!("bad count `{count}`"),
            })?;
            if count == 0 {
                return Err(Error::MalformedResource {
                    name: name.into(),
                    line: idx + 1,
                    message: "zero count".into(),
                });
            }
            total += count;
            max_count = max_count.max(count);
            counts.insert(token.to_lowercase(), count);
        }
        if counts.is_empty() {
            return Err(Error::MalformedResource {
                name: name.into(),
                line: 0,
                message: "empty frequency table".into(),
            });
        }
        Ok(FrequencyTable {
            counts,
            total,
            max_count,
        })
    }

    fn probability(&self, token: &str) -> f64 {
        match self.counts.get(token) {
            Some(&count) => count as f64 / self.total as f64,
            None => self.floor_probability(),
        }
    }

    /// Out-of-vocabulary floor: half a count.
    fn floor_probability(&self) -> f64 {
        0.5 / self.total as f64
    }
}

/// Negative mean log-frequency of the word tokens, affinely rescaled so
/// that a text of only the most frequent word scores 0 and a text of only
/// out-of-vocabulary tokens scores 1.
pub fn builtin_frequency_score(table: &FrequencyTable, text: &str) -> Result<f64> {
    let tokens = word_tokens(text);
    if tokens.is_empty() {
        return Err(Error::Config("no word tokens to score".into()));
    }
    let raw: f64 = tokens
        .iter()
        .map(|(_, _, token)| -table.probability(&token.to_lowercase()).ln())
        .sum::<f64>()
        / tokens.len() as f64;
    let lo = -(table.max_count as f64 / table.total as f64).ln();
    let hi = -table.floor_probability().ln();
    Ok(((raw - lo) / (hi - lo)).clamp(0.0, 1.0))
}
