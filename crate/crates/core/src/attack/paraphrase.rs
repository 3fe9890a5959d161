//! Paraphrase providers.
//!
//! The paraphrase attack routes the whole document through a provider:
//!
//! * `builtin-stub` — deterministic rule-based rewriting: synonym-lexicon
//!   substitution on content words plus discourse-connective swaps. This is
//!   a stand-in, not a neural paraphraser, and is documented as such.
//! * `external-command` — a subprocess that reads one sentence segment per
//!   line on stdin and writes exactly one rewritten segment per line on
//!   stdout, exiting 0.
//! * `http-endpoint` — a POST endpoint taking `{"segments": [...]}` and
//!   returning `{"segments": [...]}` with the same count.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::attack::resources::ResourceSet;
use crate::attack::sites::{match_case, word_tokens};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParaphraseProvider {
    BuiltinStub,
    ExternalCommand {
        command: String,
        #[serde(default)]
        args: Vec<String>,
    },
    HttpEndpoint {
        url: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
    },
}

fn default_timeout_secs() -> u64 {
    30
}

impl Default for ParaphraseProvider {
    fn default() -> Self {
        ParaphraseProvider::BuiltinStub
    }
}

/// Discourse-connective rewrites applied by the builtin stub.
const CONNECTIVES: &[(&str, &str)] = &[
    ("however", "nevertheless"),
    ("therefore", "consequently"),
    ("moreover", "furthermore"),
    ("additionally", "furthermore"),
    ("finally", "ultimately"),
    ("meanwhile", "simultaneously"),
    ("instead", "alternatively"),
    ("besides", "furthermore"),
    ("thus", "hence"),
    ("nonetheless", "regardless"),
];

impl ParaphraseProvider {
    pub fn paraphrase(&self, text: &str, resources: &ResourceSet) -> Result<String> {
        match self {
            ParaphraseProvider::BuiltinStub => Ok(builtin_stub(text, resources)),
            ParaphraseProvider::ExternalCommand { command, args } => {
                external_command(command, args, text)
            }
            ParaphraseProvider::HttpEndpoint { url, timeout_secs } => {
                http_endpoint(url, *timeout_secs, text)
            }
        }
    }
}

/// Deterministic substitution: connectives first, then the first lexicon
/// synonym for any content-word headword, casing preserved.
fn builtin_stub(text: &str, resources: &ResourceSet) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end, token) in word_tokens(text) {
        out.extend(&chars[cursor..start]);
        let lower = token.to_lowercase();
        let replacement = CONNECTIVES
            .iter()
            .find(|(from, _)| *from == lower)
            .map(|(_, to)| (*to).to_string())
            .or_else(|| {
                resources
                    .synonyms
                    .get(&lower)
                    .and_then(|entry| entry.synonyms.first())
                    .cloned()
            });
        match replacement {
            Some(r) => out.push_str(&match_case(&token, &r)),
            None => out.push_str(&token),
        }
        cursor = end;
    }
    out.extend(&chars[cursor..]);
    out
}

/// Splits after sentence-terminal punctuation followed by whitespace.
/// Internal newlines are flattened to spaces so each segment fits the
/// one-per-line wire contract.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut segments = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if crate::attack::sites::is_terminal_punct(chars[i])
            && chars.get(i + 1).map_or(false, |c| c.is_whitespace())
        {
            let mut j = i + 1;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            segments.push(flatten(&chars[start..i + 1]));
            start = j;
            i = j;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        segments.push(flatten(&chars[start..]));
    }
    segments
}

fn flatten(chars: &[char]) -> String {
    chars
        .iter()
        .map(|&c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect()
}

fn external_command(command: &str, args: &[String], text: &str) -> Result<String> {
    let segments = segment_sentences(text);
    if segments.is_empty() {
        return Ok(text.to_string());
    }
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Paraphrase(format!("spawn `{command}`: {e}")))?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        for segment in &segments {
            writeln!(stdin, "{segment}")
                .map_err(|e| Error::Paraphrase(format!("write to `{command}`: {e}")))?;
        }
    }
    let output = child
        .wait_with_output()
        .map_err(|e| Error::Paraphrase(format!("wait on `{command}`: {e}")))?;
    if !output.status.success() {
        return Err(Error::Paraphrase(format!(
            "`{command}` exited with {}",
            output.status
        )));
    }
    let stdout = String::from_utf8(output.stdout)
        .map_err(|_| Error::Paraphrase(format!("`{command}` produced non-UTF-8 output")))?;
    let rewritten: Vec<&str> = stdout.lines().collect();
    check_segment_count(segments.len(), rewritten.len())?;
    Ok(rewritten.join(" "))
}

#[derive(Serialize, Deserialize)]
struct SegmentsBody {
    segments: Vec<String>,
}

fn http_endpoint(url: &str, timeout_secs: u64, text: &str) -> Result<String> {
    let segments = segment_sentences(text);
    if segments.is_empty() {
        return Ok(text.to_string());
    }
    let count = segments.len();
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(timeout_secs))
        .build()
        .map_err(|e| Error::Paraphrase(e.to_string()))?;
    let response = client
        .post(url)
        .json(&SegmentsBody { segments })
        .send()
        .map_err(|e| Error::Paraphrase(e.to_string()))?
        .error_for_status()
        .map_err(|e| Error::Paraphrase(e.to_string()))?;
    let body: SegmentsBody = response
        .json()
        .map_err(|e| Error::Paraphrase(format!("malformed response: {e}")))?;
    check_segment_count(count, body.segments.len())?;
    Ok(body.segments.join(" "))
}

fn check_segment_count(sent: usize, received: usize) -> Result<()> {
    if sent != received {
        return Err(Error::Paraphrase(format!(
            "segment count mismatch: sent {sent}, received {received}"
        )));
    }
    Ok(())
}
