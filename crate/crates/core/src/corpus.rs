//! Corpus schema, loading, validation, profiling, and filtered views.
//!
//! A corpus is an ordered collection of documents, each carrying full
//! provenance: the label (human/machine), the generator model, the textual
//! domain, the decoding strategy, the applied attack, and lineage ids
//! linking machine documents to their human counterpart and attacked
//! documents to the unattacked original.
//!
//! Two on-disk formats are supported, both UTF-8:
//!
//! * record-lines: one JSON object per line (canonical; newlines and other
//!   control characters in `text` are escaped by JSON, so attacked text
//!   round-trips byte-faithfully)
//! * delimited-table: CSV with a header row, quoting for embedded
//!   newlines/commas

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::AttackKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Human,
    Machine,
}

/// Generator models, plus `human` for human-written documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Human,
    Gpt2,
    Gpt3,
    Gpt4,
    Chatgpt,
    Cohere,
    CohereChat,
    Mpt,
    MptChat,
    Mistral,
    MistralChat,
    LlamaChat,
}

impl Model {
    pub const MACHINE_MODELS: [Model; 11] = [
        Model::Gpt2,
        Model::Gpt3,
        Model::Gpt4,
        Model::Chatgpt,
        Model::Cohere,
        Model::CohereChat,
        Model::Mpt,
        Model::MptChat,
        Model::Mistral,
        Model::MistralChat,
        Model::LlamaChat,
    ];

    /// API-backed generators ship two decodings per human document; the
    /// open-weight ones ship four (repetition-penalty variants included).
    pub fn is_api_based(self) -> bool {
        matches!(
            self,
            Model::Gpt3 | Model::Gpt4 | Model::Chatgpt | Model::Cohere | Model::CohereChat
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Abstracts,
    Books,
    News,
    Poetry,
    Recipes,
    Reddit,
    Reviews,
    Wiki,
}

impl Domain {
    pub const ALL: [Domain; 8] = [
        Domain::Abstracts,
        Domain::Books,
        Domain::News,
        Domain::Poetry,
        Domain::Recipes,
        Domain::Reddit,
        Domain::Reviews,
        Domain::Wiki,
    ];
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&enum_str(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoding {
    None,
    Greedy,
    Sampling,
    GreedyRepPenalty,
    SamplingRepPenalty,
}

/// Serializes `Option<AttackKind>` as the attack name or the literal `none`.
pub mod attack_label {
    use super::AttackKind;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<AttackKind>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(kind) => kind.serialize(s),
            None => "none".serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<AttackKind>, D::Error> {
        let raw = String::deserialize(d)?;
        if raw == "none" {
            return Ok(None);
        }
        AttackKind::from_name(&raw)
            .map(Some)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown attack `{raw}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub model: Model,
    pub domain: Domain,
    pub decoding: Decoding,
    #[serde(with = "attack_label")]
    pub attack: Option<AttackKind>,
    #[serde(default)]
    pub source_id: String,
    #[serde(default)]
    pub adv_source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub split: Split,
    /// Ids of referenced ancestors that a filtered view dropped. Lets
    /// referential-integrity checks pass on views without keeping the
    /// ancestor documents themselves.
    pub ancestor_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    RecordLines,
    DelimitedTable,
}

/// Field constraints for [`filter_view`]. All set constraints must match.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predicate {
    pub label: Option<Label>,
    pub model: Option<Model>,
    pub domain: Option<Domain>,
    pub decoding: Option<Decoding>,
    pub attack: Option<Option<AttackKind>>,
}

impl Predicate {
    /// Subtask A: the corpus without adversarial attacks.
    pub fn subtask_a() -> Self {
        Predicate {
            attack: Some(None),
            ..Default::default()
        }
    }

    /// Subtask B: everything, attacks included.
    pub fn subtask_b() -> Self {
        Predicate::default()
    }

    /// Parses `field=value` clauses, e.g. `domain=poetry`, `attack=homoglyph`.
    pub fn parse(clauses: &[String]) -> Result<Self> {
        let mut p = Predicate::default();
        for clause in clauses {
            let (field, value) = clause
                .split_once('=')
                .ok_or_else(|| Error::UnknownField(clause.clone()))?;
            match field {
                "label" => p.label = Some(parse_enum(value)?),
                "model" => p.model = Some(parse_enum(value)?),
                "domain" => p.domain = Some(parse_enum(value)?),
                "decoding" => p.decoding = Some(parse_enum(value)?),
                "attack" => {
                    p.attack = Some(if value == "none" {
                        None
                    } else {
                        Some(AttackKind::from_name(value).ok_or_else(|| {
                            Error::Config(format!("unknown attack `{value}`"))
                        })?)
                    })
                }
                other => return Err(Error::UnknownField(other.to_string())),
            }
        }
        Ok(p)
    }

    pub fn matches(&self, doc: &Document) -> bool {
        self.label.map_or(true, |v| doc.label == v)
            && self.model.map_or(true, |v| doc.model == v)
            && self.domain.map_or(true, |v| doc.domain == v)
            && self.decoding.map_or(true, |v| doc.decoding == v)
            && self.attack.map_or(true, |v| doc.attack == v)
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("unknown enum value `{value}`")))
}

pub fn enum_str<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => "?".into(),
    }
}

/// Per-cell document counts plus class-balance summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusProfile {
    /// (domain, model, decoding, attack-or-none) -> count.
    pub cells: BTreeMap<String, u64>,
    pub human_count: BTreeMap<Domain, u64>,
    pub machine_total: u64,
    pub human_total: u64,
    pub warnings: Vec<String>,
}

impl CorpusProfile {
    pub fn total(&self) -> u64 {
        self.machine_total + self.human_total
    }

    /// machine:human class ratio as an exact rational.
    pub fn machine_to_human_ratio(&self) -> (u64, u64) {
        (self.machine_total, self.human_total)
    }
}

fn cell_key(doc: &Document) -> String {
    let attack = doc.attack.map_or("none", |k| k.name());
    format!(
        "{}/{}/{}/{}",
        enum_str(&doc.domain),
        enum_str(&doc.model),
        enum_str(&doc.decoding),
        attack
    )
}

impl Corpus {
    pub fn new(documents: Vec<Document>, split: Split) -> Self {
        Corpus {
            documents,
            split,
            ancestor_ids: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Checks all document invariants and referential integrity. Returns
    /// warnings (degraded-lineage notes); hard violations are errors.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(self.documents.len());
        for (row, doc) in self.documents.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::Integrity {
                    row,
                    id: String::new(),
                    message: "empty document id".into(),
                });
            }
            if by_id.insert(doc.id.as_str(), row).is_some() {
                return Err(Error::Integrity {
                    row,
                    id: doc.id.clone(),
                    message: "duplicate document id".into(),
                });
            }
        }
        for (row, doc) in self.documents.iter().enumerate() {
            let err = |message: String| Error::Integrity {
                row,
                id: doc.id.clone(),
                message,
            };
            match doc.label {
                Label::Human => {
                    if doc.model != Model::Human {
                        return Err(err("human document with non-human model".into()));
                    }
                    if doc.decoding != Decoding::None {
                        return Err(err("human document with a decoding strategy".into()));
                    }
                    if doc.attack.is_some() {
                        return Err(err("human document with an attack".into()));
                    }
                    if !doc.source_id.is_empty() {
                        return Err(err("human document with a source_id".into()));
                    }
                }
                Label::Machine => {
                    if doc.model == Model::Human {
                        return Err(err("machine document with model=human".into()));
                    }
                    if doc.source_id.is_empty() {
                        return Err(err("machine document without source_id".into()));
                    }
                    match by_id.get(doc.source_id.as_str()) {
                        Some(&src_row) => {
                            let src = &self.documents[src_row];
                            if src.label != Label::Human {
                                return Err(err(format!(
                                    "source_id `{}` is not a human document",
                                    doc.source_id
                                )));
                            }
                            if src.domain != doc.domain {
                                return Err(err(format!(
                                    "source_id `{}` is in a different domain",
                                    doc.source_id
                                )));
                            }
                        }
                        None if self.ancestor_ids.contains(&doc.source_id) => {}
                        None => {
                            return Err(err(format!(
                                "dangling source_id `{}`",
                                doc.source_id
                            )))
                        }
                    }
                    if doc.attack.is_some() {
                        if doc.adv_source_id.is_empty() {
                            warnings.push(format!(
                                "document `{}`: attacked but lineage unknown (no adv_source_id)",
                                doc.id
                            ));
                        } else {
                            match by_id.get(doc.adv_source_id.as_str()) {
                                Some(&orig_row) => {
                                    let orig = &self.documents[orig_row];
                                    if orig.attack.is_some() {
                                        return Err(err(format!(
                                            "adv_source_id `{}` is itself attacked",
                                            doc.adv_source_id
                                        )));
                                    }
                                    if (orig.model, orig.domain, orig.decoding)
                                        != (doc.model, doc.domain, doc.decoding)
                                    {
                                        return Err(err(format!(
                                            "adv_source_id `{}` provenance mismatch",
                                            doc.adv_source_id
                                        )));
                                    }
                                }
                                None if self.ancestor_ids.contains(&doc.adv_source_id) => {}
                                None => {
                                    return Err(err(format!(
                                        "dangling adv_source_id `{}`",
                                        doc.adv_source_id
                                    )))
                                }
                            }
                        }
                    } else if !doc.adv_source_id.is_empty() {
                        return Err(err("unattacked document with adv_source_id".into()));
                    }
                }
            }
        }
        Ok(warnings)
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let documents = match format {
        CorpusFormat::RecordLines => {
            let reader = BufReader::new(file);
            let mut docs = Vec::new();
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    row: idx,
                    message: e.to_string(),
                })?;
                docs.push(doc);
            }
            docs
        }
        CorpusFormat::DelimitedTable => {
            let mut reader = csv::Reader::from_reader(file);
            check_header(&mut reader)?;
            let mut docs = Vec::new();
            for (idx, record) in reader.deserialize::<Document>().enumerate() {
                docs.push(record.map_err(|e| Error::Parse {
                    row: idx,
                    message: e.to_string(),
                })?);
            }
            docs
        }
    };
    let corpus = Corpus::new(documents, Split::Custom);
    corpus.validate()?;
    Ok(corpus)
}

const REQUIRED_FIELDS: [&str; 9] = [
    "id",
    "text",
    "label",
    "model",
    "domain",
    "decoding",
    "attack",
    "source_id",
    "adv_source_id",
];

fn check_header<R: std::io::Read>(reader: &mut csv::Reader<R>) -> Result<()> {
    let headers = reader.headers().map_err(|e| Error::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    let present: HashSet<&str> = headers.iter().collect();
    for field in REQUIRED_FIELDS {
        if !present.contains(field) {
            return Err(Error::Schema {
                field: field.to_string(),
            });
        }
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    match format {
        CorpusFormat::RecordLines => {
            let mut buf = String::new();
            for doc in &corpus.documents {
                buf.push_str(&serde_json::to_string(doc).expect("document serializes"));
                buf.push('\n');
            }
            file.write_all(buf.as_bytes())
                .map_err(|e| Error::io(path.display().to_string(), e))?;
        }
        CorpusFormat::DelimitedTable => {
            let mut writer = csv::Writer::from_writer(file);
            for doc in &corpus.documents {
                writer.serialize(doc).map_err(|e| Error::Parse {
                    row: 0,
                    message: e.to_string(),
                })?;
            }
            writer.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    Ok(())
}

/// Exact per-cell counts. Deviations from the expected corpus shape
/// (API-based models 2 machine docs per human doc, open-weight 4) surface
/// as warnings, never errors.
pub fn profile_corpus(corpus: &Corpus) -> CorpusProfile {
    let mut cells: BTreeMap<String, u64> = BTreeMap::new();
    let mut human_count: BTreeMap<Domain, u64> = BTreeMap::new();
    let mut machine_total = 0u64;
    let mut human_total = 0u64;
    let mut per_model_unattacked: BTreeMap<(Domain, Model), u64> = BTreeMap::new();
    for doc in &corpus.documents {
        *cells.entry(cell_key(doc)).or_default() += 1;
        match doc.label {
            Label::Human => {
                *human_count.entry(doc.domain).or_default() += 1;
                human_total += 1;
            }
            Label::Machine => {
                machine_total += 1;
                if doc.attack.is_none() {
                    *per_model_unattacked.entry((doc.domain, doc.model)).or_default() += 1;
                }
            }
        }
    }
    let mut warnings = Vec::new();
    for ((domain, model), count) in &per_model_unattacked {
        let humans = human_count.get(domain).copied().unwrap_or(0);
        if humans == 0 {
            continue;
        }
        let expected_factor = if model.is_api_based() { 2 } else { 4 };
        if *count != humans * expected_factor {
            warnings.push(format!(
                "domain {domain}, model {}: {count} unattacked machine docs for {humans} human docs \
                 (expected factor {expected_factor})",
                enum_str(model)
            ));
        }
    }
    CorpusProfile {
        cells,
        human_count,
        machine_total,
        human_total,
        warnings,
    }
}

/// Produces a filtered view. Referenced ancestors that the predicate drops
/// stay visible to integrity checks through `ancestor_ids`.
pub fn filter_view(corpus: &Corpus, predicate: &Predicate) -> Corpus {
    let kept: Vec<Document> = corpus
        .documents
        .iter()
        .filter(|d| predicate.matches(d))
        .cloned()
        .collect();
    let kept_ids: HashSet<&str> = kept.iter().map(|d| d.id.as_str()).collect();
    let mut ancestor_ids = corpus.ancestor_ids.clone();
    for doc in &kept {
        for reference in [&doc.source_id, &doc.adv_source_id] {
            if !reference.is_empty() && !kept_ids.contains(reference.as_str()) {
                ancestor_ids.insert(reference.clone());
            }
        }
    }
    ancestor_ids.retain(|id| !kept_ids.contains(id.as_str()));
    Corpus {
        documents: kept,
        split: corpus.split,
        ancestor_ids,
    }
}

#[cfg(test)]
pub mod tests_support {
    use super::*;

    pub fn human_doc(id: &str, domain: Domain) -> Document {
        Document {
            id: id.into(),
            text: format!("human text {id}"),
            label: Label::Human,
            model: Model::Human,
            domain,
            decoding: Decoding::None,
            attack: None,
            source_id: String::new(),
            adv_source_id: String::new(),
        }
    }

    pub fn machine_doc(id: &str, source: &str, domain: Domain) -> Document {
        Document {
            id: id.into(),
            text: format!("machine text {id}"),
            label: Label::Machine,
            model: Model::Gpt2,
            domain,
            decoding: Decoding::Sampling,
            attack: None,
            source_id: source.into(),
            adv_source_id: String::new(),
        }
    }
}
