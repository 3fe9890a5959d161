//! Resource dictionaries backing the attacks and the normalizer.
//!
//! All dictionaries are plain-text UTF-8 TSV files:
//!
//! * confusables: `latin<TAB>glyph` (one character each, bijective)
//! * misspellings: `correct<TAB>misspelled`
//! * US/UK spellings: `us<TAB>uk`
//! * synonym lexicon: `headword<TAB>pos<TAB>syn1,syn2,...`
//! * tagger lexicon: `word<TAB>pos`
//!
//! A built-in copy of each is embedded in the binary; paths in the run
//! configuration override them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
}

impl Pos {
    fn parse(name: &str, raw: &str, line: usize) -> Result<Pos> {
        match raw {
            "noun" => Ok(Pos::Noun),
            "verb" => Ok(Pos::Verb),
            "adj" => Ok(Pos::Adj),
            "adv" => Ok(Pos::Adv),
            other => Err(Error::MalformedResource {
                name: name.into(),
                line,
                message: format!("unknown part-of-speech tag `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynonymEntry {
    pub pos: Pos,
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ResourceSet {
    pub confusables: BTreeMap<char, char>,
    pub confusables_reverse: BTreeMap<char, char>,
    pub misspellings: BTreeMap<String, String>,
    pub us_uk: BTreeMap<String, String>,
    pub synonyms: BTreeMap<String, SynonymEntry>,
    pub tagger: BTreeMap<String, Pos>,
}

/// Closed-class words the tagger never hands to the synonym attack.
const CLOSED_CLASS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "nor", "so", "yet", "if", "then", "because", "while",
    "although", "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from", "up", "down", "over",
    "under", "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my",
    "your", "his", "its", "our", "their", "this", "that", "these", "those", "is", "am", "are",
    "was", "were", "be", "been", "being", "do", "does", "did", "have", "has", "had", "will",
    "would", "shall", "should", "may", "might", "must", "can", "could", "not", "no",
];

impl ResourceSet {
    /// The dictionaries shipped with the binary.
    pub fn builtin() -> ResourceSet {
        let mut set = ResourceSet::default();
        set.load_confusables_str("confusables(builtin)", include_str!("../../resources/confusables.tsv"))
            .expect("builtin confusables parse");
        set.load_pairs_str(
            "misspellings(builtin)",
            include_str!("../../resources/misspellings.tsv"),
            Table::Misspellings,
        )
        .expect("builtin misspellings parse");
        set.load_pairs_str(
            "us_uk_spelling(builtin)",
            include_str!("../../resources/us_uk_spelling.tsv"),
            Table::UsUk,
        )
        .expect("builtin us/uk parse");
        set.load_synonyms_str("synonyms(builtin)", include_str!("../../resources/synonyms.tsv"))
            .expect("builtin synonyms parse");
        set.load_tagger_str("tagger_lexicon(builtin)", include_str!("../../resources/tagger_lexicon.tsv"))
            .expect("builtin tagger lexicon parse");
        set
    }

    pub fn load_confusables(&mut self, path: &Path) -> Result<()> {
        let raw = read(path)?;
        self.load_confusables_str(&path.display().to_string(), &raw)
    }

    pub fn load_misspellings(&mut self, path: &Path) -> Result<()> {
        let raw = read(path)?;
        self.load_pairs_str(&path.display().to_string(), &raw, Table::Misspellings)
    }

    pub fn load_us_uk(&mut self, path: &Path) -> Result<()> {
        let raw = read(path)?;
        self.load_pairs_str(&path.display().to_string(), &raw, Table::UsUk)
    }

    pub fn load_synonyms(&mut self, path: &Path) -> Result<()> {
        let raw = read(path)?;
        self.load_synonyms_str(&path.display().to_string(), &raw)
    }

    pub fn load_tagger(&mut self, path: &Path) -> Result<()> {
        let raw = read(path)?;
        self.load_tagger_str(&path.display().to_string(), &raw)
    }

    fn load_confusables_str(&mut self, name: &str, raw: &str) -> Result<()> {
        self.confusables.clear();
        self.confusables_reverse.clear();
        for (line, (left, right)) in two_columns(name, raw)? {
            let canonical = single_char(name, &left, line)?;
            let glyph = single_char(name, &right, line)?;
            if self.confusables.insert(canonical, glyph).is_some()
                || self.confusables_reverse.insert(glyph, canonical).is_some()
            {
                return Err(Error::MalformedResource {
                    name: name.into(),
                    line,
                    message: "confusables table must be a bijection".into(),
                });
            }
        }
        Ok(())
    }

    fn load_pairs_str(&mut self, name: &str, raw: &str, table: Table) -> Result<()> {
        let target = match table {
            Table::Misspellings => &mut self.misspellings,
            Table::UsUk => &mut self.us_uk,
        };
        target.clear();
        for (line, (left, right)) in two_columns(name, raw)? {
            if left == right {
                return Err(Error::MalformedResource {
                    name: name.into(),
                    line,
                    message: "mapped form must differ from the headword".into(),
                });
            }
            target.insert(left, right);
        }
        Ok(())
    }

    fn load_synonyms_str(&mut self, name: &str, raw: &str) -> Result<()> {
        self.synonyms.clear();
        for (idx, row) in raw.lines().enumerate() {
            if row.trim().is_empty() {
                continue;
            }
            let mut cols = row.split('\t');
            let (head, pos, list) = match (cols.next(), cols.next(), cols.next()) {
                (Some(h), Some(p), Some(l)) => (h, p, l),
                _ => {
                    return Err(Error::MalformedResource {
                        name: name.into(),
                        line: idx + 1,
                        message: "expected headword<TAB>pos<TAB>synonyms".into(),
                    })
                }
            };
            let pos = Pos::parse(name, pos, idx + 1)?;
            let synonyms: Vec<String> = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != head)
                .map(String::from)
                .collect();
            if synonyms.is_empty() {
                return Err(Error::MalformedResource {
                    name: name.into(),
                    line: idx + 1,
                    message: "headword needs at least one distinct synonym".into(),
                });
            }
            self.synonyms
                .insert(head.to_string(), SynonymEntry { pos, synonyms });
        }
        Ok(())
    }

    fn load_tagger_str(&mut self, name: &str, raw: &str) -> Result<()> {
        self.tagger.clear();
        for (line, (word, pos)) in two_columns(name, raw)? {
            let pos = Pos::parse(name, &pos, line)?;
            self.tagger.insert(word, pos);
        }
        Ok(())
    }

    /// Unigram rule-based tagger: closed-class filter, then the tagger
    /// lexicon, then suffix rules, defaulting to noun.
    pub fn tag(&self, token: &str) -> Option<Pos> {
        let lower = token.to_lowercase();
        if CLOSED_CLASS.contains(&lower.as_str()) {
            return None;
        }
        if let Some(pos) = self.tagger.get(&lower) {
            return Some(*pos);
        }
        Some(if lower.ends_with("ly") {
            Pos::Adv
        } else if lower.ends_with("ing")
            || lower.ends_with("ed")
            || lower.ends_with("ize")
            || lower.ends_with("ise")
        {
            Pos::Verb
        } else if lower.ends_with("ous")
            || lower.ends_with("ful")
            || lower.ends_with("ive")
            || lower.ends_with("able")
            || lower.ends_with("ible")
            || lower.ends_with("al")
            || lower.ends_with("ic")
        {
            Pos::Adj
        } else {
            Pos::Noun
        })
    }

    pub fn require_confusables(&self) -> Result<()> {
        if self.confusables.is_empty() {
            return Err(Error::MissingResource("confusables".into()));
        }
        Ok(())
    }

    pub fn require_misspellings(&self) -> Result<()> {
        if self.misspellings.is_empty() {
            return Err(Error::MissingResource("misspellings".into()));
        }
        Ok(())
    }

    pub fn require_us_uk(&self) -> Result<()> {
        if self.us_uk.is_empty() {
            return Err(Error::MissingResource("us_uk_spelling".into()));
        }
        Ok(())
    }

    pub fn require_synonyms(&self) -> Result<()> {
        if self.synonyms.is_empty() {
            return Err(Error::MissingResource("synonyms".into()));
        }
        Ok(())
    }
}

enum Table {
    Misspellings,
    UsUk,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn two_columns(name: &str, raw: &str) -> Result<Vec<(usize, (String, String))>> {
    let mut rows = Vec::new();
    for (idx, row) in raw.lines().enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        let (left, right) = row.split_once('\t').ok_or_else(|| Error::MalformedResource {
            name: name.into(),
            line: idx + 1,
            message: "expected two tab-separated columns".into(),
        })?;
        rows.push((idx + 1, (left.to_string(), right.to_string())));
    }
    Ok(rows)
}

fn single_char(name: &str, s: &str, line: usize) -> Result<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::MalformedResource {
            name: name.into(),
            line,
            message: format!("expected a single character, got `{s}`"),
        }),
    }
}
