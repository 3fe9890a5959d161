//! Attack-surface enumeration: every eligible mutation site for each
//! attack kind, as non-overlapping sorted spans over Unicode scalar
//! indices.
//!
//! Word tokens are maximal runs of alphanumeric scalar values; everything
//! else (whitespace, punctuation) separates tokens. All spans index by
//! scalar value, never by byte, so selections replay identically across
//! platforms.

use crate::attack::resources::ResourceSet;
use crate::attack::AttackKind;
use crate::error::Result;

/// Half-open span of Unicode scalar indices plus its replacement text.
/// An empty replacement deletes the span; a zero-width span inserts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationSite {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

impl MutationSite {
    fn new(start: usize, end: usize, replacement: impl Into<String>) -> Self {
        MutationSite {
            start,
            end,
            replacement: replacement.into(),
        }
    }
}

/// Word tokens with scalar-index spans. `chars` is the pre-split scalar
/// sequence of the same text.
pub fn word_tokens(text: &str) -> Vec<(usize, usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            tokens.push((start, i, chars[start..i].iter().collect()));
        } else {
            i += 1;
        }
    }
    tokens
}

const TERMINAL_PUNCT: [char; 3] = ['.', '!', '?'];

pub fn is_terminal_punct(c: char) -> bool {
    TERMINAL_PUNCT.contains(&c)
}

/// Copies the casing shape of `original` onto `replacement`: ALL-CAPS
/// stays all-caps, Initial-capital stays capitalized, anything else is
/// passed through lowercase-as-stored.
pub fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().map_or(false, |c| c.is_uppercase());
    let all_upper = original.chars().filter(|c| c.is_alphabetic()).count() > 1
        && original
            .chars()
            .filter(|c| c.is_alphabetic())
            .all(|c| c.is_uppercase());
    if all_upper {
        replacement.to_uppercase()
    } else if first_upper {
        let mut out = String::with_capacity(replacement.len());
        let mut rest = replacement.chars();
        if let Some(c) = rest.next() {
            out.extend(c.to_uppercase());
        }
        out.extend(rest);
        out
    } else {
        replacement.to_string()
    }
}

pub fn enumerate_sites(
    kind: AttackKind,
    text: &str,
    resources: &ResourceSet,
) -> Result<Vec<MutationSite>> {
    let chars: Vec<char> = text.chars().collect();
    let sites = match kind {
        AttackKind::AlternativeSpelling => {
            resources.require_us_uk()?;
            mapped_token_sites(text, |lower| resources.us_uk.get(lower))
        }
        AttackKind::Misspelling => {
            resources.require_misspellings()?;
            mapped_token_sites(text, |lower| resources.misspellings.get(lower))
        }
        AttackKind::ArticleDeletion => article_sites(&chars, text),
        AttackKind::Homoglyph => {
            resources.require_confusables()?;
            chars
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    resources
                        .confusables
                        .get(c)
                        .map(|glyph| MutationSite::new(i, i + 1, glyph.to_string()))
                })
                .collect()
        }
        AttackKind::InsertParagraphs => paragraph_sites(&chars),
        AttackKind::NumberSwap => digit_run_sites(&chars),
        AttackKind::Paraphrase => {
            if chars.is_empty() {
                Vec::new()
            } else {
                // Whole document; the replacement comes from the provider.
                vec![MutationSite::new(0, chars.len(), text.to_string())]
            }
        }
        AttackKind::Synonym => {
            resources.require_synonyms()?;
            word_tokens(text)
                .into_iter()
                .filter_map(|(start, end, token)| {
                    let lower = token.to_lowercase();
                    let entry = resources.synonyms.get(&lower)?;
                    if resources.tag(&token)? != entry.pos {
                        return None;
                    }
                    // Placeholder replacement; the applier picks a seeded
                    // synonym from the same entry.
                    let first = entry.synonyms.first()?;
                    Some(MutationSite::new(start, end, match_case(&token, first)))
                })
                .collect()
        }
        AttackKind::UpperLowerSwap => chars
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                if c.is_uppercase() {
                    Some(MutationSite::new(i, i + 1, c.to_lowercase().to_string()))
                } else if c.is_lowercase() {
                    Some(MutationSite::new(i, i + 1, c.to_uppercase().to_string()))
                } else {
                    None
                }
            })
            .collect(),
        AttackKind::Whitespace => whitespace_sites(&chars, text),
        AttackKind::ZeroWidthSpace => {
            let mut sites = Vec::new();
            for i in 1..chars.len() {
                if !chars[i - 1].is_whitespace() && !chars[i].is_whitespace() {
                    sites.push(MutationSite::new(i, i, "\u{200B}"));
                }
            }
            sites
        }
    };
    debug_assert!(sites.windows(2).all(|w| w[0].end <= w[1].start));
    Ok(sites)
}

fn mapped_token_sites<'a, F>(text: &str, lookup: F) -> Vec<MutationSite>
where
    F: Fn(&str) -> Option<&'a String>,
{
    word_tokens(text)
        .into_iter()
        .filter_map(|(start, end, token)| {
            let lower = token.to_lowercase();
            let mapped = lookup(&lower)?;
            let replacement = match_case(&token, mapped);
            if replacement == token {
                return None;
            }
            Some(MutationSite::new(start, end, replacement))
        })
        .collect()
}

/// Standalone `a`/`an`/`the` (case-insensitive); the deletion swallows one
/// adjacent space, preferring the trailing one.
fn article_sites(chars: &[char], text: &str) -> Vec<MutationSite> {
    let mut sites: Vec<MutationSite> = Vec::new();
    for (start, end, token) in word_tokens(text) {
        let lower = token.to_lowercase();
        if !matches!(lower.as_str(), "a" | "an" | "the") {
            continue;
        }
        let prev_end = sites.last().map_or(0, |s| s.end);
        let site = if chars.get(end) == Some(&' ') {
            MutationSite::new(start, end + 1, "")
        } else if start > 0 && chars.get(start - 1) == Some(&' ') && start - 1 >= prev_end {
            MutationSite::new(start - 1, end, "")
        } else {
            MutationSite::new(start, end, "")
        };
        sites.push(site);
    }
    sites
}

/// Whitespace runs that follow terminal punctuation become paragraph
/// breaks. Runs already equal to exactly two newlines are not sites: the
/// mutation would be a no-op.
fn paragraph_sites(chars: &[char]) -> Vec<MutationSite> {
    let mut sites = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if is_terminal_punct(chars[i]) {
            let run_start = i + 1;
            let mut j = run_start;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j > run_start {
                let run: String = chars[run_start..j].iter().collect();
                if run != "\n\n" {
                    sites.push(MutationSite::new(run_start, j, "\n\n"));
                }
                i = j;
                continue;
            }
        }
        i += 1;
    }
    sites
}

/// Maximal ASCII digit runs. The stored replacement is a placeholder;
/// the applier rewrites each non-leading-zero digit with a seeded,
/// different digit.
fn digit_run_sites(chars: &[char]) -> Vec<MutationSite> {
    let mut sites = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let run: String = chars[start..i].iter().collect();
            sites.push(MutationSite::new(start, i, run));
        } else {
            i += 1;
        }
    }
    sites
}

/// One insertion site per inter-token gap that contains at least one
/// space character; inserting into an existing space run keeps the
/// mutation reversible by space-collapsing normalization.
fn whitespace_sites(chars: &[char], text: &str) -> Vec<MutationSite> {
    let tokens = word_tokens(text);
    let mut sites = Vec::new();
    for pair in tokens.windows(2) {
        let gap_start = pair[0].1;
        let gap_end = pair[1].0;
        if let Some(offset) = chars[gap_start..gap_end].iter().position(|&c| c == ' ') {
            let at = gap_start + offset;
            sites.push(MutationSite::new(at, at, " "));
        }
    }
    sites
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resources() -> ResourceSet {
        ResourceSet::builtin()
    }

    #[test]
    fn article_deletion_hand_enumeration() {
        let sites =
            enumerate_sites(AttackKind::ArticleDeletion, "the cat saw a dog", &resources()).unwrap();
        assert_eq!(sites.len(), 2);
        // "the " and "a " with trailing-space deletion
        assert_eq!((sites[0].start, sites[0].end), (0, 4));
        assert_eq!((sites[1].start, sites[1].end), (12, 14));
        assert!(sites.iter().all(|s| s.replacement.is_empty()));
    }

    #[test]
    fn number_swap_no_digits_no_sites() {
        let sites = enumerate_sites(AttackKind::NumberSwap, "no digits here", &resources()).unwrap();
        assert!(sites.is_empty());
    }

    #[test]
    fn zero_width_space_between_nonwhitespace() {
        let sites = enumerate_sites(AttackKind::ZeroWidthSpace, "hi", &resources()).unwrap();
        assert_eq!(sites.len(), 1);
        assert_eq!((sites[0].start, sites[0].end), (1, 1));
        let sites = enumerate_sites(AttackKind::ZeroWidthSpace, "hi there", &resources()).unwrap();
        assert_eq!(sites.len(), 5);
    }

    #[test]
    fn homoglyph_sites_cover_mapped_chars() {
        let sites = enumerate_sites(AttackKind::Homoglyph, "paid", &resources()).unwrap();
        assert_eq!(sites.len(), 4);
    }

    #[test]
    fn case_matching() {
        assert_eq!(match_case("Color", "colour"), "Colour");
        assert_eq!(match_case("COLOR", "colour"), "COLOUR");
        assert_eq!(match_case("color", "colour"), "colour");
    }

    #[test]
    fn insert_paragraph_site_skips_existing_breaks() {
        let sites =
            enumerate_sites(AttackKind::InsertParagraphs, "One. Two.\n\nThree. End", &resources())
                .unwrap();
        // "One. " and "Three. " qualify; the "\n\n" after "Two." is already
        // a paragraph break.
        assert_eq!(sites.len(), 2);
    }

    #[test]
    fn synonym_sites_respect_pos() {
        // "happy" is an adjective with lexicon synonyms.
        let sites = enumerate_sites(AttackKind::Synonym, "a happy dog", &resources()).unwrap();
        assert_eq!(sites.len(), 1);
        assert_eq!((sites[0].start, sites[0].end), (2, 7));
    }
}
