//! The eleven adversarial attacks: deterministic, seeded, budgeted text
//! mutations over an explicitly enumerated attack surface, plus the
//! defense-side normalizer.
//!
//! Every attack follows the same shape: enumerate all eligible mutation
//! sites, compute the budget from the attack fraction theta, pick that
//! many sites with a seeded uniform draw, and apply the mutations
//! right-to-left so earlier spans stay valid. The selection is the prefix
//! of a seeded permutation, so a larger theta always selects a superset
//! of a smaller one under the same seed.

pub mod normalize;
pub mod paraphrase;
pub mod resources;
pub mod sites;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use normalize::normalize;
pub use paraphrase::ParaphraseProvider;
pub use resources::ResourceSet;
pub use sites::{enumerate_sites, MutationSite};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    AlternativeSpelling,
    ArticleDeletion,
    Homoglyph,
    InsertParagraphs,
    NumberSwap,
    Paraphrase,
    Misspelling,
    Synonym,
    UpperLowerSwap,
    Whitespace,
    ZeroWidthSpace,
}

impl AttackKind {
    pub const ALL: [AttackKind; 11] = [
        AttackKind::AlternativeSpelling,
        AttackKind::ArticleDeletion,
        AttackKind::Homoglyph,
        AttackKind::InsertParagraphs,
        AttackKind::NumberSwap,
        AttackKind::Paraphrase,
        AttackKind::Misspelling,
        AttackKind::Synonym,
        AttackKind::UpperLowerSwap,
        AttackKind::Whitespace,
        AttackKind::ZeroWidthSpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::AlternativeSpelling => "alternative_spelling",
            AttackKind::ArticleDeletion => "article_deletion",
            AttackKind::Homoglyph => "homoglyph",
            AttackKind::InsertParagraphs => "insert_paragraphs",
            AttackKind::NumberSwap => "number_swap",
            AttackKind::Paraphrase => "paraphrase",
            AttackKind::Misspelling => "misspelling",
            AttackKind::Synonym => "synonym",
            AttackKind::UpperLowerSwap => "upper_lower_swap",
            AttackKind::Whitespace => "whitespace",
            AttackKind::ZeroWidthSpace => "zero_width_space",
        }
    }

    pub fn from_name(name: &str) -> Option<AttackKind> {
        AttackKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Default attack fraction per kind.
    pub fn default_theta(self) -> f64 {
        match self {
            AttackKind::AlternativeSpelling => 1.00,
            AttackKind::ArticleDeletion => 0.50,
            AttackKind::Homoglyph => 1.00,
            AttackKind::InsertParagraphs => 0.50,
            AttackKind::NumberSwap => 0.50,
            AttackKind::Paraphrase => 1.00,
            AttackKind::Misspelling => 0.20,
            AttackKind::Synonym => 0.50,
            AttackKind::UpperLowerSwap => 0.05,
            AttackKind::Whitespace => 0.20,
            AttackKind::ZeroWidthSpace => 1.00,
        }
    }

    /// Attacks that the normalizer undoes exactly (modulo the normalizer's
    /// own canonicalization of the source).
    pub fn is_normalizable(self) -> bool {
        matches!(
            self,
            AttackKind::ZeroWidthSpace
                | AttackKind::Homoglyph
                | AttackKind::Whitespace
                | AttackKind::InsertParagraphs
        )
    }
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub theta: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, theta: f64, seed: u64) -> Result<AttackSpec> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Config(format!(
                "theta {theta} outside [0, 1] for attack {kind}"
            )));
        }
        Ok(AttackSpec { kind, theta, seed })
    }

    pub fn with_default_theta(kind: AttackKind, seed: u64) -> AttackSpec {
        AttackSpec {
            kind,
            theta: kind.default_theta(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub text: String,
    pub total_sites: usize,
    pub mutated_sites: usize,
    pub chosen_indices: Vec<usize>,
    pub spec: AttackSpec,
}

/// Round-half-up of `theta * total_sites`, clamped to the surface, with a
/// floor of one whenever theta is nonzero and any site exists.
pub fn budget(theta: f64, total_sites: usize) -> usize {
    if total_sites == 0 {
        return 0;
    }
    let raw = (theta * total_sites as f64 + 0.5).floor() as usize;
    let clamped = raw.min(total_sites);
    if theta > 0.0 && clamped == 0 {
        1
    } else {
        clamped
    }
}

/// Seeds a ChaCha20 generator from the attack seed and a SHA-256 digest of
/// the text, so per-document draws are independent and replayable.
fn site_rng(seed: u64, text: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    ChaCha20Rng::from_seed(digest.into())
}

/// Uniform sample without replacement of size `budget(theta, n)`: the
/// prefix of a seeded Fisher-Yates permutation, returned sorted.
pub fn select_sites(total_sites: usize, theta: f64, seed: u64, text: &str) -> Vec<usize> {
    let take = budget(theta, total_sites);
    let mut order: Vec<usize> = (0..total_sites).collect();
    order.shuffle(&mut site_rng(seed, text));
    let mut chosen: Vec<usize> = order.into_iter().take(take).collect();
    chosen.sort_unstable();
    chosen
}

/// Derives a per-document seed from the master seed and the document id.
pub fn document_seed(master_seed: u64, doc_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(doc_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Applies one attack to one text. Pure in (spec, text, resources,
/// provider); mutations are applied right-to-left.
pub fn apply_attack(
    spec: &AttackSpec,
    text: &str,
    resources: &ResourceSet,
    provider: &ParaphraseProvider,
) -> Result<AttackResult> {
    let mut sites = enumerate_sites(spec.kind, text, resources)?;
    let total_sites = sites.len();

    // Same draw as `select_sites`; replacement randomization for
    // number_swap/synonym continues the stream, in ascending site order.
    let mut rng = site_rng(spec.seed, text);
    let mut order: Vec<usize> = (0..total_sites).collect();
    order.shuffle(&mut rng);
    let take = budget(spec.theta, total_sites);
    let mut chosen: Vec<usize> = order.into_iter().take(take).collect();
    chosen.sort_unstable();
    for &idx in &chosen {
        match spec.kind {
            AttackKind::NumberSwap => {
                let site = &mut sites[idx];
                site.replacement = swap_digits(&site.replacement, &mut rng);
            }
            AttackKind::Synonym => {
                let site = &mut sites[idx];
                let original: String = text
                    .chars()
                    .skip(site.start)
                    .take(site.end - site.start)
                    .collect();
                let lower = original.to_lowercase();
                if let Some(entry) = resources.synonyms.get(&lower) {
                    let pick = rng.gen_range(0..entry.synonyms.len());
                    site.replacement = sites::match_case(&original, &entry.synonyms[pick]);
                }
            }
            AttackKind::Paraphrase => {
                sites[idx].replacement = provider.paraphrase(text, resources)?;
            }
            _ => {}
        }
    }

    let chars: Vec<char> = text.chars().collect();
    let mut out_chars = chars;
    for &idx in chosen.iter().rev() {
        let site = &sites[idx];
        out_chars.splice(site.start..site.end, site.replacement.chars());
    }

    Ok(AttackResult {
        text: out_chars.into_iter().collect(),
        total_sites,
        mutated_sites: chosen.len(),
        chosen_indices: chosen,
        spec: spec.clone(),
    })
}

/// Replaces each digit with a uniformly drawn different digit, keeping
/// proper leading zeros (zeros with only zeros before them and at least
/// one digit after) in place.
fn swap_digits(run: &str, rng: &mut ChaCha20Rng) -> String {
    let digits: Vec<char> = run.chars().collect();
    let n = digits.len();
    let mut out = String::with_capacity(n);
    let mut in_leading_zeros = true;
    for (i, &d) in digits.iter().enumerate() {
        let is_leading_zero = in_leading_zeros && d == '0' && i + 1 < n;
        if d != '0' {
            in_leading_zeros = false;
        }
        if is_leading_zero {
            out.push('0');
        } else {
            let old = d.to_digit(10).expect("digit");
            let pick = rng.gen_range(0..9u32);
            let new = if pick >= old { pick + 1 } else { pick };
            out.push(char::from_digit(new, 10).expect("digit"));
        }
    }
    out
}
