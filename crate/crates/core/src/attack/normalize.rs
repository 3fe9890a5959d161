//! Defense-side text normalization.
//!
//! Undoes the purely presentational attacks before scoring: zero-width
//! code points are stripped, confusable glyphs are mapped back to their
//! basic-Latin canonical forms, whitespace after sentence-terminal
//! punctuation is flattened to a single space, space runs collapse to one
//! space, and three or more consecutive newlines collapse to two.
//! The whole pipeline is idempotent.

use crate::attack::resources::ResourceSet;
use crate::attack::sites::is_terminal_punct;

const ZERO_WIDTH: [char; 5] = ['\u{200B}', '\u{200C}', '\u{200D}', '\u{FEFF}', '\u{2060}'];

pub fn normalize(text: &str, resources: &ResourceSet) -> String {
    // Strip zero-width code points and unmap confusables in one pass.
    let cleaned: Vec<char> = text
        .chars()
        .filter(|c| !ZERO_WIDTH.contains(c))
        .map(|c| resources.confusables_reverse.get(&c).copied().unwrap_or(c))
        .collect();

    // Flatten whitespace runs that follow terminal punctuation.
    let mut flattened: Vec<char> = Vec::with_capacity(cleaned.len());
    let mut i = 0;
    while i < cleaned.len() {
        flattened.push(cleaned[i]);
        if is_terminal_punct(cleaned[i]) {
            let mut j = i + 1;
            while j < cleaned.len() && cleaned[j].is_whitespace() {
                j += 1;
            }
            if j > i + 1 {
                flattened.push(' ');
                i = j;
                continue;
            }
        }
        i += 1;
    }

    // Collapse space runs to one space, newline runs of three or more to two.
    let mut out = String::with_capacity(flattened.len());
    let mut spaces = 0usize;
    let mut newlines = 0usize;
    for &c in &flattened {
        match c {
            ' ' => {
                spaces += 1;
                newlines = 0;
                if spaces == 1 {
                    out.push(' ');
                }
            }
            '\n' => {
                newlines += 1;
                spaces = 0;
                if newlines <= 2 {
                    out.push('\n');
                }
            }
            _ => {
                spaces = 0;
                newlines = 0;
                out.push(c);
            }
        }
    }
    out
}
