//! Devanagari to Gujarati transliteration and token overlap statistics.
//!
//! The two blocks share a layout: a Gujarati character sits at its Devanagari
//! counterpart + 0x180. Devanagari has more assigned characters, and those
//! without a Gujarati slot (danda, nukta letters, ...) are copied through.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::clean::filters::is_letter;
use crate::corpus::tokens;

pub const DEVANAGARI: (u32, u32) = (0x0900, 0x097F);
pub const GUJARATI: (u32, u32) = (0x0A80, 0x0AFF);
pub const BLOCK_OFFSET: u32 = 0x180;

const SHIPPED_TABLE: &str = include_str!("../data/hi2gu.txt");

#[derive(Debug, thiserror::Error)]
pub enum TranslitError {
    #[error("table line {line}: {message}")]
    InvalidTable { line: usize, message: String },
    #[error("line count mismatch: {hg} transliterated lines vs {reference} reference lines")]
    LineCountMismatch { hg: usize, reference: usize },
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn in_block(c: u32, block: (u32, u32)) -> bool {
    block.0 <= c && c <= block.1
}

fn is_assigned(c: char) -> bool {
    get_general_category(c) != GeneralCategory::Unassigned
}

/// Devanagari codepoint to Gujarati codepoint. Unmapped codepoints are
/// copied through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransliterationTable {
    map: [Option<char>; 128],
}

impl TransliterationTable {
    pub fn from_pairs<I: IntoIterator<Item = (char, char)>>(pairs: I) -> Result<Self, TranslitError> {
        Self::build(pairs.into_iter().enumerate().map(|(i, (s, t))| (i + 1, s, t)))
    }

    /// `entries` carry the line number reported on error.
    fn build<I: Iterator<Item = (usize, char, char)>>(entries: I) -> Result<Self, TranslitError> {
        let mut map = [None; 128];
        let mut targets: HashMap<char, char> = HashMap::new();
        for (line, src, tgt) in entries {
            let err = |message: String| TranslitError::InvalidTable { line, message };
            if !in_block(src as u32, DEVANAGARI) {
                return Err(err(format!("U+{:04X} is not Devanagari", src as u32)));
            }
            if !in_block(tgt as u32, GUJARATI) || !is_assigned(tgt) {
                return Err(err(format!(
                    "U+{:04X} is not an assigned Gujarati character",
                    tgt as u32
                )));
            }
            let slot = &mut map[(src as u32 - DEVANAGARI.0) as usize];
            if slot.is_some() {
                return Err(err(format!("U+{:04X} mapped twice", src as u32)));
            }
            if let Some(prev) = targets.insert(tgt, src) {
                return Err(err(format!(
                    "U+{:04X} is the target of both U+{:04X} and U+{:04X}",
                    tgt as u32, prev as u32, src as u32
                )));
            }
            *slot = Some(tgt);
        }
        Ok(TransliterationTable { map })
    }

    /// Parses `U+XXXX U+YYYY` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, TranslitError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| TranslitError::InvalidTable {
                line: i + 1,
                message: message.to_string(),
            };
            let mut fields = line.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err("expected `U+XXXX U+YYYY`"));
            };
            let parse = |f: &str| {
                f.strip_prefix("U+")
                    .and_then(|h| u32::from_str_radix(h, 16).ok())
                    .and_then(char::from_u32)
            };
            match (parse(a), parse(b)) {
                (Some(s), Some(t)) => pairs.push((i + 1, s, t)),
                _ => return Err(err("malformed codepoint")),
            }
        }
        Self::build(pairs.into_iter())
    }

    pub fn load(path: &Path) -> Result<Self, TranslitError> {
        let text = std::fs::read_to_string(path).map_err(|source| TranslitError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .map(|(s, t)| format!("U+{:04X} U+{:04X}\n", s as u32, t as u32))
            .collect()
    }

    pub fn get(&self, c: char) -> Option<char> {
        let cp = c as u32;
        if in_block(cp, DEVANAGARI) {
            self.map[(cp - DEVANAGARI.0) as usize]
        } else {
            None
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.map.iter().enumerate().filter_map(|(i, t)| {
            t.map(|t| (char::from_u32(DEVANAGARI.0 + i as u32).expect("block codepoint"), t))
        })
    }

    pub fn len(&self) -> usize {
        self.map.iter().filter(|t| t.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gujarati to Devanagari over the mapped subset.
    pub fn reverse(&self) -> HashMap<char, char> {
        self.entries().map(|(s, t)| (t, s)).collect()
    }
}

/// The table shipped with the crate.
pub fn build_table() -> TransliterationTable {
    TransliterationTable::from_text(SHIPPED_TABLE).expect("shipped table is valid")
}

/// Derives the table from the Unicode database at runtime: every assigned
/// Devanagari codepoint whose +0x180 counterpart is assigned.
pub fn table_by_offset() -> TransliterationTable {
    let pairs = (DEVANAGARI.0..=DEVANAGARI.1).filter_map(|cp| {
        let src = char::from_u32(cp)?;
        let tgt = char::from_u32(cp + BLOCK_OFFSET)?;
        (is_assigned(src) && is_assigned(tgt)).then_some((src, tgt))
    });
    TransliterationTable::from_pairs(pairs).expect("offset map is injective")
}

pub fn transliterate(sentence: &str, table: &TransliterationTable) -> String {
    sentence.chars().map(|c| table.get(c).unwrap_or(c)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OverlapStats {
    pub total_tokens: u64,
    pub exact_matches: u64,
    pub match_fraction: f64,
    pub excluded_punctuation: u64,
    pub excluded_latin: u64,
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Punctuation,
    Latin,
    Other,
}

/// Punctuation: only P* characters. Latin: at least one letter, and every
/// letter is Basic Latin.
pub fn classify_token(token: &str) -> TokenClass {
    if token.chars().all(is_punctuation) {
        return TokenClass::Punctuation;
    }
    let mut letters = token.chars().filter(|&c| is_letter(c)).peekable();
    if letters.peek().is_some() && letters.all(|c| c.is_ascii()) {
        return TokenClass::Latin;
    }
    TokenClass::Other
}

/// Fraction of transliterated tokens (punctuation and Latin words excluded)
/// found in the aligned reference sentence. Matching is multiset-based: each
/// reference token occurrence can be matched once.
pub fn overlap_stats<A: AsRef<str>, B: AsRef<str>>(
    hg: &[A],
    reference: &[B],
) -> Result<OverlapStats, TranslitError> {
    if hg.len() != reference.len() {
        return Err(TranslitError::LineCountMismatch {
            hg: hg.len(),
            reference: reference.len(),
        });
    }
    let mut stats = OverlapStats::default();
    let mut bag: HashMap<&str, u32> = HashMap::new();
    for (h, r) in hg.iter().zip(reference) {
        bag.clear();
        for t in tokens(r.as_ref()) {
            *bag.entry(t).or_insert(0) += 1;
        }
        for t in tokens(h.as_ref()) {
            match classify_token(t) {
                TokenClass::Punctuation => stats.excluded_punctuation += 1,
                TokenClass::Latin => stats.excluded_latin += 1,
                TokenClass::Other => {
                    stats.total_tokens += 1;
                    if let Some(n) = bag.get_mut(t).filter(|n| **n > 0) {
                        *n -= 1;
                        stats.exact_matches += 1;
                    }
                }
            }
        }
    }
    stats.match_fraction = if stats.total_tokens == 0 {
        0.0
    } else {
        stats.exact_matches as f64 / stats.total_tokens as f64
    };
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shipped_table_matches_offset_rule() {
        let shipped = build_table();
        assert_eq!(shipped, table_by_offset());
        assert_eq!(shipped.len(), 91);
    }

    #[test]
    fn ka_and_danda() {
        let t = build_table();
        assert_eq!(t.get('क'), Some('ક'));
        assert_eq!(t.get('\u{0964}'), None);
        assert_eq!(transliterate("क।", &t), "ક।");
        // nukta letter with no precomposed Gujarati form
        assert_eq!(t.get('\u{0929}'), None);
    }

    #[test]
    fn transliterate_examples() {
        let t = build_table();
        assert_eq!(transliterate("hello world", &t), "hello world");
        assert_eq!(transliterate("નમસ્તે", &t), "નમસ્તે");
        assert_eq!(transliterate("क 123", &t), "ક 123");
        assert_eq!(transliterate("नमस्ते", &t), "નમસ્તે");
    }

    #[test]
    fn table_validation() {
        assert!(TransliterationTable::from_text("U+0915 U+0A95\nU+0916 U+0A95\n").is_err());
        assert!(TransliterationTable::from_text("U+0915 U+0A95\nU+0915 U+0A96\n").is_err());
        // U+0AE4 is unassigned
        assert!(TransliterationTable::from_text("U+0964 U+0AE4\n").is_err());
        assert!(TransliterationTable::from_text("U+0041 U+0A95\n").is_err());
        assert!(TransliterationTable::from_text("U+0915\n").is_err());
        let t = TransliterationTable::from_text("# c\n\nU+0915 U+0A95 # ka\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(TransliterationTable::from_text(&build_table().to_text()).unwrap(), build_table());
    }

    #[test]
    fn token_classes() {
        assert_eq!(classify_token("।"), TokenClass::Punctuation);
        assert_eq!(classify_token("..."), TokenClass::Punctuation);
        assert_eq!(classify_token("NASA"), TokenClass::Latin);
        assert_eq!(classify_token("e-mail"), TokenClass::Latin);
        assert_eq!(classify_token("123"), TokenClass::Other);
        assert_eq!(classify_token("ભારત"), TokenClass::Other);
    }

    #[test]
    fn overlap_examples() {
        let a = ["ભારત એક દેશ", "હું"];
        assert_eq!(overlap_stats(&a, &a).unwrap().match_fraction, 1.0);
        let b = ["x y z", "w"];
        assert_eq!(overlap_stats(&a, &b).unwrap().match_fraction, 0.0);
        // 4 tokens: one Latin (excluded), one match out of the remaining 3
        let hg = ["ભારત NASA દેશ મા"];
        let gu = ["ભારત દેશો માં"];
        let s = overlap_stats(&hg, &gu).unwrap();
        assert_eq!((s.exact_matches, s.total_tokens, s.excluded_latin), (1, 3, 1));
        assert!((s.match_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            overlap_stats(&hg, &b),
            Err(TranslitError::LineCountMismatch { .. })
        ));
    }

    #[test]
    fn bag_semantics() {
        let s = overlap_stats(&["ક ક ક"], &["ક"]).unwrap();
        assert_eq!(s.exact_matches, 1);
        assert_eq!(s.total_tokens, 3);
    }

    fn devanagari_text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                (0x0900u32..=0x097F).prop_map(|c| char::from_u32(c).unwrap()),
                Just(' '),
                prop::char::range('a', 'z'),
                (0x0A80u32..=0x0AFF).prop_map(|c| char::from_u32(c).unwrap()),
            ],
            0..40,
        )
        .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn idempotent_and_length_preserving(s in devanagari_text()) {
            let t = build_table();
            let once = transliterate(&s, &t);
            prop_assert_eq!(transliterate(&once, &t), once.clone());
            prop_assert_eq!(once.chars().count(), s.chars().count());
        }
    }

    #[test]
    fn reverse_composes_to_identity() {
        let t = build_table();
        let rev = t.reverse();
        for (s, g) in t.entries() {
            assert_eq!(rev[&t.get(s).unwrap()], s);
            assert_eq!(g as u32, s as u32 + BLOCK_OFFSET);
        }
    }
}
