use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::is_token_separator;

use super::vocab::Vocabulary;
use super::SubwordError;

/// Continuation marker appended to every non-final subword of a token.
pub const DEFAULT_MARKER: &str = "@@";

const HEADER_TAG: &str = "#mtforge-bpe";
const FORMAT_VERSION: u32 = 1;

/// Ordered merge list learned by [`super::bpe_learn`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    alphabet: BTreeSet<char>,
    marker: String,
    num_merges_requested: usize,
    symbol_ids: HashMap<String, u32>,
    ranks: HashMap<(u32, u32), u32>,
}

impl BpeModel {
    pub fn new(
        merges: Vec<(String, String)>,
        alphabet: BTreeSet<char>,
        num_merges_requested: usize,
    ) -> Result<Self, SubwordError> {
        Self::with_marker(merges, alphabet, num_merges_requested, DEFAULT_MARKER)
    }

    pub fn with_marker(
        merges: Vec<(String, String)>,
        alphabet: BTreeSet<char>,
        num_merges_requested: usize,
        marker: &str,
    ) -> Result<Self, SubwordError> {
        if merges.len() > num_merges_requested {
            return Err(SubwordError::InvalidModel(format!(
                "{} merges exceed the requested {}",
                merges.len(),
                num_merges_requested
            )));
        }
        if marker.is_empty() || marker.chars().any(char::is_whitespace) {
            return Err(SubwordError::InvalidModel(format!("bad marker {marker:?}")));
        }
        let mut symbol_ids: HashMap<String, u32> = HashMap::new();
        fn intern(ids: &mut HashMap<String, u32>, s: &str) -> u32 {
            let next = ids.len() as u32;
            *ids.entry(s.to_string()).or_insert(next)
        }
        for c in &alphabet {
            intern(&mut symbol_ids, c.encode_utf8(&mut [0; 4]));
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            if l.is_empty() || r.is_empty() || l.contains(is_token_separator) || r.contains(is_token_separator) {
                return Err(SubwordError::InvalidModel(format!(
                    "merge {} ({l:?}, {r:?}) has an empty or whitespace symbol",
                    rank + 1
                )));
            }
            let (Some(&a), Some(&b)) = (symbol_ids.get(l.as_str()), symbol_ids.get(r.as_str())) else {
                return Err(SubwordError::InvalidModel(format!(
                    "merge {} ({l:?}, {r:?}) uses a symbol not produced earlier",
                    rank + 1
                )));
            };
            intern(&mut symbol_ids, &format!("{l}{r}"));
            // A pair can only be learned once; keep the first rank.
            ranks.entry((a, b)).or_insert(rank as u32);
        }
        Ok(BpeModel {
            merges,
            alphabet,
            marker: marker.to_string(),
            num_merges_requested,
            symbol_ids,
            ranks,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn marker(&self) -> &str {
        &self.marker
    }

    pub fn num_merges_requested(&self) -> usize {
        self.num_merges_requested
    }

    /// Segments one token by repeatedly applying the lowest-ranked merge
    /// present, all of its occurrences left to right.
    pub fn segment_token(&self, token: &str) -> Vec<String> {
        let mut symbols: Vec<String> = token.chars().map(String::from).collect();
        if symbols.len() < 2 || self.ranks.is_empty() {
            return symbols;
        }
        let mut ids: Vec<Option<u32>> = symbols
            .iter()
            .map(|s| self.symbol_ids.get(s.as_str()).copied())
            .collect();
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) => self.ranks.get(&(a, b)).map(|&r| (r, a, b)),
                    _ => None,
                })
                .min();
            let Some((_, a, b)) = best else { break };
            let mut next_syms = Vec::with_capacity(symbols.len());
            let mut next_ids = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && ids[i] == Some(a) && ids[i + 1] == Some(b) {
                    let merged = format!("{}{}", symbols[i], symbols[i + 1]);
                    next_ids.push(self.symbol_ids.get(merged.as_str()).copied());
                    next_syms.push(merged);
                    i += 2;
                } else {
                    next_ids.push(ids[i]);
                    next_syms.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = next_syms;
            ids = next_ids;
            if symbols.len() < 2 {
                break;
            }
        }
        symbols
    }

    /// Segments a sentence. Separators between tokens are copied verbatim;
    /// subwords inside a token are joined by `<marker><space>`.
    ///
    /// With a vocabulary, any subword whose marked form is missing from it is
    /// split back into single characters.
    pub fn apply(&self, sentence: &str, vocab: Option<&Vocabulary>) -> String {
        let mut out = String::with_capacity(sentence.len() + sentence.len() / 2);
        let mut token_start: Option<usize> = None;
        for (i, c) in sentence.char_indices() {
            if is_token_separator(c) {
                if let Some(start) = token_start.take() {
                    self.push_segmented(&sentence[start..i], vocab, &mut out);
                }
                out.push(c);
            } else if token_start.is_none() {
                token_start = Some(i);
            }
        }
        if let Some(start) = token_start {
            self.push_segmented(&sentence[start..], vocab, &mut out);
        }
        out
    }

    fn push_segmented(&self, token: &str, vocab: Option<&Vocabulary>, out: &mut String) {
        let units = self.segment_token(token);
        let units = match vocab {
            Some(v) => self.restrict_to_vocab(units, v),
            None => units,
        };
        let last = units.len().saturating_sub(1);
        for (i, u) in units.iter().enumerate() {
            out.push_str(u);
            if i < last {
                out.push_str(&self.marker);
                out.push(' ');
            }
        }
    }

    fn restrict_to_vocab(&self, units: Vec<String>, vocab: &Vocabulary) -> Vec<String> {
        let n = units.len();
        let mut out = Vec::with_capacity(n);
        let mut key = String::new();
        for (i, unit) in units.into_iter().enumerate() {
            let is_final = i + 1 == n;
            key.clear();
            key.push_str(&unit);
            if !is_final {
                key.push_str(&self.marker);
            }
            if unit.chars().nth(1).is_none() || vocab.contains(&key) {
                out.push(unit);
            } else {
                out.extend(unit.chars().map(String::from));
            }
        }
        out
    }

    /// Inverse of [`BpeModel::apply`] on text that did not contain
    /// `<marker><space>` before segmentation.
    pub fn desegment(&self, segmented: &str) -> String {
        desegment_with(segmented, &self.marker)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{HEADER_TAG} version={FORMAT_VERSION} marker={} merges={}",
            self.marker, self.num_merges_requested
        );
        for (l, r) in &self.merges {
            let _ = writeln!(s, "{l} {r}");
        }
        s
    }

    /// Parses the model file format. The alphabet is not stored, so a loaded
    /// model's alphabet is the set of characters its merges use.
    pub fn from_text(text: &str) -> Result<Self, SubwordError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| SubwordError::InvalidModel("empty model file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(HEADER_TAG) {
            return Err(SubwordError::InvalidModel(format!("bad header {header:?}")));
        }
        let (mut version, mut marker, mut requested) = (None, None, None);
        for f in fields {
            match f.split_once('=') {
                Some(("version", v)) => version = v.parse::<u32>().ok(),
                Some(("marker", v)) => marker = Some(v.to_string()),
                Some(("merges", v)) => requested = v.parse::<usize>().ok(),
                _ => return Err(SubwordError::InvalidModel(format!("bad header field {f:?}"))),
            }
        }
        if version != Some(FORMAT_VERSION) {
            return Err(SubwordError::InvalidModel(format!(
                "unsupported model version in {header:?}"
            )));
        }
        let marker = marker.ok_or_else(|| SubwordError::InvalidModel("missing marker".into()))?;
        let mut merges = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (l, r) = line.split_once(' ').ok_or_else(|| {
                SubwordError::InvalidModel(format!("line {}: expected `left right`", i + 2))
            })?;
            merges.push((l.to_string(), r.to_string()));
        }
        let requested = requested.unwrap_or(merges.len());
        let alphabet = merges
            .iter()
            .flat_map(|(l, r)| l.chars().chain(r.chars()))
            .collect();
        BpeModel::with_marker(merges, alphabet, requested, &marker)
    }

    pub fn save(&self, path: &Path) -> Result<(), SubwordError> {
        std::fs::write(path, self.to_text()).map_err(|e| SubwordError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, SubwordError> {
        let text = std::fs::read_to_string(path).map_err(|e| SubwordError::io(path, e))?;
        Self::from_text(&text)
    }
}

pub fn desegment_with(segmented: &str, marker: &str) -> String {
    let mut pattern = String::with_capacity(marker.len() + 1);
    pattern.push_str(marker);
    pattern.push(' ');
    segmented.replace(&pattern, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(merges: &[(&str, &str)], alphabet: &str) -> BpeModel {
        BpeModel::new(
            merges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            alphabet.chars().collect(),
            merges.len(),
        )
        .unwrap()
    }

    #[test]
    fn apply_single_merge() {
        let m = model(&[("u", "g")], "hugps");
        assert_eq!(m.apply("hug", None), "h@@ ug");
        assert_eq!(m.apply("pug hugs", None), "p@@ ug h@@ ug@@ s");
        assert_eq!(m.apply("h", None), "h");
    }

    #[test]
    fn empty_model_splits_characters() {
        let m = model(&[], "");
        assert_eq!(m.apply("hug  ab", None), "h@@ u@@ g  a@@ b");
        assert_eq!(m.desegment(&m.apply("hug  ab", None)), "hug  ab");
    }

    #[test]
    fn separators_are_preserved() {
        let m = model(&[("a", "b")], "ab");
        assert_eq!(m.apply(" ab\tab  c ", None), " ab\tab  c ");
        assert_eq!(m.apply("", None), "");
    }

    #[test]
    fn desegment_examples() {
        let m = model(&[], "");
        assert_eq!(m.desegment("h@@ ug"), "hug");
        assert_eq!(m.desegment("hello world"), "hello world");
    }

    #[test]
    fn lowest_rank_first() {
        // "abc": (b,c) has rank 0, so (a,b) never applies
        let m = model(&[("b", "c"), ("a", "b")], "abc");
        assert_eq!(m.segment_token("abc"), ["a", "bc"]);
        assert_eq!(m.segment_token("abab"), ["ab", "ab"]);
    }

    #[test]
    fn overlapping_pairs_merge_left_to_right() {
        let m = model(&[("a", "a")], "a");
        assert_eq!(m.segment_token("aaa"), ["aa", "a"]);
        assert_eq!(m.segment_token("aaaa"), ["aa", "aa"]);
    }

    #[test]
    fn unknown_characters_pass_through() {
        let m = model(&[("a", "b")], "ab");
        assert_eq!(m.segment_token("xaby"), ["x", "ab", "y"]);
    }

    #[test]
    fn invalid_models() {
        let bad = BpeModel::new(vec![("a".into(), "zz".into())], "a".chars().collect(), 1);
        assert!(matches!(bad, Err(SubwordError::InvalidModel(_))));
        let too_many = BpeModel::new(vec![("a".into(), "a".into())], "a".chars().collect(), 0);
        assert!(too_many.is_err());
    }

    #[test]
    fn file_round_trip() {
        let m = model(&[("u", "g"), ("h", "ug"), ("hug", "s")], "hugs");
        let text = m.to_text();
        assert!(text.starts_with("#mtforge-bpe version=1 marker=@@ merges=3\n"));
        let back = BpeModel::from_text(&text).unwrap();
        assert_eq!(back.merges(), m.merges());
        assert_eq!(back.apply("hugs pug", None), m.apply("hugs pug", None));
        assert!(BpeModel::from_text("#mtforge-bpe version=9 marker=@@\n").is_err());
        assert!(BpeModel::from_text("garbage\n").is_err());
    }

    #[test]
    fn vocabulary_restriction() {
        let m = model(&[("u", "g"), ("h", "ug")], "hugp");
        // "hug" is frequent, "p@@" and "ug" are rare
        let vocab = Vocabulary::from_counts([("hug", 20), ("h@@", 15), ("ug", 3), ("p@@", 2)], 10);
        assert_eq!(m.apply("hug", Some(&vocab)), "hug");
        assert_eq!(m.apply("pug", Some(&vocab)), "p@@ u@@ g");
    }
}
