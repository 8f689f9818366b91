//! Pure per-pair predicates. Every boundary keeps: a rule fires only on the
//! strict side of its threshold.

use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::{token_count, tokens, CorpusStats, Record};
use crate::script::ScriptRangeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Src,
    Tgt,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Src => Side::Tgt,
            Side::Tgt => Side::Src,
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "src" => Ok(Side::Src),
            "tgt" => Ok(Side::Tgt),
            other => Err(format!("unknown side {other:?}, expected src or tgt")),
        }
    }
}

/// Borrowed view of one record: one side for mono data, two for parallel.
#[derive(Debug, Clone, Copy)]
pub struct Sides<'a> {
    pub src: &'a str,
    pub tgt: Option<&'a str>,
}

impl<'a> Sides<'a> {
    pub fn pair(src: &'a str, tgt: &'a str) -> Self {
        Sides {
            src,
            tgt: Some(tgt),
        }
    }

    pub fn mono(src: &'a str) -> Self {
        Sides { src, tgt: None }
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a str> {
        std::iter::once(self.src).chain(self.tgt)
    }

    pub fn side(&self, side: Side) -> Option<&'a str> {
        match side {
            Side::Src => Some(self.src),
            Side::Tgt => self.tgt,
        }
    }
}

impl<'a> From<&'a Record> for Sides<'a> {
    fn from(r: &'a Record) -> Self {
        Sides {
            src: &r.src,
            tgt: r.tgt_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keep,
    Reject,
    /// Length ratio is undefined because one side has no tokens.
    RejectEmptySide,
}

impl Verdict {
    #[inline]
    pub fn is_keep(self) -> bool {
        self == Verdict::Keep
    }

    #[inline]
    fn reject_if(cond: bool) -> Verdict {
        if cond {
            Verdict::Reject
        } else {
            Verdict::Keep
        }
    }
}

pub fn filter_max_len(sides: Sides<'_>, limit: usize) -> Verdict {
    Verdict::reject_if(sides.iter().any(|s| token_count(s) > limit))
}

pub fn filter_len_bounds(sides: Sides<'_>, min: usize, max: usize) -> Verdict {
    Verdict::reject_if(sides.iter().any(|s| {
        let n = token_count(s);
        n < min || n > max
    }))
}

/// Rejects when the longer side has more than `max_ratio` times the tokens
/// of the shorter side. Mono records always keep.
pub fn filter_len_ratio(sides: Sides<'_>, max_ratio: f64) -> Verdict {
    let Some(tgt) = sides.tgt else {
        return Verdict::Keep;
    };
    let a = token_count(sides.src);
    let b = token_count(tgt);
    if a == 0 || b == 0 {
        return Verdict::RejectEmptySide;
    }
    let (long, short) = if a >= b { (a, b) } else { (b, a) };
    // relative slack absorbs rounding of decimal ratios such as 1.3
    Verdict::reject_if(long as f64 > max_ratio * short as f64 * (1.0 + 1e-12))
}

pub fn filter_requires_diacritic(sides: Sides<'_>, side: Side, chars: &[char]) -> Verdict {
    match sides.side(side) {
        Some(text) => Verdict::reject_if(!text.chars().any(|c| chars.contains(&c))),
        None => Verdict::Keep,
    }
}

#[inline]
pub fn is_letter(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_alphabetic();
    }
    matches!(
        get_general_category(c),
        GeneralCategory::UppercaseLetter
            | GeneralCategory::LowercaseLetter
            | GeneralCategory::TitlecaseLetter
            | GeneralCategory::ModifierLetter
            | GeneralCategory::OtherLetter
    )
}

/// Letters (general category L*) versus non-letter, non-whitespace
/// characters. `None` when there are no non-letters (infinite ratio).
pub fn alpha_ratio(text: &str) -> Option<f64> {
    let (mut alpha, mut other) = (0usize, 0usize);
    if text.is_ascii() {
        for b in text.bytes() {
            if b.is_ascii_alphabetic() {
                alpha += 1;
            } else if !(b.is_ascii_whitespace() || b == 0x0B) {
                other += 1;
            }
        }
    } else {
        for c in text.chars() {
            if is_letter(c) {
                alpha += 1;
            } else if !c.is_whitespace() {
                other += 1;
            }
        }
    }
    (other > 0).then(|| alpha as f64 / other as f64)
}

pub fn filter_alpha_ratio(sides: Sides<'_>, min_ratio: f64) -> Verdict {
    Verdict::reject_if(
        sides
            .iter()
            .any(|s| alpha_ratio(s).is_some_and(|r| r < min_ratio)),
    )
}

/// A token is a link if it contains `http://` or `https://`, or starts with
/// `www.` followed by a non-empty label.
pub fn is_link_token(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    if lower.contains("http://") || lower.contains("https://") {
        return true;
    }
    match lower.strip_prefix("www.") {
        Some(rest) => rest
            .split('.')
            .next()
            .is_some_and(|label| label.chars().next().is_some_and(char::is_alphanumeric)),
        None => false,
    }
}

pub fn contains_link(text: &str) -> bool {
    // cheap pre-check before per-token work
    let bytes = text.as_bytes();
    let maybe = (0..bytes.len().saturating_sub(3)).any(|i| {
        let w = &bytes[i..i + 4];
        match w[0] | 0x20 {
            b'h' => w.eq_ignore_ascii_case(b"http"),
            b'w' => w.eq_ignore_ascii_case(b"www."),
            _ => false,
        }
    });
    maybe && tokens(text).any(is_link_token)
}

pub fn filter_contains_link(sides: Sides<'_>) -> Verdict {
    Verdict::reject_if(sides.iter().any(contains_link))
}

/// `script_side` must contain at least one character in `ranges`; the other
/// side must not consist solely of such characters and whitespace.
pub fn filter_script_presence(
    sides: Sides<'_>,
    script_side: Side,
    ranges: &ScriptRangeSet,
) -> Verdict {
    if !requires_script(sides, script_side, ranges).is_keep() {
        return Verdict::Reject;
    }
    forbids_script_only(sides, script_side.other(), ranges)
}

pub fn requires_script(sides: Sides<'_>, side: Side, ranges: &ScriptRangeSet) -> Verdict {
    match sides.side(side) {
        Some(text) => Verdict::reject_if(!text.chars().any(|c| ranges.contains(c))),
        None => Verdict::Keep,
    }
}

/// An empty side counts as script-only.
pub fn forbids_script_only(sides: Sides<'_>, side: Side, ranges: &ScriptRangeSet) -> Verdict {
    match sides.side(side) {
        Some(text) => Verdict::reject_if(
            text.chars()
                .all(|c| c.is_whitespace() || ranges.contains(c)),
        ),
        None => Verdict::Keep,
    }
}

/// Longest run of one repeated non-whitespace character. Whitespace breaks
/// runs and is never counted.
pub fn longest_char_run(text: &str) -> usize {
    if text.is_ascii() {
        return longest_run_by(text.bytes(), |b| b.is_ascii_whitespace() || b == 0x0B);
    }
    longest_run_by(text.chars(), char::is_whitespace)
}

fn longest_run_by<T: PartialEq + Copy>(items: impl Iterator<Item = T>, breaks: impl Fn(T) -> bool) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<T> = None;
    for c in items {
        if breaks(c) {
            prev = None;
            run = 0;
            continue;
        }
        if prev == Some(c) {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        best = best.max(run);
    }
    best
}

pub fn longest_token_run(text: &str) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<&[u8]> = None;
    // separators are ASCII, so splitting bytes never cuts a character
    for t in text.as_bytes().split(|&b| b == b' ' || b == b'\t').filter(|t| !t.is_empty()) {
        if prev == Some(t) {
            run += 1;
        } else {
            prev = Some(t);
            run = 1;
        }
        best = best.max(run);
    }
    best
}

pub fn filter_repeat_noise(sides: Sides<'_>, max_char_run: usize, max_token_run: usize) -> Verdict {
    Verdict::reject_if(sides.iter().any(|s| {
        longest_char_run(s) > max_char_run || longest_token_run(s) > max_token_run
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusDecision {
    Include,
    Exclude,
}

/// Corpus-level gate on the average source-side sentence length.
pub fn filter_min_avg_len_corpus(stats: &CorpusStats, min_avg: f64) -> CorpusDecision {
    if stats.avg_len_src < min_avg {
        CorpusDecision::Exclude
    } else {
        CorpusDecision::Include
    }
}

/// á č ď é ě í ň ó ř š ť ú ů ý ž and their capitals.
pub const CZECH_DIACRITICS: &str = "áčďéěíňóřšťúůýžÁČĎÉĚÍŇÓŘŠŤÚŮÝŽ";
