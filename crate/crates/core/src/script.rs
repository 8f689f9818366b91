//! Codepoint interval sets used to classify characters by script.

use std::fmt;
use std::str::FromStr;

/// Sorted, disjoint, inclusive codepoint intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRangeSet {
    intervals: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RangeParseError {
    #[error("empty range set")]
    Empty,
    #[error("malformed range {0:?}, expected HEX or HEX-HEX")]
    Malformed(String),
    #[error("range {0:?} has start after end")]
    Inverted(String),
}

/// CJK Unified Ideographs Extension A.
pub const CJK_EXT_A: (u32, u32) = (0x3400, 0x4DBF);
/// CJK Unified Ideographs.
pub const CJK_UNIFIED: (u32, u32) = (0x4E00, 0x9FFF);
/// CJK Symbols and Punctuation.
pub const CJK_PUNCT: (u32, u32) = (0x3000, 0x303F);

impl ScriptRangeSet {
    /// Normalises arbitrary intervals: sorts them and merges overlapping or
    /// touching ones.
    pub fn new(mut intervals: Vec<(u32, u32)>) -> Result<Self, RangeParseError> {
        if intervals.is_empty() {
            return Err(RangeParseError::Empty);
        }
        if let Some(&(a, b)) = intervals.iter().find(|(a, b)| a > b) {
            return Err(RangeParseError::Inverted(format!("{a:X}-{b:X}")));
        }
        intervals.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(ScriptRangeSet { intervals: merged })
    }

    /// Han ideographs: the basic block plus Extension A.
    pub fn chinese() -> Self {
        ScriptRangeSet::new(vec![CJK_EXT_A, CJK_UNIFIED]).expect("static ranges")
    }

    /// Han ideographs plus CJK symbols and punctuation.
    pub fn chinese_with_punct() -> Self {
        ScriptRangeSet::new(vec![CJK_PUNCT, CJK_EXT_A, CJK_UNIFIED]).expect("static ranges")
    }

    pub fn intervals(&self) -> &[(u32, u32)] {
        &self.intervals
    }

    #[inline]
    pub fn contains(&self, c: char) -> bool {
        let cp = c as u32;
        // Most sets hold two or three intervals.
        if self.intervals.len() <= 4 {
            return self.intervals.iter().any(|&(lo, hi)| lo <= cp && cp <= hi);
        }
        match self.intervals.binary_search_by(|&(lo, _)| lo.cmp(&cp)) {
            Ok(_) => true,
            Err(0) => false,
            Err(i) => cp <= self.intervals[i - 1].1,
        }
    }

    pub fn union(&self, other: &ScriptRangeSet) -> ScriptRangeSet {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        ScriptRangeSet::new(all).expect("both sides non-empty")
    }
}

impl FromStr for ScriptRangeSet {
    type Err = RangeParseError;

    /// Parses `4E00-9FFF,3400-4DBF` (hex, optional `U+` prefix).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_cp = |t: &str, whole: &str| {
            let t = t.trim();
            let t = t
                .strip_prefix("U+")
                .or_else(|| t.strip_prefix("u+"))
                .unwrap_or(t);
            u32::from_str_radix(t, 16).map_err(|_| RangeParseError::Malformed(whole.to_string()))
        };
        let mut intervals = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let iv = match part.split_once('-') {
                Some((a, b)) => (parse_cp(a, part)?, parse_cp(b, part)?),
                None => {
                    let c = parse_cp(part, part)?;
                    (c, c)
                }
            };
            if iv.0 > iv.1 {
                return Err(RangeParseError::Inverted(part.to_string()));
            }
            intervals.push(iv);
        }
        ScriptRangeSet::new(intervals)
    }
}

impl fmt::Display for ScriptRangeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{lo:04X}-{hi:04X}")?;
        }
        Ok(())
    }
}
