use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::tokens;

use super::SelectError;

const HEADER_TAG: &str = "#mtforge-ngram-index";
const FORMAT_VERSION: u32 = 1;

/// Inclusive n-gram order range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct NRange {
    pub min: usize,
    pub max: usize,
}

impl NRange {
    pub fn new(min: usize, max: usize) -> Result<Self, SelectError> {
        if min == 0 || min > max {
            return Err(SelectError::Config(format!(
                "n-gram range needs 1 <= nmin <= nmax, got {min}..{max}"
            )));
        }
        Ok(NRange { min, max })
    }

    pub fn covers(&self, other: NRange) -> bool {
        self.min <= other.min && other.max <= self.max
    }
}

impl Default for NRange {
    fn default() -> Self {
        NRange { min: 2, max: 4 }
    }
}

/// Calls `f` with every n-gram of the sentence for n in `range`, as the
/// tokens joined by single spaces.
pub fn for_each_ngram(sentence: &str, range: NRange, mut f: impl FnMut(&str)) {
    let toks: Vec<&str> = tokens(sentence).collect();
    let mut key = String::new();
    for n in range.min..=range.max {
        if n > toks.len() {
            break;
        }
        for w in toks.windows(n) {
            key.clear();
            for (i, t) in w.iter().enumerate() {
                if i > 0 {
                    key.push(' ');
                }
                key.push_str(t);
            }
            f(&key);
        }
    }
}

pub fn distinct_ngrams(sentence: &str, range: NRange) -> HashSet<String> {
    let mut set = HashSet::new();
    for_each_ngram(sentence, range, |g| {
        if !set.contains(g) {
            set.insert(g.to_string());
        }
    });
    set
}

/// Per-shard n-gram occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramIndex {
    pub shard_name: String,
    pub range: NRange,
    counts: HashMap<String, u64>,
}

impl NgramIndex {
    pub fn count(&self, ngram: &str) -> u64 {
        self.counts.get(ngram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn to_text(&self) -> String {
        let mut entries: Vec<(&str, u64)> = self.iter().collect();
        entries.sort_unstable();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{HEADER_TAG} version={FORMAT_VERSION} shard={} nmin={} nmax={}",
            self.shard_name, self.range.min, self.range.max
        );
        for (g, c) in entries {
            let _ = writeln!(s, "{g}\t{c}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, SelectError> {
        let bad = |m: String| SelectError::InvalidIndex(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty index file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(HEADER_TAG) {
            return Err(bad(format!("bad header {header:?}")));
        }
        let (mut version, mut shard, mut nmin, mut nmax) = (None, None, None, None);
        for f in fields {
            match f.split_once('=') {
                Some(("version", v)) => version = v.parse::<u32>().ok(),
                Some(("shard", v)) => shard = Some(v.to_string()),
                Some(("nmin", v)) => nmin = v.parse::<usize>().ok(),
                Some(("nmax", v)) => nmax = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("bad header field {f:?}"))),
            }
        }
        if version != Some(FORMAT_VERSION) {
            return Err(bad(format!("unsupported index version in {header:?}")));
        }
        let (Some(shard), Some(nmin), Some(nmax)) = (shard, nmin, nmax) else {
            return Err(bad(format!("incomplete header {header:?}")));
        };
        let range = NRange::new(nmin, nmax)?;
        let mut counts = HashMap::new();
        for (i, line) in lines.enumerate() {
            let parsed = line
                .rsplit_once('\t')
                .and_then(|(g, c)| Some((g, c.parse::<u64>().ok()?)));
            match parsed {
                Some((g, c)) if c >= 1 => {
                    counts.insert(g.to_string(), c);
                }
                _ => return Err(bad(format!("line {}: expected ngram<TAB>count", i + 2))),
            }
        }
        Ok(NgramIndex {
            shard_name: shard,
            range,
            counts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SelectError> {
        std::fs::write(path, self.to_text()).map_err(|e| SelectError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, SelectError> {
        let text = std::fs::read_to_string(path).map_err(|e| SelectError::io(path, e))?;
        Self::from_text(&text)
    }
}

pub fn build_ngram_index<S: AsRef<str> + Sync>(
    shard_name: impl Into<String>,
    sentences: &[S],
    range: NRange,
) -> NgramIndex {
    let counts = sentences
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, s| {
            for_each_ngram(s.as_ref(), range, |g| match acc.get_mut(g) {
                Some(c) => *c += 1,
                None => {
                    acc.insert(g.to_string(), 1);
                }
            });
            acc
        })
        .reduce(HashMap::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (g, c) in small {
                *big.entry(g).or_insert(0) += c;
            }
            big
        });
    NgramIndex {
        shard_name: shard_name.into(),
        range,
        counts,
    }
}
