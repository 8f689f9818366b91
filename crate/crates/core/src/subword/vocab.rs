use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::tokens;

use super::SubwordError;

/// Token counts over a segmented corpus, pruned to `count >= min_count`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    entries: HashMap<String, u64>,
    min_count: u64,
}

impl Vocabulary {
    pub fn from_counts<I, S>(counts: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let entries = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .map(|(t, c)| (t.into(), c))
            .collect();
        Vocabulary { entries, min_count }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.entries.get(token).copied()
    }

    /// Applies a stricter threshold to an existing vocabulary.
    pub fn prune(&mut self, min_count: u64) {
        self.entries.retain(|_, c| *c >= min_count);
        self.min_count = self.min_count.max(min_count);
    }

    /// Entries by descending count, then token.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.entries.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (t, c) in self.sorted() {
            let _ = writeln!(s, "{t}\t{c}");
        }
        s
    }

    pub fn from_text(text: &str, min_count: u64) -> Result<Self, SubwordError> {
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parsed = line
                .rsplit_once('\t')
                .and_then(|(t, c)| Some((t.to_string(), c.parse::<u64>().ok()?)));
            match parsed {
                Some(entry) => counts.push(entry),
                None => {
                    return Err(SubwordError::InvalidVocabulary(format!(
                        "line {}: expected token<TAB>count",
                        i + 1
                    )))
                }
            }
        }
        Ok(Vocabulary::from_counts(counts, min_count))
    }

    pub fn save(&self, path: &Path) -> Result<(), SubwordError> {
        std::fs::write(path, self.to_text()).map_err(|e| SubwordError::io(path, e))
    }

    pub fn load(path: &Path, min_count: u64) -> Result<Self, SubwordError> {
        let text = std::fs::read_to_string(path).map_err(|e| SubwordError::io(path, e))?;
        Self::from_text(&text, min_count)
    }
}

/// Counts whitespace tokens across lines.
pub fn count_tokens<S: AsRef<str> + Sync>(lines: &[S]) -> HashMap<String, u64> {
    lines
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, line| {
            for t in tokens(line.as_ref()) {
                match acc.get_mut(t) {
                    Some(c) => *c += 1,
                    None => {
                        acc.insert(t.to_string(), 1);
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            let (mut big, small) = if a.len() >= b.len() { (std::mem::take(&mut a), b) } else { (b, a) };
            for (t, c) in small {
                *big.entry(t).or_insert(0) += c;
            }
            big
        })
}

/// Builds the vocabulary of a segmented corpus and drops tokens seen fewer
/// than `min_count` times.
pub fn vocab_build_and_prune<S: AsRef<str> + Sync>(segmented: &[S], min_count: u64) -> Vocabulary {
    Vocabulary::from_counts(count_tokens(segmented), min_count.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prune_threshold() {
        let v = Vocabulary::from_counts([("a", 12), ("b", 9)], 10);
        assert_eq!(v.len(), 1);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        let all = Vocabulary::from_counts([("a", 12), ("b", 9), ("c", 1)], 1);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn build_from_corpus() {
        // counts: x=3 y=3 z=2 w=1 v=1
        let lines = ["x y z", "x y w", "x y z v"];
        let v = vocab_build_and_prune(&lines, 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.count("z"), Some(2));
        assert_eq!(vocab_build_and_prune(&lines, 1).len(), 5);
    }

    #[test]
    fn file_is_sorted_and_round_trips() {
        let v = Vocabulary::from_counts([("b", 5), ("a", 5), ("c", 9), ("d", 1)], 1);
        assert_eq!(v.to_text(), "c\t9\na\t5\nb\t5\nd\t1\n");
        let back = Vocabulary::from_text(&v.to_text(), 5).unwrap();
        assert_eq!(back.len(), 3);
        assert!(Vocabulary::from_text("a 5\n", 1).is_err());
    }

    #[test]
    fn prune_in_place() {
        let mut v = Vocabulary::from_counts([("a", 12), ("b", 9)], 1);
        v.prune(10);
        assert_eq!(v.len(), 1);
        assert_eq!(v.min_count(), 10);
    }
}
