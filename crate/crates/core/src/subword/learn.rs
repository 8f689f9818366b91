//! Greedy BPE merge learning over a word frequency table.
//!
//! Pair counts are maintained incrementally: merging a pair only revisits
//! the words that contain it. Candidates live in an ordered set keyed by
//! (count descending, left symbol, right symbol), which gives the
//! lexicographic tie-break directly.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use super::model::BpeModel;
use super::vocab::count_tokens;
use super::SubwordError;

type Pair = (u32, u32);
type QueueKey = (Reverse<u64>, Rc<str>, Rc<str>);

struct Symbols {
    text: Vec<Rc<str>>,
    ids: HashMap<Rc<str>, u32>,
}

impl Symbols {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.text.len() as u32;
        let rc: Rc<str> = Rc::from(s);
        self.text.push(rc.clone());
        self.ids.insert(rc, id);
        id
    }
}

struct Learner {
    symbols: Symbols,
    words: Vec<(Vec<u32>, u64)>,
    counts: HashMap<Pair, u64>,
    where_: HashMap<Pair, HashSet<u32>>,
    queue: BTreeSet<QueueKey>,
}

impl Learner {
    fn key(&self, pair: Pair, count: u64) -> QueueKey {
        (
            Reverse(count),
            self.symbols.text[pair.0 as usize].clone(),
            self.symbols.text[pair.1 as usize].clone(),
        )
    }

    fn set_count(&mut self, pair: Pair, new: u64) {
        let old = self.counts.get(&pair).copied().unwrap_or(0);
        if old == new {
            return;
        }
        if old > 0 {
            let k = self.key(pair, old);
            self.queue.remove(&k);
        }
        if new > 0 {
            let k = self.key(pair, new);
            self.queue.insert(k);
            self.counts.insert(pair, new);
        } else {
            self.counts.remove(&pair);
        }
    }

    fn merge(&mut self, a: u32, b: u32) {
        let c = {
            let joined = format!(
                "{}{}",
                self.symbols.text[a as usize], self.symbols.text[b as usize]
            );
            self.symbols.intern(&joined)
        };
        let mut affected: Vec<u32> = self
            .where_
            .remove(&(a, b))
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();

        let mut delta: HashMap<Pair, i64> = HashMap::new();
        for w in affected {
            let (syms, freq) = &self.words[w as usize];
            let freq = *freq as i64;
            let merged = merge_word(syms, a, b, c);
            if merged.len() == syms.len() {
                continue;
            }
            for p in syms.windows(2) {
                *delta.entry((p[0], p[1])).or_insert(0) -= freq;
            }
            for p in merged.windows(2) {
                *delta.entry((p[0], p[1])).or_insert(0) += freq;
                self.where_.entry((p[0], p[1])).or_default().insert(w);
            }
            self.words[w as usize].0 = merged;
        }
        let mut changed: Vec<(Pair, i64)> = delta.into_iter().filter(|(_, d)| *d != 0).collect();
        changed.sort_unstable();
        for (pair, d) in changed {
            let old = self.counts.get(&pair).copied().unwrap_or(0) as i64;
            let new = old + d;
            debug_assert!(new >= 0, "negative pair count");
            self.set_count(pair, new.max(0) as u64);
        }
    }
}

/// Replaces non-overlapping occurrences of (a, b), scanning left to right.
fn merge_word(syms: &[u32], a: u32, b: u32, c: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
            out.push(c);
            i += 2;
        } else {
            out.push(syms[i]);
            i += 1;
        }
    }
    out
}

/// Learns up to `num_merges` merges from word counts. Stops early once the
/// most frequent pair occurs fewer than twice.
pub fn learn_from_counts(
    word_counts: &HashMap<String, u64>,
    num_merges: usize,
) -> Result<BpeModel, SubwordError> {
    if word_counts.values().all(|&c| c == 0) {
        return Err(SubwordError::EmptyCorpus);
    }
    let mut sorted: Vec<(&String, u64)> = word_counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (w, c))
        .collect();
    sorted.sort_unstable();

    let mut symbols = Symbols {
        text: Vec::new(),
        ids: HashMap::new(),
    };
    let mut alphabet = BTreeSet::new();
    let mut words = Vec::with_capacity(sorted.len());
    for (w, c) in sorted {
        let mut buf = [0u8; 4];
        let syms: Vec<u32> = w
            .chars()
            .map(|ch| {
                alphabet.insert(ch);
                symbols.intern(ch.encode_utf8(&mut buf))
            })
            .collect();
        words.push((syms, c));
    }

    let mut counts: HashMap<Pair, u64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<u32>> = HashMap::new();
    for (wi, (syms, freq)) in words.iter().enumerate() {
        for p in syms.windows(2) {
            *counts.entry((p[0], p[1])).or_insert(0) += freq;
            where_.entry((p[0], p[1])).or_default().insert(wi as u32);
        }
    }
    let mut learner = Learner {
        symbols,
        words,
        counts: HashMap::new(),
        where_,
        queue: BTreeSet::new(),
    };
    for (pair, count) in counts {
        learner.set_count(pair, count);
    }

    let mut merges = Vec::with_capacity(num_merges.min(1 << 20));
    while merges.len() < num_merges {
        let Some((Reverse(count), left, right)) = learner.queue.first().cloned() else {
            break;
        };
        if count < 2 {
            break;
        }
        let a = learner.symbols.ids[&left];
        let b = learner.symbols.ids[&right];
        learner.merge(a, b);
        debug_assert!(!learner.counts.contains_key(&(a, b)));
        merges.push((left.to_string(), right.to_string()));
    }
    BpeModel::new(merges, alphabet, num_merges)
}

/// Learns BPE over whitespace-tokenised corpora. With `joint`, all corpora
/// share one frequency table and one model is returned; otherwise one model
/// per corpus.
pub fn bpe_learn<S: AsRef<str> + Sync>(
    corpora: &[&[S]],
    num_merges: usize,
    joint: bool,
) -> Result<Vec<BpeModel>, SubwordError> {
    if joint {
        let mut pooled: HashMap<String, u64> = HashMap::new();
        for corpus in corpora {
            for (w, c) in count_tokens(corpus) {
                *pooled.entry(w).or_insert(0) += c;
            }
        }
        Ok(vec![learn_from_counts(&pooled, num_merges)?])
    } else {
        corpora
            .iter()
            .map(|corpus| learn_from_counts(&count_tokens(corpus), num_merges))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(items: &[(&str, u64)]) -> HashMap<String, u64> {
        items.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn hug_pug_hugs() {
        // (u,g) occurs in all three words: 2 + 1 + 1
        let m = learn_from_counts(&counts(&[("hug", 2), ("pug", 1), ("hugs", 1)]), 1).unwrap();
        assert_eq!(m.merges(), [("u".to_string(), "g".to_string())]);
    }

    #[test]
    fn zero_merges() {
        let m = learn_from_counts(&counts(&[("hug", 2)]), 0).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.apply("hug", None), "h@@ u@@ g");
    }

    #[test]
    fn only_candidate() {
        let m = learn_from_counts(&counts(&[("aa", 3)]), 1).unwrap();
        assert_eq!(m.merges(), [("a".to_string(), "a".to_string())]);
    }

    #[test]
    fn stops_when_pairs_are_singletons() {
        let m = learn_from_counts(&counts(&[("abc", 1)]), 10).unwrap();
        assert!(m.merges().is_empty());
        assert_eq!(m.num_merges_requested(), 10);
    }

    #[test]
    fn lexicographic_tie_break() {
        // (a,b) and (c,d) both occur twice
        let m = learn_from_counts(&counts(&[("cd", 2), ("ab", 2)]), 1).unwrap();
        assert_eq!(m.merges()[0], ("a".to_string(), "b".to_string()));
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            learn_from_counts(&HashMap::new(), 5),
            Err(SubwordError::EmptyCorpus)
        ));
        let empty: [&str; 0] = [];
        assert!(bpe_learn(&[&empty[..]], 5, true).is_err());
    }

    #[test]
    fn joint_versus_separate() {
        let en = ["low lower lowest", "low low"];
        let gu = ["નમસ્તે નમસ્તે", "નમ"];
        let joint = bpe_learn(&[&en[..], &gu[..]], 20, true).unwrap();
        assert_eq!(joint.len(), 1);
        let sep = bpe_learn(&[&en[..], &gu[..]], 20, false).unwrap();
        assert_eq!(sep.len(), 2);
        assert!(sep[0].merges().iter().all(|(l, _)| l.is_ascii()));
        // Joint alphabet covers both scripts.
        assert!(joint[0].alphabet().contains(&'ન'));
        assert!(joint[0].alphabet().contains(&'w'));
    }

    #[test]
    fn merged_symbol_reached_twice() {
        // "abc" can come from (ab,c) or (a,bc); interning keeps one symbol
        let m = learn_from_counts(&counts(&[("abc", 5), ("ab", 4), ("bc", 9)]), 10).unwrap();
        let seg = m.segment_token("abc");
        assert_eq!(seg.concat(), "abc");
    }
}
