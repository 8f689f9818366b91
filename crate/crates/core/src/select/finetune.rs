use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::ngram::{distinct_ngrams, for_each_ngram, NRange, NgramIndex};
use super::SelectError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionConfig {
    pub rare_threshold: u64,
    pub n_range: NRange,
    /// Apply `budget` to each shard separately instead of to the merged list.
    pub per_shard: bool,
    pub budget: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            rare_threshold: 50,
            n_range: NRange::default(),
            per_shard: false,
            budget: usize::MAX,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectError> {
        if self.rare_threshold < 1 {
            return Err(SelectError::Config("rare_threshold must be >= 1".into()));
        }
        if self.budget < 1 {
            return Err(SelectError::Config("budget must be >= 1".into()));
        }
        NRange::new(self.n_range.min, self.n_range.max).map(|_| ())
    }
}

/// A candidate shard: its name and its sentences, where the sentence id is
/// the zero-based line number.
#[derive(Debug, Clone, Copy)]
pub struct CandidatePool<'a, S> {
    pub name: &'a str,
    pub sentences: &'a [S],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Selected {
    pub shard: String,
    pub id: u64,
    pub score: u32,
}

/// Test-set n-grams that are rare in `index`: shard count in [1, threshold).
pub fn rare_ngrams<'t>(
    test_ngrams: &'t HashSet<String>,
    index: &NgramIndex,
    threshold: u64,
) -> HashSet<&'t str> {
    test_ngrams
        .iter()
        .filter(|g| {
            let c = index.count(g);
            c >= 1 && c < threshold
        })
        .map(String::as_str)
        .collect()
}

fn score_sentence(sentence: &str, rare: &HashSet<&str>, range: NRange) -> u32 {
    let mut seen: HashSet<&str> = HashSet::new();
    for_each_ngram(sentence, range, |g| {
        if let Some(&r) = rare.get(g) {
            seen.insert(r);
        }
    });
    seen.len() as u32
}

/// Ranks candidate sentences by how many distinct rare test-set n-grams
/// they contain. Every pool needs an index keyed by its name in `indices`.
pub fn select_finetune_data<T, S>(
    test_source: &[T],
    pools: &[CandidatePool<'_, S>],
    indices: &HashMap<String, NgramIndex>,
    config: &SelectionConfig,
) -> Result<Vec<Selected>, SelectError>
where
    T: AsRef<str>,
    S: AsRef<str> + Sync,
{
    config.validate()?;
    for pool in pools {
        let index = indices
            .get(pool.name)
            .ok_or_else(|| SelectError::MissingIndex(pool.name.to_string()))?;
        if !index.range.covers(config.n_range) {
            return Err(SelectError::IndexRange {
                shard: pool.name.to_string(),
                index: index.range,
                wanted: config.n_range,
            });
        }
    }

    let mut test_ngrams = HashSet::new();
    for s in test_source {
        test_ngrams.extend(distinct_ngrams(s.as_ref(), config.n_range));
    }

    let mut out = Vec::new();
    for pool in pools {
        let rare = rare_ngrams(&test_ngrams, &indices[pool.name], config.rare_threshold);
        if rare.is_empty() {
            continue;
        }
        let mut hits: Vec<Selected> = pool
            .sentences
            .par_iter()
            .enumerate()
            .filter_map(|(id, s)| {
                let score = score_sentence(s.as_ref(), &rare, config.n_range);
                (score > 0).then(|| Selected {
                    shard: pool.name.to_string(),
                    id: id as u64,
                    score,
                })
            })
            .collect();
        if config.per_shard {
            hits.sort_by(rank_order);
            hits.truncate(config.budget);
        }
        out.extend(hits);
    }
    out.sort_by(rank_order);
    if !config.per_shard {
        out.truncate(config.budget);
    }
    Ok(out)
}

fn rank_order(a: &Selected, b: &Selected) -> std::cmp::Ordering {
    b.score
        .cmp(&a.score)
        .then_with(|| a.shard.cmp(&b.shard))
        .then_with(|| a.id.cmp(&b.id))
}

#[cfg(test)]
mod tests {
    use super::super::ngram::build_ngram_index;
    use super::*;

    fn setup(pool: &[&str]) -> HashMap<String, NgramIndex> {
        let mut m = HashMap::new();
        m.insert("p".to_string(), build_ngram_index("p", pool, NRange::default()));
        m
    }

    #[test]
    fn count_zero_never_matches() {
        let pool = ["x y z"];
        let idx = setup(&pool);
        let pools = [CandidatePool { name: "p", sentences: &pool[..] }];
        let sel = select_finetune_data(&["a b"], &pools, &idx, &SelectionConfig::default()).unwrap();
        assert!(sel.is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let pool: Vec<&str> = std::iter::repeat("a b").take(50).collect();
        let idx = setup(&pool);
        let pools = [CandidatePool { name: "p", sentences: &pool[..] }];
        let cfg = SelectionConfig::default();
        assert!(select_finetune_data(&["a b"], &pools, &idx, &cfg).unwrap().is_empty());
        let cfg = SelectionConfig { rare_threshold: 51, ..cfg };
        assert_eq!(select_finetune_data(&["a b"], &pools, &idx, &cfg).unwrap().len(), 50);
    }

    #[test]
    fn ranking_and_budget() {
        let pool = ["a b c d", "q r", "a b", "c d x"];
        let idx = setup(&pool);
        let pools = [CandidatePool { name: "p", sentences: &pool[..] }];
        let cfg = SelectionConfig { budget: 2, ..SelectionConfig::default() };
        let sel = select_finetune_data(&["a b c d"], &pools, &idx, &cfg).unwrap();
        let got: Vec<(u64, u32)> = sel.iter().map(|s| (s.id, s.score)).collect();
        // "a b c d" contains all six n-grams of the test sentence
        assert_eq!(got, [(0, 6), (2, 1)]);
    }

    #[test]
    fn missing_index_and_range() {
        let pool = ["a b"];
        let pools = [CandidatePool { name: "p", sentences: &pool[..] }];
        let err = select_finetune_data(&["a b"], &pools, &HashMap::new(), &SelectionConfig::default());
        assert!(matches!(err, Err(SelectError::MissingIndex(n)) if n == "p"));

        let mut narrow = HashMap::new();
        narrow.insert("p".into(), build_ngram_index("p", &pool, NRange::new(2, 3).unwrap()));
        let err = select_finetune_data(&["a b"], &pools, &narrow, &SelectionConfig::default());
        assert!(matches!(err, Err(SelectError::IndexRange { .. })));
    }

    #[test]
    fn per_shard_budget() {
        let a = ["a b", "a b c"];
        let b = ["a b", "b c"];
        let mut idx = HashMap::new();
        idx.insert("a".to_string(), build_ngram_index("a", &a, NRange::default()));
        idx.insert("b".to_string(), build_ngram_index("b", &b, NRange::default()));
        let pools = [
            CandidatePool { name: "b", sentences: &b[..] },
            CandidatePool { name: "a", sentences: &a[..] },
        ];
        let cfg = SelectionConfig { budget: 1, per_shard: true, ..SelectionConfig::default() };
        let sel = select_finetune_data(&["a b c"], &pools, &idx, &cfg).unwrap();
        let got: Vec<(&str, u64)> = sel.iter().map(|s| (s.shard.as_str(), s.id)).collect();
        assert_eq!(got, [("a", 1), ("b", 0)]);
    }
}
