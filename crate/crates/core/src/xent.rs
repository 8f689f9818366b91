//! Cross-entropy based bitext filtering.
//!
//! Scores are per-token cross-entropies in nats, lower is better. They come
//! from an external score file or from a small add-one smoothed n-gram
//! model trained on the shard itself.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::tokens;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum XentError {
    #[error("line {line}: pair id {id} is outside the shard ({n_pairs} pairs)")]
    UnknownPairId { line: usize, id: u64, n_pairs: u64 },
    #[error("line {line}: pair id {id} scored twice")]
    DuplicateId { line: usize, id: u64 },
    #[error("line {line}: expected pair_id<TAB>h_fwd[<TAB>h_bwd]")]
    MalformedLine { line: usize },
    #[error("line {line}: score is not finite")]
    NonFiniteScore { line: usize },
    #[error("line {line}: score is negative")]
    NegativeScore { line: usize },
    #[error("{count} pairs have no score, first is id {first}")]
    MissingPairs { count: u64, first: u64 },
    #[error("pair {0} has no backward score")]
    MissingBackwardScore(u64),
    #[error("percentile must lie strictly between 0 and 1, got {0}")]
    InvalidPercentile(f64),
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error("language model order must be 1..=5, got {0}")]
    InvalidOrder(usize),
    #[error("cannot train a language model on an empty shard")]
    EmptyShard,
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub pair_id: u64,
    pub h_fwd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_bwd: Option<f64>,
}

impl ScoreRecord {
    pub fn score(&self, direction: Direction) -> Result<f64, XentError> {
        match direction {
            Direction::OneDirectional => Ok(self.h_fwd),
            Direction::Dual => dual_score(self),
        }
    }
}

/// Parses `pair_id<TAB>h_fwd[<TAB>h_bwd]` lines. Every id in
/// `0..n_pairs` must appear exactly once. Output is sorted by id.
pub fn ingest_scores(text: &str, n_pairs: u64) -> Result<Vec<ScoreRecord>, XentError> {
    let mut slots: Vec<Option<ScoreRecord>> = vec![None; n_pairs as usize];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(XentError::MalformedLine { line });
        }
        let id: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| XentError::MalformedLine { line })?;
        let parse_score = |f: &str| -> Result<f64, XentError> {
            let v: f64 = f.trim().parse().map_err(|_| XentError::MalformedLine { line })?;
            if !v.is_finite() {
                return Err(XentError::NonFiniteScore { line });
            }
            if v < 0.0 {
                return Err(XentError::NegativeScore { line });
            }
            Ok(v)
        };
        let h_fwd = parse_score(fields[1])?;
        let h_bwd = fields.get(2).map(|f| parse_score(f)).transpose()?;
        if id >= n_pairs {
            return Err(XentError::UnknownPairId { line, id, n_pairs });
        }
        let slot = &mut slots[id as usize];
        if slot.is_some() {
            return Err(XentError::DuplicateId { line, id });
        }
        *slot = Some(ScoreRecord { pair_id: id, h_fwd, h_bwd });
    }
    let missing: Vec<u64> = slots
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_none())
        .map(|(i, _)| i as u64)
        .collect();
    if let Some(&first) = missing.first() {
        return Err(XentError::MissingPairs {
            count: missing.len() as u64,
            first,
        });
    }
    Ok(slots.into_iter().flatten().collect())
}

pub fn scores_to_tsv(records: &[ScoreRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = match r.h_bwd {
            Some(b) => writeln!(s, "{}\t{}\t{}", r.pair_id, r.h_fwd, b),
            None => writeln!(s, "{}\t{}", r.pair_id, r.h_fwd),
        };
    }
    s
}

/// |f - b| + (f + b) / 2: penalises both high entropy and disagreement.
pub fn dual_combine(h_fwd: f64, h_bwd: f64) -> f64 {
    (h_fwd - h_bwd).abs() + 0.5 * (h_fwd + h_bwd)
}

pub fn dual_score(record: &ScoreRecord) -> Result<f64, XentError> {
    record
        .h_bwd
        .map(|b| dual_combine(record.h_fwd, b))
        .ok_or(XentError::MissingBackwardScore(record.pair_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    OneDirectional,
    Dual,
}

impl FromStr for Direction {
    type Err = XentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" | "one_directional" | "one-directional" | "fwd" => Ok(Direction::OneDirectional),
            "dual" => Ok(Direction::Dual),
            other => Err(XentError::Parse(format!(
                "unknown direction {other:?}, expected one_directional or dual"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum CutMode {
    /// Drop the worst fraction p of records.
    Percentile(f64),
    /// Drop records scoring above t.
    Absolute(f64),
}

impl FromStr for CutMode {
    type Err = XentError;
    /// `percentile:0.05` or `absolute:3.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || XentError::Parse(format!("bad cut {s:?}, expected percentile:P or absolute:T"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        let mode = match kind.trim() {
            "percentile" => CutMode::Percentile(v),
            "absolute" => CutMode::Absolute(v),
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

impl CutMode {
    pub fn validate(&self) -> Result<(), XentError> {
        match *self {
            CutMode::Percentile(p) if !(p > 0.0 && p < 1.0) => Err(XentError::InvalidPercentile(p)),
            CutMode::Absolute(t) if !t.is_finite() => Err(XentError::InvalidThreshold(t)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterCut {
    pub mode: CutMode,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutResult {
    pub kept: Vec<u64>,
    pub rejected: Vec<u64>,
}

/// Number of records a percentile cut removes: floor(p * n). The epsilon
/// keeps products like 0.05 * 100 from landing just under an integer.
pub fn percentile_count(p: f64, n: usize) -> usize {
    ((p * n as f64) + 1e-9).floor() as usize
}

/// Splits records into kept and rejected ids, both in the input order.
/// Percentile ties are resolved by removing the higher pair id first.
pub fn apply_cut(records: &[ScoreRecord], cut: &FilterCut) -> Result<CutResult, XentError> {
    cut.mode.validate()?;
    let scores: Vec<f64> = records
        .iter()
        .map(|r| r.score(cut.direction))
        .collect::<Result<_, _>>()?;
    let mut reject = vec![false; records.len()];
    match cut.mode {
        CutMode::Absolute(t) => {
            for (flag, &s) in reject.iter_mut().zip(&scores) {
                *flag = s > t;
            }
        }
        CutMode::Percentile(p) => {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then(records[b].pair_id.cmp(&records[a].pair_id))
            });
            for &i in order.iter().take(percentile_count(p, records.len())) {
                reject[i] = true;
            }
        }
    }
    let mut result = CutResult {
        kept: Vec::with_capacity(records.len()),
        rejected: Vec::new(),
    };
    for (r, &rej) in records.iter().zip(&reject) {
        if rej {
            result.rejected.push(r.pair_id);
        } else {
            result.kept.push(r.pair_id);
        }
    }
    Ok(result)
}

const BOS: u32 = 0;

/// Add-one smoothed token n-gram model:
/// P(w | h) = (c(h, w) + 1) / (c(h) + V), V = distinct tokens + 1.
/// Histories are padded with a start symbol that no token can equal.
pub struct NgramLm {
    order: usize,
    vocab: HashMap<String, u32>,
    ngram: HashMap<Vec<u32>, u64>,
    history: HashMap<Vec<u32>, u64>,
}

impl NgramLm {
    pub fn train<S: AsRef<str>>(sentences: &[S], order: usize) -> Result<Self, XentError> {
        if !(1..=5).contains(&order) {
            return Err(XentError::InvalidOrder(order));
        }
        if sentences.is_empty() {
            return Err(XentError::EmptyShard);
        }
        let mut lm = NgramLm {
            order,
            vocab: HashMap::new(),
            ngram: HashMap::new(),
            history: HashMap::new(),
        };
        for s in sentences {
            let ids: Vec<u32> = tokens(s.as_ref())
                .map(|t| {
                    let next = lm.vocab.len() as u32 + 1;
                    *lm.vocab.entry(t.to_string()).or_insert(next)
                })
                .collect();
            lm.each_event(&ids, |lm, key| {
                *lm.ngram.entry(key.to_vec()).or_insert(0) += 1;
                *lm.history.entry(key[..key.len() - 1].to_vec()).or_insert(0) += 1;
            });
        }
        Ok(lm)
    }

    fn each_event(&mut self, ids: &[u32], mut f: impl FnMut(&mut Self, &[u32])) {
        let pad = self.order - 1;
        let mut padded = vec![BOS; pad];
        padded.extend_from_slice(ids);
        for w in padded.windows(self.order) {
            f(self, w);
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 1
    }

    /// Mean negative log probability per token, in nats. A sentence with no
    /// tokens scores ln V.
    pub fn cross_entropy(&self, sentence: &str) -> f64 {
        let v = self.vocab_size() as f64;
        // unseen tokens share one id; they never occur in training counts
        let unk = u32::MAX;
        let ids: Vec<u32> = tokens(sentence)
            .map(|t| self.vocab.get(t).copied().unwrap_or(unk))
            .collect();
        if ids.is_empty() {
            return v.ln();
        }
        let pad = self.order - 1;
        let mut padded = vec![BOS; pad];
        padded.extend_from_slice(&ids);
        let mut nll = 0.0;
        for w in padded.windows(self.order) {
            let c_hw = self.ngram.get(w).copied().unwrap_or(0) as f64;
            let c_h = self.history.get(&w[..w.len() - 1]).copied().unwrap_or(0) as f64;
            nll -= ((c_hw + 1.0) / (c_h + v)).ln();
        }
        nll / ids.len() as f64
    }
}

/// Trains a model on `sentences` and scores each of them with it; pair ids
/// are line numbers.
pub fn fallback_lm_score<S: AsRef<str> + Sync>(
    sentences: &[S],
    order: usize,
) -> Result<Vec<ScoreRecord>, XentError> {
    let lm = NgramLm::train(sentences, order)?;
    Ok(sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| ScoreRecord {
            pair_id: i as u64,
            h_fwd: lm.cross_entropy(s.as_ref()),
            h_bwd: None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fwd(scores: &[f64]) -> Vec<ScoreRecord> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &h)| ScoreRecord { pair_id: i as u64, h_fwd: h, h_bwd: None })
            .collect()
    }

    fn pct(p: f64) -> FilterCut {
        FilterCut { mode: CutMode::Percentile(p), direction: Direction::OneDirectional }
    }

    #[test]
    fn ingest() {
        let recs = ingest_scores("2\t1.5\n0\t0.5\t0.7\n1\t3\n", 3).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].h_bwd, Some(0.7));
        assert_eq!(recs[2].h_fwd, 1.5);
        assert!(matches!(ingest_scores("7\t1\n", 3), Err(XentError::UnknownPairId { id: 7, .. })));
        assert_eq!(ingest_scores("1\tNaN\n", 3), Err(XentError::NonFiniteScore { line: 1 }));
        assert_eq!(ingest_scores("0\t1\n0\t2\n", 1), Err(XentError::DuplicateId { line: 2, id: 0 }));
        assert_eq!(ingest_scores("0 1\n", 1), Err(XentError::MalformedLine { line: 1 }));
        assert_eq!(ingest_scores("0\t-1\n", 1), Err(XentError::NegativeScore { line: 1 }));
        assert_eq!(ingest_scores("0\t1\n", 3), Err(XentError::MissingPairs { count: 2, first: 1 }));
    }

    #[test]
    fn dual_examples() {
        assert_eq!(dual_combine(2.0, 2.0), 2.0);
        assert_eq!(dual_combine(1.0, 3.0), 4.0);
        assert_eq!(dual_combine(0.0, 0.0), 0.0);
        let r = ScoreRecord { pair_id: 4, h_fwd: 1.0, h_bwd: None };
        assert_eq!(dual_score(&r), Err(XentError::MissingBackwardScore(4)));
    }

    #[test]
    fn dominance_does_not_imply_lower_dual_score() {
        // (0, 2) is better than (2, 2) on both sides, yet scores worse
        assert_eq!(dual_combine(0.0, 2.0), 3.0);
        assert_eq!(dual_combine(2.0, 2.0), 2.0);
    }

    #[test]
    fn percentile_twenty() {
        let scores: Vec<f64> = (1..=20).map(f64::from).collect();
        let res = apply_cut(&fwd(&scores), &pct(0.05)).unwrap();
        assert_eq!(res.rejected, [19]);
        assert_eq!(res.kept, (0..19).collect::<Vec<u64>>());
    }

    #[test]
    fn percentile_tie_at_boundary() {
        // 100 records: 2 clear worst, then a 7-way tie for the next 3 slots
        let mut scores = vec![1.0; 100];
        scores[10] = 9.0;
        scores[90] = 9.5;
        for i in [3, 17, 25, 40, 41, 77, 99] {
            scores[i] = 5.0;
        }
        let res = apply_cut(&fwd(&scores), &pct(0.05)).unwrap();
        assert_eq!(res.rejected, [10, 41, 77, 90, 99]);
        assert_eq!(res.kept.len(), 95);
    }

    #[test]
    fn absolute_is_strict() {
        let recs = fwd(&[1.0, 2.0, 3.0]);
        let cut = FilterCut { mode: CutMode::Absolute(3.0), direction: Direction::OneDirectional };
        assert!(apply_cut(&recs, &cut).unwrap().rejected.is_empty());
        let cut = FilterCut { mode: CutMode::Absolute(1.5), ..cut };
        assert_eq!(apply_cut(&recs, &cut).unwrap().rejected, [1, 2]);
    }

    #[test]
    fn cut_parsing() {
        assert_eq!("percentile:0.05".parse::<CutMode>().unwrap(), CutMode::Percentile(0.05));
        assert_eq!("absolute:2".parse::<CutMode>().unwrap(), CutMode::Absolute(2.0));
        assert!("percentile:1".parse::<CutMode>().is_err());
        assert!("percentile:0".parse::<CutMode>().is_err());
        assert!("top:3".parse::<CutMode>().is_err());
        assert_eq!("dual".parse::<Direction>().unwrap(), Direction::Dual);
    }

    #[test]
    fn dual_cut_requires_backward() {
        let cut = FilterCut { mode: CutMode::Percentile(0.5), direction: Direction::Dual };
        assert!(apply_cut(&fwd(&[1.0, 2.0]), &cut).is_err());
    }

    #[test]
    fn unigram_by_hand() {
        // c(a) = 3, N = 3, V = 2: P(a) = 4 / 5
        let recs = fallback_lm_score(&["a a a"], 1).unwrap();
        assert!((recs[0].h_fwd - (-(0.8f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn bigram_by_hand() {
        // "a b" trains (<s>,a) and (a,b); V = 3
        let lm = NgramLm::train(&["a b"], 2).unwrap();
        let expected = -((2.0f64 / 4.0).ln() + (2.0f64 / 4.0).ln()) / 2.0;
        assert!((lm.cross_entropy("a b") - expected).abs() < 1e-12);
        assert!((lm.cross_entropy("") - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rare_tokens_score_worse() {
        let shard = ["the cat the cat", "zyx qwv", "the cat the the"];
        let recs = fallback_lm_score(&shard, 1).unwrap();
        assert!(recs[1].h_fwd > recs[0].h_fwd);
        let again = fallback_lm_score(&["x y", "x y"], 3).unwrap();
        assert_eq!(again[0].h_fwd, again[1].h_fwd);
    }

    #[test]
    fn lm_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(fallback_lm_score(&empty, 2), Err(XentError::EmptyShard)));
        assert!(matches!(fallback_lm_score(&["a"], 0), Err(XentError::InvalidOrder(0))));
        assert!(matches!(fallback_lm_score(&["a"], 6), Err(XentError::InvalidOrder(6))));
    }
}
