//! Slow, obviously-correct reference implementations. They share no code
//! with the library so that agreement means something.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub fn split_tokens(s: &str) -> Vec<String> {
    s.split([' ', '\t'])
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// BPE merge learning that recounts every adjacent pair from scratch at
/// each step. Ties go to the lexicographically smallest (left, right).
pub fn bpe_merges_bruteforce(words: &BTreeMap<String, u64>, num_merges: usize) -> Vec<(String, String)> {
    let mut segs: Vec<(Vec<String>, u64)> = words
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (w.chars().map(|ch| ch.to_string()).collect(), c))
        .collect();
    let mut merges = Vec::new();
    while merges.len() < num_merges {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (syms, c) in &segs {
            for i in 0..syms.len().saturating_sub(1) {
                *counts.entry((syms[i].clone(), syms[i + 1].clone())).or_insert(0) += c;
            }
        }
        // BTreeMap iterates in key order, so the first maximum is the
        // lexicographically smallest pair
        let mut best: Option<(&(String, String), u64)> = None;
        for (pair, &c) in &counts {
            if best.map_or(true, |(_, bc)| c > bc) {
                best = Some((pair, c));
            }
        }
        let Some((pair, count)) = best else { break };
        if count < 2 {
            break;
        }
        let (a, b) = pair.clone();
        for (syms, _) in segs.iter_mut() {
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                    out.push(format!("{a}{b}"));
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
        merges.push((a, b));
    }
    merges
}

pub fn word_counts(lines: &[String]) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    for l in lines {
        for t in split_tokens(l) {
            *m.entry(t).or_insert(0) += 1;
        }
    }
    m
}

/// All token n-grams for n in `nmin..=nmax`, counted by enumeration.
pub fn ngram_counts_bruteforce(sentences: &[String], nmin: usize, nmax: usize) -> BTreeMap<Vec<String>, u64> {
    let mut m = BTreeMap::new();
    for s in sentences {
        let toks = split_tokens(s);
        for n in nmin..=nmax {
            for start in 0..toks.len() {
                if start + n <= toks.len() {
                    *m.entry(toks[start..start + n].to_vec()).or_insert(0) += 1;
                }
            }
        }
    }
    m
}

fn contains_seq(hay: &[String], needle: &[String]) -> bool {
    (0..hay.len()).any(|i| i + needle.len() <= hay.len() && hay[i..i + needle.len()] == *needle)
}

/// Rare n-gram selection by enumerating every (sentence, test n-gram) pair.
/// Returns (shard, id, score) sorted by score desc, shard, id.
pub fn select_bruteforce(
    test: &[String],
    pools: &[(String, Vec<String>)],
    threshold: u64,
    nmin: usize,
    nmax: usize,
    budget: usize,
) -> Vec<(String, u64, u32)> {
    let test_ngrams: BTreeSet<Vec<String>> = ngram_counts_bruteforce(test, nmin, nmax).into_keys().collect();
    let mut out = Vec::new();
    for (name, sentences) in pools {
        let counts = ngram_counts_bruteforce(sentences, nmin, nmax);
        for (id, s) in sentences.iter().enumerate() {
            let toks = split_tokens(s);
            let mut score = 0u32;
            for g in &test_ngrams {
                let c = counts.get(g).copied().unwrap_or(0);
                if c >= 1 && c < threshold && contains_seq(&toks, g) {
                    score += 1;
                }
            }
            if score > 0 {
                out.push((name.clone(), id as u64, score));
            }
        }
    }
    out.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    out.truncate(budget);
    out
}

/// Largest-remainder apportionment in exact integer arithmetic for weights
/// `num[i] / denom` that sum to one.
pub fn largest_remainder_exact(num: &[u64], denom: u64, total: u64) -> Vec<u64> {
    let mut counts: Vec<u64> = num.iter().map(|&k| k * total / denom).collect();
    let rems: Vec<u64> = num.iter().map(|&k| k * total % denom).collect();
    let left = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..num.len()).collect();
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in order.iter().take(left as usize) {
        counts[i] += 1;
    }
    counts
}

/// Ids removed by a percentile cut: the floor(p * n) worst scores, higher id
/// first among equal scores.
pub fn percentile_removed(scores: &[(u64, f64)], remove: usize) -> BTreeSet<u64> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(b.0.cmp(&a.0)));
    v.into_iter().take(remove).map(|(id, _)| id).collect()
}
