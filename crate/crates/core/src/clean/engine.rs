//! Streaming rule pipeline with first-failing-rule attribution.
//!
//! Stateless rules are evaluated in parallel per chunk; dedup rules run in a
//! sequential pass over the chunk in input order, so results match a purely
//! sequential evaluation for any worker count.

use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{CorpusError, CorpusShard, Record, ShardKind, ShardWriter};

use super::filters::{Sides, Verdict};
use super::rules::{CleanRule, DedupMode, RuleKind};

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub rule_id: String,
    pub rule: &'static str,
    pub examined: u64,
    pub rejected: u64,
    #[serde(skip_serializing_if = "is_zero")]
    pub rejected_empty_side: u64,
}

fn is_zero(n: &u64) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub total_in: u64,
    pub total_out: u64,
    pub rules: Vec<RuleReport>,
}

impl FilterReport {
    fn new(rules: &[CleanRule]) -> Self {
        FilterReport {
            total_in: 0,
            total_out: 0,
            rules: rules
                .iter()
                .map(|r| RuleReport {
                    rule_id: r.id.clone(),
                    rule: r.kind.name(),
                    examined: 0,
                    rejected: 0,
                    rejected_empty_side: 0,
                })
                .collect(),
        }
    }

    /// Fills `examined` from the rejection counts: a rule sees every record
    /// not rejected by an earlier rule.
    fn finalize(&mut self) {
        let mut remaining = self.total_in;
        for r in &mut self.rules {
            r.examined = remaining;
            remaining -= r.rejected;
        }
        debug_assert_eq!(remaining, self.total_out);
    }

    pub fn rejected_total(&self) -> u64 {
        self.rules.iter().map(|r| r.rejected).sum()
    }
}

/// Outcome for one record: index of the first failing rule, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejection {
    pub rule: usize,
    pub verdict: Verdict,
}

struct DedupState {
    rule: usize,
    mode: DedupMode,
    seen: HashSet<Box<str>>,
}

/// Reusable pipeline over an ordered rule list.
pub struct CleanPipeline {
    rules: Vec<CleanRule>,
    dedup: Vec<DedupState>,
    report: FilterReport,
    key: String,
}

impl CleanPipeline {
    pub fn new(rules: Vec<CleanRule>) -> Self {
        let dedup = rules
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r.kind {
                RuleKind::Dedup { mode } => Some(DedupState {
                    rule: i,
                    mode,
                    seen: HashSet::new(),
                }),
                _ => None,
            })
            .collect();
        let report = FilterReport::new(&rules);
        CleanPipeline {
            rules,
            dedup,
            report,
            key: String::new(),
        }
    }

    pub fn rules(&self) -> &[CleanRule] {
        &self.rules
    }

    fn first_stateless_failure(&self, sides: Sides<'_>) -> Option<Rejection> {
        self.rules.iter().enumerate().find_map(|(i, r)| {
            if r.kind.is_stateful() {
                return None;
            }
            match r.kind.check(sides) {
                Verdict::Keep => None,
                verdict => Some(Rejection { rule: i, verdict }),
            }
        })
    }

    /// Evaluates a chunk of records in order, updating dedup state and the
    /// report. Returns one outcome per record.
    pub fn process_chunk(&mut self, chunk: &[Record]) -> Vec<Option<Rejection>> {
        let stateless: Vec<Option<Rejection>> = chunk
            .par_iter()
            .map(|r| self.first_stateless_failure(Sides::from(r)))
            .collect();

        let mut out = Vec::with_capacity(chunk.len());
        for (record, failure) in chunk.iter().zip(stateless) {
            let limit = failure.map_or(usize::MAX, |f| f.rule);
            let mut outcome = failure;
            for state in self.dedup.iter_mut().take_while(|d| d.rule < limit) {
                self.key.clear();
                match state.mode {
                    DedupMode::Pair => {
                        self.key.push_str(&record.src);
                        if let Some(t) = &record.tgt {
                            self.key.push('\n');
                            self.key.push_str(t);
                        }
                    }
                    DedupMode::Src => self.key.push_str(&record.src),
                    DedupMode::Tgt => self.key.push_str(record.tgt_str().unwrap_or_default()),
                }
                if state.seen.contains(self.key.as_str()) {
                    outcome = Some(Rejection {
                        rule: state.rule,
                        verdict: Verdict::Reject,
                    });
                    break;
                }
                state.seen.insert(self.key.as_str().into());
            }
            self.report.total_in += 1;
            match outcome {
                Some(rej) => {
                    let r = &mut self.report.rules[rej.rule];
                    r.rejected += 1;
                    if rej.verdict == Verdict::RejectEmptySide {
                        r.rejected_empty_side += 1;
                    }
                }
                None => self.report.total_out += 1,
            }
            out.push(outcome);
        }
        out
    }

    pub fn finish(mut self) -> FilterReport {
        self.report.finalize();
        self.report
    }
}

/// In-memory run: returns surviving records (original order) and the report.
pub fn run_pipeline(records: &[Record], rules: &[CleanRule]) -> (Vec<Record>, FilterReport) {
    let mut pipeline = CleanPipeline::new(rules.to_vec());
    let mut kept = Vec::new();
    for chunk in records.chunks(CHUNK) {
        let outcomes = pipeline.process_chunk(chunk);
        kept.extend(
            chunk
                .iter()
                .zip(outcomes)
                .filter(|(_, o)| o.is_none())
                .map(|(r, _)| r.clone()),
        );
    }
    (kept, pipeline.finish())
}

/// Streams `shard` through the rules into `output`. When `reject_log` is
/// given, writes one `id<TAB>rule_id` line per rejected record.
pub fn run_pipeline_shard(
    shard: &CorpusShard,
    rules: &[CleanRule],
    name: impl Into<String>,
    output: &[PathBuf],
    mut reject_log: Option<&mut dyn Write>,
) -> Result<(CorpusShard, FilterReport), CorpusError> {
    let mut pipeline = CleanPipeline::new(rules.to_vec());
    let mut writer = ShardWriter::create(output, shard.kind)?;
    let mut records = shard.records()?;
    let mut chunk: Vec<Record> = Vec::with_capacity(CHUNK);
    loop {
        chunk.clear();
        for r in records.by_ref().take(CHUNK) {
            chunk.push(r?);
        }
        if chunk.is_empty() {
            break;
        }
        let outcomes = pipeline.process_chunk(&chunk);
        for (record, outcome) in chunk.iter().zip(outcomes) {
            match outcome {
                None => writer.write(record)?,
                Some(rej) => {
                    if let Some(log) = reject_log.as_mut() {
                        let id = &pipeline.rules[rej.rule].id;
                        let suffix = if rej.verdict == Verdict::RejectEmptySide {
                            ":empty_side"
                        } else {
                            ""
                        };
                        writeln!(log, "{}\t{}{}", record.id, id, suffix)
                            .map_err(|e| CorpusError::io(std::path::Path::new("<reject-log>"), e))?;
                    }
                }
            }
        }
    }
    let line_count = writer.finish()?;
    let kind: ShardKind = shard.kind;
    Ok((
        CorpusShard {
            name: name.into(),
            kind,
            paths: output.to_vec(),
            line_count,
        },
        pipeline.finish(),
    ))
}

/// Removes later copies of identical pairs.
pub fn dedup_pairs(records: &[Record]) -> (Vec<Record>, FilterReport) {
    run_pipeline(records, &[CleanRule::new(RuleKind::Dedup { mode: DedupMode::Pair })])
}
