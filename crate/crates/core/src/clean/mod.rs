//! Corpus cleaning: per-pair filters, rule configuration, and the streaming
//! rule pipeline that produces a filtered shard plus a [`FilterReport`].

pub mod engine;
pub mod filters;
pub mod rules;

pub use engine::{dedup_pairs, run_pipeline, run_pipeline_shard, CleanPipeline, FilterReport, RuleReport};
pub use filters::{
    filter_alpha_ratio, filter_contains_link, filter_len_bounds, filter_len_ratio,
    filter_max_len, filter_min_avg_len_corpus, filter_repeat_noise, filter_requires_diacritic,
    filter_script_presence, CorpusDecision, Side, Sides, Verdict, CZECH_DIACRITICS,
};
pub use rules::{parse_rule, parse_rules, validate_rules, CleanRule, DedupMode, RuleError, RuleKind};
