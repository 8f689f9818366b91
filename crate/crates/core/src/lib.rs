//! Corpus engineering for machine-translation training data: cleaning,
//! BPE subwords, Chinese segmentation, Devanagari to Gujarati
//! transliteration, rare n-gram data selection, cross-entropy filtering and
//! training blends.

pub mod cjk;
pub mod clean;
pub mod corpus;
pub mod pipeline;
pub mod script;
pub mod select;
pub mod subword;
pub mod translit;
pub mod xent;
