//! Byte-pair-encoding subwords: merge learning, segmentation with `@@ `
//! continuation markers, vocabulary pruning and training-data sampling.

mod learn;
mod model;
mod sample;
mod vocab;

use std::path::{Path, PathBuf};

pub use learn::{bpe_learn, learn_from_counts};
pub use model::{desegment_with, BpeModel, DEFAULT_MARKER};
pub use sample::{sample_for_training, sample_indices};
pub use vocab::{count_tokens, vocab_build_and_prune, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum SubwordError {
    #[error("corpus has no tokens to learn from")]
    EmptyCorpus,
    #[error("invalid BPE model: {0}")]
    InvalidModel(String),
    #[error("invalid vocabulary file: {0}")]
    InvalidVocabulary(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SubwordError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        SubwordError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Segments `sentence` with `model`.
pub fn bpe_apply(sentence: &str, model: &BpeModel) -> String {
    model.apply(sentence, None)
}

pub fn bpe_desegment(segmented: &str, model: &BpeModel) -> String {
    model.desegment(segmented)
}
