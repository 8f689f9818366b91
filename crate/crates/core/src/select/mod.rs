//! Rare n-gram data selection and training blends.

mod blend;
mod finetune;
mod ngram;

use std::path::{Path, PathBuf};

pub use blend::{build_blend, largest_remainder, BlendComponent, BlendItem, BlendSpec, Sampling};
pub use finetune::{rare_ngrams, select_finetune_data, CandidatePool, SelectionConfig, Selected};
pub use ngram::{build_ngram_index, distinct_ngrams, for_each_ngram, NRange, NgramIndex};

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("no n-gram index for shard {0}")]
    MissingIndex(String),
    #[error("index for {shard} covers n={}..{}, selection needs n={}..{}", index.min, index.max, wanted.min, wanted.max)]
    IndexRange {
        shard: String,
        index: NRange,
        wanted: NRange,
    },
    #[error("blend component {0} has no records")]
    EmptyComponent(String),
    #[error("invalid n-gram index: {0}")]
    InvalidIndex(String),
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SelectError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SelectError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
