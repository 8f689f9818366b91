//! Declarative multi-stage corpus builds.

mod config;
mod run;

use std::path::{Path, PathBuf};

pub use config::{
    plan, validate, ArtifactKind, ConfigError, Entry, PipelineConfig, Plan, ScoreSource, Section,
    SourcePlan, StageOp, StagePlan, STAGE_NAMES,
};
pub use run::{config_hash, run, PipelineError, RunManifest, RunOptions, StageRecord};

use crate::corpus::CorpusError;
use crate::select::SelectError;
use crate::subword::SubwordError;
use crate::translit::TranslitError;
use crate::xent::XentError;

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Subword(#[from] SubwordError),
    #[error(transparent)]
    Translit(#[from] TranslitError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Xent(#[from] XentError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl StageError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StageError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
