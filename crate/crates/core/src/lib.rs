//! Semantic textual relatedness toolkit.
//!
//! Scores sentence pairs with lexical overlap, powered vector distances,
//! a learned feed-forward regressor over a 42-column feature vector,
//! Normalized Google Distance over a local corpus, and word embeddings
//! trained from co-occurrence counts. Results are evaluated with Spearman
//! rank correlation per language.

pub mod bigram;
pub mod checkpoint;
pub mod contrastive;
pub mod corpus;
pub mod embfile;
pub mod eval;
pub mod features;
pub mod lexical;
pub mod ngd;
pub mod regressor;
pub mod vecmath;
pub mod cli;

use thiserror::Error;

/// Any error the toolkit can raise, tagged with its owning module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Vec(#[from] vecmath::VecError),
    #[error(transparent)]
    Embeddings(#[from] embfile::EmbeddingFileError),
    #[error(transparent)]
    Features(#[from] features::FeatureError),
    #[error(transparent)]
    Regressor(#[from] regressor::RegressorError),
    #[error(transparent)]
    Checkpoint(#[from] checkpoint::CheckpointError),
    #[error(transparent)]
    Contrastive(#[from] contrastive::ContrastiveError),
    #[error(transparent)]
    Ngd(#[from] ngd::NgdError),
    #[error(transparent)]
    Bigram(#[from] bigram::BigramError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Cli(String),
}

fn variant_name<E: std::fmt::Debug>(e: &E) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .next()
        .unwrap_or_default()
        .to_string()
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Vec(_) => "vecmath",
            Error::Embeddings(_) => "embfile",
            Error::Features(_) => "features",
            Error::Regressor(_) => "regressor",
            Error::Checkpoint(_) => "checkpoint",
            Error::Contrastive(_) => "contrastive",
            Error::Ngd(_) => "ngd",
            Error::Bigram(_) => "bigram",
            Error::Eval(_) => "eval",
            Error::Io(_) | Error::Cli(_) => "cli",
        }
    }

    /// `module::Variant`, e.g. `ngd::UnknownTerm`.
    pub fn code(&self) -> String {
        let variant = match self {
            Error::Corpus(e) => variant_name(e),
            Error::Vec(e) => variant_name(e),
            Error::Embeddings(e) => variant_name(e),
            Error::Features(e) => variant_name(e),
            Error::Regressor(e) => variant_name(e),
            Error::Checkpoint(e) => variant_name(e),
            Error::Contrastive(e) => variant_name(e),
            Error::Ngd(e) => variant_name(e),
            Error::Bigram(e) => variant_name(e),
            Error::Eval(e) => variant_name(e),
            Error::Io(_) => "Io".to_string(),
            Error::Cli(_) => "Invalid".to_string(),
        };
        format!("{}::{}", self.module(), variant)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
