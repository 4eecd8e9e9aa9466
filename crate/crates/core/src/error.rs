// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("annotation misaligned at position {position}: expected token {expected:?}, found {found:?}")]
    TokenMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("annotation length mismatch at position {position}: corpus has {corpus_len} tokens, annotation has {annotation_len}")]
    LengthMismatch {
        position: usize,
        corpus_len: usize,
        annotation_len: usize,
    },

    #[error("tag {tag:?} at position {position} is not in the tag inventory")]
    UnknownTag { position: usize, tag: String },

    #[error("model dimensions must be positive (vocab={vocab}, embed={embed}, hidden={hidden})")]
    ZeroDimension {
        vocab: usize,
        embed: usize,
        hidden: usize,
    },

    #[error("parameter buffer has {found} values, dimensions require {expected}")]
    ParamShape { expected: usize, found: usize },

    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("label {label} at example {index} is not binary")]
    NonBinaryLabel { index: usize, label: u8 },

    #[error("snapshot {0:?} has no classifier head")]
    MissingHead(String),

    #[error("prune mask has length {found}, model has {hidden} hidden units")]
    MaskLength { found: usize, hidden: usize },

    #[error("prune mask removes every hidden unit")]
    EmptyMask,

    #[error("Hellinger distance is ill-defined: the {0} distribution is empty")]
    IllDefined(&'static str),

    #[error("incompatible {what}: {a} vs {b}")]
    Incompatible {
        what: &'static str,
        a: String,
        b: String,
    },

    #[error("neuron {neuron} out of range for {hidden} hidden units")]
    NeuronOutOfRange { neuron: usize, hidden: usize },

    #[error("activation {0} is negative or not finite")]
    InvalidActivation(f64),

    #[error("requested {requested} neurons but only {available} have nonzero activation mass")]
    NotEnoughNeurons { requested: usize, available: usize },

    #[error("relative change is undefined for a zero baseline")]
    ZeroBaseline,

    #[error("trace record {0} carries no tag")]
    Untagged(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
