// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steps shared by the CLI subcommands and the demo recipes.

use txray_core::corpus::{Corpus, LabeledExample, TagAnnotation};
use txray_core::encoder::{train_lm, Dims, EncoderParams, LmConfig, Snapshot, TrainRun};
use txray_core::preference::{aggregate, ModelPreference};
use txray_core::trace::{MagnitudeMode, RecordOptions, TraceMatrix};
use txray_core::vocab::Vocabulary;

use crate::config::RunConfig;
use crate::error::Result;
use crate::parallel;
use crate::text;

/// Vocabulary over every text the experiment touches, so labeled data is
/// encoded with real ids rather than collapsing onto `<unk>`.
pub fn build_vocab(corpus: &[Vec<String>], labeled: &[&[(u8, Vec<String>)]]) -> Result<Vocabulary> {
    let corpus_text = corpus.iter().map(|l| l.join(" "));
    let labeled_text = labeled.iter().flat_map(|set| set.iter().map(|(_, t)| t.join(" ")));
    let all: Vec<String> = corpus_text.chain(labeled_text).collect();
    Ok(Vocabulary::build(all.iter().map(String::as_str), 1)?)
}

pub fn lm_config(cfg: &RunConfig) -> LmConfig {
    LmConfig {
        epochs: cfg.epochs,
        snapshot_epochs: cfg.snapshot_epochs.clone(),
        seed: cfg.seed,
        ..LmConfig::default()
    }
}

pub fn pretrain(vocab: &Vocabulary, corpus: &Corpus, cfg: &RunConfig) -> Result<TrainRun> {
    let dims = Dims {
        vocab: vocab.len(),
        embed: cfg.embed,
        hidden: cfg.hidden,
    };
    let params = EncoderParams::init(cfg.seed, dims)?;
    Ok(train_lm(params, corpus, &lm_config(cfg))?)
}

/// Labeled examples as one corpus for tracing, with labels attached.
pub fn labeled_corpus(examples: &[LabeledExample]) -> Corpus {
    Corpus::from_labeled(examples)
}

/// First `budget` tokens of a corpus and its annotation.
pub fn slice(corpus: &Corpus, tags: Option<&TagAnnotation>, budget: Option<usize>) -> Result<(Corpus, Option<TagAnnotation>)> {
    match budget {
        None => Ok((corpus.clone(), tags.cloned())),
        Some(k) => {
            let c = corpus.slice_first_tokens(k)?;
            let n = c.token_count();
            Ok((c, tags.map(|t| t.slice_first(n))))
        }
    }
}

/// Trace of one stage plus its aggregate.
pub struct Stage {
    pub trace: TraceMatrix,
    pub preference: ModelPreference,
}

pub fn stage(
    snapshot: &Snapshot,
    corpus: &Corpus,
    tags: Option<&TagAnnotation>,
    corpus_id: &str,
    budget: Option<usize>,
    mode: MagnitudeMode,
) -> Result<Stage> {
    let (c, t) = slice(corpus, tags, budget)?;
    let opts = RecordOptions {
        mode,
        annotations: t.as_ref(),
        mask: None,
    };
    let trace = parallel::record(snapshot, &c, corpus_id, budget, &opts, parallel::thread_count())?;
    let preference = aggregate(&trace)?;
    Ok(Stage { trace, preference })
}

/// Corpus lines plus optional annotation, read from disk.
pub fn load_corpus(
    vocab: &Vocabulary,
    corpus_path: &std::path::Path,
    annotations: Option<&std::path::Path>,
) -> Result<(Corpus, Option<TagAnnotation>)> {
    let lines = text::read_corpus(corpus_path)?;
    let tags = annotations.map(|p| text::read_annotations(p, &lines)).transpose()?;
    Ok((text::encode_corpus(vocab, &lines)?, tags))
}
