// SPDX-License-Identifier: MIT OR Apache-2.0

//! Token sequences, labeled examples and part-of-speech annotations.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penn Treebank II tags plus the punctuation and extension tags emitted by
/// common PTB taggers.
pub const PTB_TAGS: &[&str] = &[
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", ".", ",", ":", "``", "''",
    "-LRB-", "-RRB-", "#", "$", "HYPH", "NFP", "ADD", "AFX", "XX",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Position of the first token in the whole corpus.
    pub source_offset: usize,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>, source_offset: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        Ok(Self { ids, source_offset })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn check_range(&self, vocab_size: usize) -> Result<()> {
        match self.ids.iter().find(|&&id| id as usize >= vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub sequence: TokenSequence,
    pub label: u8,
}

impl LabeledExample {
    pub fn new(sequence: TokenSequence, label: u8, index: usize) -> Result<Self> {
        if label > 1 {
            return Err(Error::NonBinaryLabel { index, label });
        }
        Ok(Self { sequence, label })
    }
}

/// An ordered list of sequences, optionally with one binary label per
/// sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sequences: Vec<TokenSequence>,
    pub labels: Option<Vec<u8>>,
}

impl Corpus {
    /// Builds a corpus from sequences, re-basing offsets so they count tokens
    /// from the start of this corpus.
    pub fn from_sequences<I: IntoIterator<Item = Vec<u32>>>(sequences: I) -> Result<Self> {
        let mut out = Vec::new();
        let mut offset = 0;
        for ids in sequences {
            let len = ids.len();
            out.push(TokenSequence::new(ids, offset)?);
            offset += len;
        }
        Ok(Self {
            sequences: out,
            labels: None,
        })
    }

    pub fn from_labeled(examples: &[LabeledExample]) -> Self {
        let mut offset = 0;
        let mut sequences = Vec::with_capacity(examples.len());
        for ex in examples {
            sequences.push(TokenSequence {
                ids: ex.sequence.ids.clone(),
                source_offset: offset,
            });
            offset += ex.sequence.len();
        }
        Self {
            sequences,
            labels: Some(examples.iter().map(|e| e.label).collect()),
        }
    }

    pub fn token_count(&self) -> usize {
        self.sequences.iter().map(TokenSequence::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn check_range(&self, vocab_size: usize) -> Result<()> {
        self.sequences.iter().try_for_each(|s| s.check_range(vocab_size))
    }

    /// Keeps the first `k` tokens in order. The sequence crossing the budget
    /// is truncated; labels follow their sequences.
    pub fn slice_first_tokens(&self, k: usize) -> Result<Corpus> {
        if k == 0 {
            return Err(Error::InvalidArgument("token budget must be at least 1".into()));
        }
        let mut remaining = k;
        let mut sequences = Vec::new();
        for seq in &self.sequences {
            if remaining == 0 {
                break;
            }
            let take = seq.len().min(remaining);
            sequences.push(TokenSequence {
                ids: seq.ids[..take].to_vec(),
                source_offset: seq.source_offset,
            });
            remaining -= take;
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| l[..sequences.len()].to_vec());
        Ok(Corpus { sequences, labels })
    }
}

/// One tag per corpus token, in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagAnnotation {
    pub tags: Vec<String>,
}

impl TagAnnotation {
    /// Checks that `annotated` (token, tag) pairs match `corpus_tokens`
    /// position by position and that every tag is in `inventory`.
    pub fn align(
        corpus_tokens: &[&str],
        annotated: &[(&str, &str)],
        inventory: &[&str],
    ) -> Result<Self> {
        let common = corpus_tokens.len().min(annotated.len());
        for (position, (&expected, &(found, tag))) in
            corpus_tokens.iter().zip(annotated.iter()).enumerate()
        {
            if expected != found {
                return Err(Error::TokenMismatch {
                    position,
                    expected: expected.to_string(),
                    found: found.to_string(),
                });
            }
            if !inventory.contains(&tag) {
                return Err(Error::UnknownTag {
                    position,
                    tag: tag.to_string(),
                });
            }
        }
        if corpus_tokens.len() != annotated.len() {
            return Err(Error::LengthMismatch {
                position: common,
                corpus_len: corpus_tokens.len(),
                annotation_len: annotated.len(),
            });
        }
        Ok(Self {
            tags: annotated.iter().map(|(_, t)| t.to_string()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn slice_first(&self, k: usize) -> TagAnnotation {
        TagAnnotation {
            tags: self.tags[..k.min(self.tags.len())].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ten_token_corpus() -> Corpus {
        Corpus::from_sequences([vec![0, 1, 2], vec![3, 4, 5, 6], vec![7, 8, 9]]).unwrap()
    }

    #[test]
    fn slice_keeps_prefix() {
        let c = ten_token_corpus().slice_first_tokens(4).unwrap();
        assert_eq!(c.token_count(), 4);
        assert_eq!(c.sequences[0].ids, vec![0, 1, 2]);
        assert_eq!(c.sequences[1].ids, vec![3]);
        assert_eq!(c.sequences[1].source_offset, 3);
    }

    #[test]
    fn slice_clamps_to_corpus() {
        let full = ten_token_corpus();
        assert_eq!(full.slice_first_tokens(1000).unwrap(), full);
    }

    #[test]
    fn slice_zero_is_error() {
        assert!(ten_token_corpus().slice_first_tokens(0).is_err());
    }

    #[test]
    fn slice_carries_labels() {
        let mut c = ten_token_corpus();
        c.labels = Some(vec![1, 0, 1]);
        let s = c.slice_first_tokens(5).unwrap();
        assert_eq!(s.labels, Some(vec![1, 0]));
    }

    #[test]
    fn align_matching() {
        let a = TagAnnotation::align(&["the", "dog"], &[("the", "DT"), ("dog", "NN")], PTB_TAGS)
            .unwrap();
        assert_eq!(a.tags, vec!["DT", "NN"]);
    }

    #[test]
    fn align_extra_line() {
        let err = TagAnnotation::align(
            &["the", "dog"],
            &[("the", "DT"), ("dog", "NN"), ("runs", "VBZ")],
            PTB_TAGS,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                position: 2,
                corpus_len: 2,
                annotation_len: 3
            }
        );
    }

    #[test]
    fn align_token_mismatch() {
        let err = TagAnnotation::align(&["the", "cat"], &[("the", "DT"), ("dog", "NN")], PTB_TAGS)
            .unwrap_err();
        assert!(matches!(err, Error::TokenMismatch { position: 1, .. }));
    }

    #[test]
    fn align_unknown_tag() {
        let err = TagAnnotation::align(&["the"], &[("the", "DET")], PTB_TAGS).unwrap_err();
        assert!(matches!(err, Error::UnknownTag { position: 0, .. }));
    }

    #[test]
    fn align_iff_tokens_match_exhaustive() {
        // every pair of token strings over a 3-letter alphabet, lengths 0..=2
        let alphabet = ["a", "b", "c"];
        let mut words: Vec<Vec<&str>> = vec![vec![]];
        for &x in &alphabet {
            words.push(vec![x]);
            for &y in &alphabet {
                words.push(vec![x, y]);
            }
        }
        for corpus in &words {
            for ann in &words {
                let pairs: Vec<(&str, &str)> = ann.iter().map(|&t| (t, "NN")).collect();
                let ok = TagAnnotation::align(corpus, &pairs, PTB_TAGS).is_ok();
                assert_eq!(ok, corpus == ann, "{corpus:?} vs {ann:?}");
            }
        }
    }

    #[test]
    fn labels_must_be_binary() {
        let seq = TokenSequence::new(vec![0], 0).unwrap();
        assert!(LabeledExample::new(seq.clone(), 1, 0).is_ok());
        assert_eq!(
            LabeledExample::new(seq, 2, 5),
            Err(Error::NonBinaryLabel { index: 5, label: 2 })
        );
    }
}
