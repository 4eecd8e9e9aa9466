// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";

/// Dense token ↔ id mapping. Ids are `0..len()`, the unknown token is last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
    unk_id: u32,
}

impl Vocabulary {
    /// Counts whitespace separated tokens over `texts` and keeps those seen at
    /// least `min_count` times, ordered by descending frequency with ties
    /// broken by first occurrence.
    pub fn build<'a, I>(texts: I, min_count: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        // token -> (count, first position)
        let mut counts: BTreeMap<&'a str, (usize, usize)> = BTreeMap::new();
        let mut position = 0usize;
        for text in texts {
            for tok in text.split_whitespace() {
                counts.entry(tok).or_insert((0, position)).0 += 1;
                position += 1;
            }
        }
        if position == 0 {
            return Err(Error::EmptyInput("vocabulary text stream"));
        }
        let mut kept: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(tok, (count, _))| *count >= min_count && *tok != UNK_TOKEN)
            .map(|(tok, (count, first))| (tok, count, first))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let mut tokens: Vec<String> = kept.into_iter().map(|(t, _, _)| t.to_string()).collect();
        tokens.push(UNK_TOKEN.to_string());
        Self::from_tokens(tokens, UNK_TOKEN)
    }

    /// Rebuilds a vocabulary from its ordered token list.
    pub fn from_tokens(tokens: Vec<String>, unk: &str) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(alloc::format!("duplicate token {tok:?}")));
            }
        }
        let unk_id = *index
            .get(unk)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown token {unk:?} missing")))?;
        Ok(Self { tokens, index, unk_id })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(self.unk_id)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Maps whitespace separated text to ids, unknown tokens to `unk_id`.
    pub fn encode(&self, text: &str, source_offset: usize) -> Result<TokenSequence> {
        let ids: Vec<u32> = text.split_whitespace().map(|t| self.id(t)).collect();
        TokenSequence::new(ids, source_offset)
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            let tok = self.token(id).ok_or(Error::TokenOutOfRange {
                id,
                vocab_size: self.len(),
            })?;
            if i > 0 {
                out.push(' ');
            }
            out.push_str(tok);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn builds_in_frequency_order() {
        let v = Vocabulary::build(["a b a"], 1).unwrap();
        assert_eq!(v.tokens(), &["a", "b", "<unk>"]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.unk_id(), 2);
    }

    #[test]
    fn min_count_threshold() {
        let v = Vocabulary::build(["a b a"], 2).unwrap();
        assert_eq!(v.tokens(), &["a", "<unk>"]);
        assert_eq!(v.id("b"), v.unk_id());
    }

    #[test]
    fn ties_break_by_first_occurrence() {
        let v = Vocabulary::build(["c b", "a b c a"], 1).unwrap();
        // counts: c=2 (first 0), b=2 (first 1), a=2 (first 2)
        assert_eq!(v.tokens(), &["c", "b", "a", "<unk>"]);
    }

    #[test]
    fn empty_stream_is_rejected() {
        assert_eq!(
            Vocabulary::build(["", "  "], 1),
            Err(Error::EmptyInput("vocabulary text stream"))
        );
        assert!(Vocabulary::build(["a"], 0).is_err());
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let v = Vocabulary::build(["a b"], 1).unwrap();
        let seq = v.encode("a c", 0).unwrap();
        assert_eq!(seq.ids, vec![v.id("a"), v.unk_id()]);
    }

    #[test]
    fn empty_text_is_rejected() {
        let v = Vocabulary::build(["a b"], 1).unwrap();
        assert_eq!(v.encode("", 0), Err(Error::EmptyInput("token sequence")));
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let v = Vocabulary::build(["a b"], 1).unwrap();
        assert!(matches!(v.decode(&[7]), Err(Error::TokenOutOfRange { id: 7, .. })));
    }

    #[test]
    fn deterministic_across_builds() {
        let text = "x y z y x q q q";
        assert_eq!(Vocabulary::build([text], 1).unwrap(), Vocabulary::build([text], 1).unwrap());
    }

    proptest! {
        #[test]
        fn dense_index_over_random_stream(words in prop::collection::vec(0u32..500, 10_000)) {
            let text: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            let text = text.join(" ");
            let v = Vocabulary::build([text.as_str()], 1).unwrap();
            for (i, tok) in v.tokens().iter().enumerate() {
                prop_assert_eq!(v.id(tok), i as u32);
            }
        }

        #[test]
        fn encode_decode_round_trip(words in prop::collection::vec(0usize..6, 1..40)) {
            let v = Vocabulary::build(["the cat sat on a mat"], 1).unwrap();
            let vocab_words = ["the", "cat", "sat", "on", "a", "mat"];
            let text: Vec<&str> = words.iter().map(|&i| vocab_words[i]).collect();
            let text = text.join(" ");
            let seq = v.encode(&text, 0).unwrap();
            prop_assert!(seq.ids.iter().all(|&id| (id as usize) < v.len()));
            prop_assert_eq!(v.decode(&seq.ids).unwrap(), text);
        }
    }
}
