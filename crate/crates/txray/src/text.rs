// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plain-text corpus, tag annotation and labeled dataset files.
//!
//! * corpus: one sequence per line, tokens separated by spaces
//! * annotations: `token<TAB>tag` per line, a blank line after each sequence
//! * labeled data: `label<TAB>token token ...` per line, label 0 or 1

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use txray_core::corpus::{Corpus, LabeledExample, TagAnnotation, PTB_TAGS};
use txray_core::vocab::Vocabulary;

use crate::error::{Error, Result};

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Token lines of a corpus file. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let lines = parse_corpus(&read_to_string(path)?);
    if lines.is_empty() {
        return Err(Error::format(path, "corpus has no tokens"));
    }
    Ok(lines)
}

pub fn format_corpus(lines: &[Vec<String>]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l.join(" "));
        out.push('\n');
    }
    out
}

/// One annotated token with the file line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedToken {
    pub token: String,
    pub tag: String,
    pub line: usize,
}

/// Annotated sequences, split at blank lines.
pub fn parse_annotations(path: &Path, text: &str) -> Result<Vec<Vec<AnnotatedToken>>> {
    let mut sequences = Vec::new();
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            if !current.is_empty() {
                sequences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (token, tag) = raw
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line, "expected token<TAB>tag"))?;
        if token.is_empty() || tag.is_empty() || tag.contains('\t') || token.contains(char::is_whitespace) {
            return Err(Error::parse(path, line, "expected token<TAB>tag"));
        }
        current.push(AnnotatedToken {
            token: token.into(),
            tag: tag.into(),
            line,
        });
    }
    if !current.is_empty() {
        sequences.push(current);
    }
    Ok(sequences)
}

/// Checks annotation sequences against corpus lines token by token and
/// returns the flat tag list. Errors cite the annotation file line.
pub fn align_annotations(path: &Path, corpus: &[Vec<String>], annotated: &[Vec<AnnotatedToken>]) -> Result<TagAnnotation> {
    let corpus_flat: Vec<&str> = corpus.iter().flatten().map(String::as_str).collect();
    let ann_flat: Vec<&AnnotatedToken> = annotated.iter().flatten().collect();
    let pairs: Vec<(&str, &str)> = ann_flat.iter().map(|a| (a.token.as_str(), a.tag.as_str())).collect();
    let last_line = ann_flat.last().map_or(0, |a| a.line);
    let line_of = |pos: usize| ann_flat.get(pos).map_or(last_line + 1, |a| a.line);
    let tags = TagAnnotation::align(&corpus_flat, &pairs, PTB_TAGS).map_err(|e| {
        let pos = match &e {
            txray_core::Error::TokenMismatch { position, .. }
            | txray_core::Error::UnknownTag { position, .. }
            | txray_core::Error::LengthMismatch { position, .. } => *position,
            _ => 0,
        };
        Error::parse(path, line_of(pos), e.to_string())
    })?;
    let mut pos = 0;
    for (i, (c, a)) in corpus.iter().zip(annotated).enumerate() {
        if c.len() != a.len() {
            return Err(Error::parse(
                path,
                line_of(pos + c.len().min(a.len())),
                format!("sequence {} has {} corpus tokens but {} annotated tokens", i + 1, c.len(), a.len()),
            ));
        }
        pos += c.len();
    }
    if corpus.len() != annotated.len() {
        return Err(Error::format(
            path,
            format!("{} corpus lines but {} annotated sequences", corpus.len(), annotated.len()),
        ));
    }
    Ok(tags)
}

pub fn read_annotations(path: &Path, corpus: &[Vec<String>]) -> Result<TagAnnotation> {
    let text = read_to_string(path)?;
    align_annotations(path, corpus, &parse_annotations(path, &text)?)
}

pub fn format_annotations<S: AsRef<str>, T: AsRef<str>>(lines: &[Vec<(S, T)>]) -> String {
    let mut out = String::new();
    for l in lines {
        for (w, t) in l {
            let _ = writeln!(out, "{}\t{}", w.as_ref(), t.as_ref());
        }
        out.push('\n');
    }
    out
}

pub fn parse_labeled(path: &Path, text: &str) -> Result<Vec<(u8, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (label, body) = raw
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line, "expected label<TAB>tokens"))?;
        let label = match label.trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::parse(path, line, format!("label {other:?} is not 0 or 1"))),
        };
        let tokens: Vec<String> = body.split_whitespace().map(String::from).collect();
        if tokens.is_empty() {
            return Err(Error::parse(path, line, "example has no tokens"));
        }
        out.push((label, tokens));
    }
    if out.is_empty() {
        return Err(Error::format(path, "labeled file has no examples"));
    }
    Ok(out)
}

pub fn read_labeled(path: &Path) -> Result<Vec<(u8, Vec<String>)>> {
    parse_labeled(path, &read_to_string(path)?)
}

pub fn format_labeled(examples: &[(u8, Vec<String>)]) -> String {
    let mut out = String::new();
    for (y, toks) in examples {
        let _ = writeln!(out, "{y}\t{}", toks.join(" "));
    }
    out
}

/// Encodes corpus lines; sequence offsets are cumulative token positions.
pub fn encode_corpus(vocab: &Vocabulary, lines: &[Vec<String>]) -> Result<Corpus> {
    let seqs: Vec<Vec<u32>> = lines.iter().map(|l| l.iter().map(|t| vocab.id(t)).collect()).collect();
    Ok(Corpus::from_sequences(seqs)?)
}

pub fn encode_labeled(vocab: &Vocabulary, examples: &[(u8, Vec<String>)]) -> Result<Vec<LabeledExample>> {
    let mut offset = 0;
    let mut out = Vec::with_capacity(examples.len());
    for (i, (y, toks)) in examples.iter().enumerate() {
        let ids = toks.iter().map(|t| vocab.id(t)).collect();
        out.push(LabeledExample::new(
            txray_core::corpus::TokenSequence::new(ids, offset)?,
            *y,
            i,
        )?);
        offset += toks.len();
    }
    Ok(out)
}

/// Neuron indices, one per line, as exported by the explorer.
pub fn parse_neuron_list(path: &Path, text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        out.push(
            t.parse()
                .map_err(|_| Error::parse(path, i + 1, format!("{t:?} is not a neuron index")))?,
        );
    }
    Ok(out)
}

pub fn format_neuron_list(neurons: &[usize]) -> String {
    let mut v = neurons.to_vec();
    v.sort_unstable();
    v.dedup();
    v.iter().map(|n| format!("{n}\n")).collect()
}
