// SPDX-License-Identifier: MIT OR Apache-2.0

//! Matrix of per-token maximum activations.
//!
//! Every token occurrence yields one row: the token id, the hidden unit with
//! the largest activation and that activation. Rows of a classifier's trace
//! also carry the sequence's predicted and true class; annotated corpora add
//! the token's part-of-speech tag.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TagAnnotation};
use crate::encoder::lstm::{check_head, head_probability};
use crate::encoder::{hidden_states, PruneMask, Snapshot};
use crate::error::{Error, Result};

/// How "maximally active" is measured on signed LSTM outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnitudeMode {
    /// argmax of |a|, recording |a|.
    Abs,
    /// argmax of signed a; tokens whose maximum is ≤ 0 produce no row.
    Raw,
}

impl fmt::Display for MagnitudeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MagnitudeMode::Abs => "abs",
            MagnitudeMode::Raw => "raw",
        })
    }
}

impl core::str::FromStr for MagnitudeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(MagnitudeMode::Abs),
            "raw" => Ok(MagnitudeMode::Raw),
            other => Err(Error::InvalidArgument(alloc::format!("unknown magnitude mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    #[serde(rename = "f")]
    pub feature: u32,
    #[serde(rename = "n")]
    pub neuron: u32,
    #[serde(rename = "a")]
    pub activation: f32,
    #[serde(rename = "yhat", default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<f64>,
    #[serde(rename = "y", default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(rename = "t", default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub stage_id: String,
    pub corpus_id: String,
    #[serde(rename = "h")]
    pub hidden: usize,
    pub vocab_size: usize,
    pub mode: MagnitudeMode,
    pub token_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

impl TraceMatrix {
    /// Checks every record against the meta bounds.
    pub fn validate(&self) -> Result<()> {
        self.records
            .iter()
            .try_for_each(|r| validate_record(&self.meta, r))
    }

    pub fn is_tagged(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.tag.is_some())
    }
}

pub fn validate_record(meta: &TraceMeta, r: &TraceRecord) -> Result<()> {
    if r.neuron as usize >= meta.hidden {
        return Err(Error::NeuronOutOfRange {
            neuron: r.neuron as usize,
            hidden: meta.hidden,
        });
    }
    if r.feature as usize >= meta.vocab_size {
        return Err(Error::TokenOutOfRange {
            id: r.feature,
            vocab_size: meta.vocab_size,
        });
    }
    if !r.activation.is_finite() || r.activation < 0.0 {
        return Err(Error::InvalidActivation(r.activation as f64));
    }
    if let Some(p) = r.predicted {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(alloc::format!("class probability {p} outside [0, 1]")));
        }
    }
    if let Some(y) = r.label {
        if y > 1 {
            return Err(Error::NonBinaryLabel { index: 0, label: y });
        }
    }
    Ok(())
}

/// Most active unit of one hidden vector; ties go to the lowest index. Only
/// units kept by `mask` compete. `None` when raw mode finds no positive unit.
pub fn select_max(hidden: &[f32], mode: MagnitudeMode, mask: Option<&PruneMask>) -> Option<(usize, f32)> {
    let mut best: Option<(usize, f32)> = None;
    for (j, &v) in hidden.iter().enumerate() {
        if mask.is_some_and(|m| !m.kept(j)) {
            continue;
        }
        let score = match mode {
            MagnitudeMode::Abs => Float::abs(v),
            MagnitudeMode::Raw => v,
        };
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((j, score));
        }
    }
    match (mode, best) {
        (MagnitudeMode::Raw, Some((_, a))) if a <= 0.0 => None,
        (_, b) => b,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecordOptions<'a> {
    pub mode: MagnitudeMode,
    pub annotations: Option<&'a TagAnnotation>,
    pub mask: Option<&'a PruneMask>,
}

/// Checks the inputs shared by [`record`] and [`record_sequences`]; returns
/// the token position of every sequence start.
pub fn prepare(snapshot: &Snapshot, corpus: &Corpus, opts: &RecordOptions<'_>) -> Result<Vec<usize>> {
    if corpus.is_empty() || corpus.token_count() == 0 {
        return Err(Error::EmptyInput("trace corpus"));
    }
    corpus.check_range(snapshot.params.dims.vocab)?;
    if let Some(head) = &snapshot.head {
        check_head(&snapshot.params, head)?;
    }
    if let Some(m) = opts.mask {
        PruneMask::new(m.keep().to_vec())?;
        if m.len() != snapshot.hidden() {
            return Err(Error::MaskLength {
                found: m.len(),
                hidden: snapshot.hidden(),
            });
        }
    }
    if let Some(ann) = opts.annotations {
        if ann.len() != corpus.token_count() {
            return Err(Error::LengthMismatch {
                position: ann.len().min(corpus.token_count()),
                corpus_len: corpus.token_count(),
                annotation_len: ann.len(),
            });
        }
    }
    if let Some(labels) = &corpus.labels {
        if labels.len() != corpus.sequences.len() {
            return Err(Error::InvalidArgument("one label per sequence required".into()));
        }
    }
    let mut starts = Vec::with_capacity(corpus.sequences.len());
    let mut at = 0;
    for s in &corpus.sequences {
        starts.push(at);
        at += s.len();
    }
    Ok(starts)
}

/// Records the rows of sequences `range`, in order. `starts` comes from
/// [`prepare`]. Concatenating consecutive ranges equals one full pass.
pub fn record_sequences(
    snapshot: &Snapshot,
    corpus: &Corpus,
    starts: &[usize],
    opts: &RecordOptions<'_>,
    range: Range<usize>,
) -> Result<Vec<TraceRecord>> {
    let h = snapshot.hidden();
    let mut out = Vec::new();
    for si in range {
        let seq = &corpus.sequences[si];
        let hs = hidden_states(&snapshot.params, &seq.ids, opts.mask)?;
        let predicted = snapshot.head.as_ref().map(|head| head_probability(head, &hs[hs.len() - h..]) as f64);
        let label = corpus.labels.as_ref().map(|l| l[si]);
        for (t, &feature) in seq.ids.iter().enumerate() {
            let Some((neuron, activation)) = select_max(&hs[t * h..(t + 1) * h], opts.mode, opts.mask) else {
                continue;
            };
            out.push(TraceRecord {
                feature,
                neuron: neuron as u32,
                activation,
                predicted,
                label,
                tag: opts.annotations.map(|a| a.tags[starts[si] + t].clone()),
            });
        }
    }
    Ok(out)
}

/// Records one row per token occurrence of `corpus` (abs mode) in corpus
/// order.
pub fn record(snapshot: &Snapshot, corpus: &Corpus, corpus_id: &str, token_budget: Option<usize>, opts: &RecordOptions<'_>) -> Result<TraceMatrix> {
    let starts = prepare(snapshot, corpus, opts)?;
    let records = record_sequences(snapshot, corpus, &starts, opts, 0..corpus.sequences.len())?;
    Ok(TraceMatrix {
        meta: TraceMeta {
            stage_id: snapshot.stage_id.clone(),
            corpus_id: corpus_id.into(),
            hidden: snapshot.hidden(),
            vocab_size: snapshot.params.dims.vocab,
            mode: opts.mode,
            token_budget,
        },
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ties_break_to_lowest_index() {
        assert_eq!(select_max(&[0.5, 0.9, 0.9], MagnitudeMode::Abs, None), Some((1, 0.9)));
        assert_eq!(select_max(&[0.5, 0.9, 0.9], MagnitudeMode::Raw, None), Some((1, 0.9)));
    }

    #[test]
    fn abs_mode_uses_magnitude() {
        assert_eq!(select_max(&[-0.95, 0.4], MagnitudeMode::Abs, None), Some((0, 0.95)));
        assert_eq!(select_max(&[-0.95, 0.4], MagnitudeMode::Raw, None), Some((1, 0.4)));
    }

    #[test]
    fn raw_mode_drops_non_positive() {
        assert_eq!(select_max(&[-0.95, -0.4], MagnitudeMode::Raw, None), None);
        assert_eq!(select_max(&[0.0, -0.4], MagnitudeMode::Raw, None), None);
    }

    #[test]
    fn mask_restricts_candidates() {
        let m = PruneMask::new(vec![false, true, true]).unwrap();
        assert_eq!(select_max(&[0.0, 0.0, 0.0], MagnitudeMode::Abs, Some(&m)), Some((1, 0.0)));
        assert_eq!(select_max(&[0.9, 0.2, 0.3], MagnitudeMode::Abs, Some(&m)), Some((2, 0.3)));
    }

    #[test]
    fn mode_round_trips_through_text() {
        for m in [MagnitudeMode::Abs, MagnitudeMode::Raw] {
            assert_eq!(alloc::format!("{m}").parse::<MagnitudeMode>().unwrap(), m);
        }
        assert!("max".parse::<MagnitudeMode>().is_err());
    }
}
