// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lstm::{check_head, check_inputs, forward_window, head_probability, Tape};
use super::{EncoderParams, PruneMask, Snapshot};
use crate::corpus::LabeledExample;
use crate::error::{Error, Result};

/// Masked hidden outputs for every token, flattened `[len × h]`.
pub fn hidden_states(params: &EncoderParams, tokens: &[u32], mask: Option<&PruneMask>) -> Result<Vec<f32>> {
    check_inputs(params, tokens, mask)?;
    let h = params.dims.hidden;
    let zeros = vec![0.0f32; h];
    let mut tape = Tape::new(h);
    forward_window(params, mask.map(PruneMask::keep), tokens, &zeros, &zeros, &mut tape);
    Ok(tape.hs)
}

/// Class probability ŷ = sigmoid(head · h_T).
pub fn classify(snapshot: &Snapshot, tokens: &[u32], mask: Option<&PruneMask>) -> Result<f64> {
    let head = snapshot.head()?;
    check_head(&snapshot.params, head)?;
    let hs = hidden_states(&snapshot.params, tokens, mask)?;
    let h = snapshot.hidden();
    let last = &hs[hs.len() - h..];
    Ok(head_probability(head, last) as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Positive-class F1. With no predicted and no actual positives the score is
/// defined as 0 and a warning is logged.
pub fn f1_from_counts(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        log::warn!("F1 undefined without predicted or actual positives, reporting 0");
        return 0.0;
    }
    (2 * c.tp) as f64 / denom as f64
}

/// F1 of thresholded predictions (ŷ ≥ threshold is positive).
pub fn evaluate_f1(
    snapshot: &Snapshot,
    data: &[LabeledExample],
    mask: Option<&PruneMask>,
    threshold: f64,
) -> Result<(f64, ConfusionCounts)> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation data"));
    }
    let mut c = ConfusionCounts::default();
    for ex in data {
        let positive = classify(snapshot, &ex.sequence.ids, mask)? >= threshold;
        match (positive, ex.label == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok((f1_from_counts(&c), c))
}
