// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-layer LSTM language model with an optional binary classifier head.
//!
//! Parameters live in one flat `f32` buffer laid out as
//! `embedding [V×d] | w_input [d×4h] | w_hidden [h×4h] | bias [4h] |
//! w_out [h×V] | b_out [V]`. Gate blocks inside each `4h` row are ordered
//! input, forget, cell, output. Input and recurrent weights are stored
//! input-major so the gate pre-activation is a sum of scaled rows.

mod eval;
pub(crate) mod lstm;
mod train;

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eval::{classify, evaluate_f1, f1_from_counts, hidden_states, ConfusionCounts};
pub use lstm::{classifier_loss, classifier_loss_and_grad, forward_lm, lm_loss, lm_loss_and_grad, LmOutput};
pub use train::{finetune_classifier, finetune_classifier_with, train_lm, FinetuneConfig, LmConfig, TrainRun};

/// Current snapshot container version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

/// Offsets of each parameter block inside the flat buffer.
#[derive(Debug, Clone)]
pub struct Layout {
    pub embedding: Range<usize>,
    pub w_input: Range<usize>,
    pub w_hidden: Range<usize>,
    pub bias: Range<usize>,
    pub w_out: Range<usize>,
    pub b_out: Range<usize>,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.embed == 0 || self.hidden == 0 {
            return Err(Error::ZeroDimension {
                vocab: self.vocab,
                embed: self.embed,
                hidden: self.hidden,
            });
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let (v, d, h) = (self.vocab, self.embed, self.hidden);
        let mut at = 0;
        let mut block = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        Layout {
            embedding: block(v * d),
            w_input: block(d * 4 * h),
            w_hidden: block(h * 4 * h),
            bias: block(4 * h),
            w_out: block(h * v),
            b_out: block(v),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().b_out.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: Dims,
    pub seed: u64,
    values: Vec<f32>,
}

impl EncoderParams {
    /// Draws every parameter from uniform(−r, r) with r = 1/√h.
    pub fn init(seed: u64, dims: Dims) -> Result<Self> {
        dims.validate()?;
        let r = init_range(dims.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..dims.param_count()).map(|_| open_uniform(&mut rng, r)).collect();
        Ok(Self { dims, seed, values })
    }

    pub fn from_values(dims: Dims, seed: u64, values: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.param_count() {
            return Err(Error::ParamShape {
                expected: dims.param_count(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("non-finite parameter {bad}")));
        }
        Ok(Self { dims, seed, values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn embedding(&self) -> &[f32] {
        &self.values[self.dims.layout().embedding]
    }

    pub fn embedding_row(&self, id: u32) -> &[f32] {
        let d = self.dims.embed;
        let start = id as usize * d;
        &self.values[start..start + d]
    }

    pub fn w_out(&self) -> &[f32] {
        &self.values[self.dims.layout().w_out]
    }
}

pub(crate) fn init_range(hidden: usize) -> f32 {
    1.0 / Float::sqrt(hidden as f32)
}

fn open_uniform(rng: &mut ChaCha8Rng, r: f32) -> f32 {
    loop {
        let x: f32 = rng.gen_range(-r..r);
        if x > -r {
            return x;
        }
    }
}

/// Sigmoid classifier fed by the end-of-sequence hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    pub weight: Vec<f32>,
    pub bias: f32,
}

impl ClassifierHead {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            weight: alloc::vec![0.0; hidden],
            bias: 0.0,
        }
    }

    pub fn init(seed: u64, hidden: usize) -> Self {
        let r = init_range(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = (0..hidden).map(|_| open_uniform(&mut rng, r)).collect();
        Self {
            weight,
            bias: open_uniform(&mut rng, r),
        }
    }
}

/// Hyperparameters of one training stage, kept in snapshot history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageRecord {
    Pretrain { config: LmConfig, epoch: usize },
    Finetune { config: FinetuneConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub params: EncoderParams,
    pub head: Option<ClassifierHead>,
    pub stage_id: String,
    pub format_version: u32,
    pub history: Vec<StageRecord>,
}

impl Snapshot {
    pub fn new(params: EncoderParams, stage_id: impl Into<String>) -> Self {
        Self {
            params,
            head: None,
            stage_id: stage_id.into(),
            format_version: FORMAT_VERSION,
            history: Vec::new(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.params.dims.hidden
    }

    pub fn head(&self) -> Result<&ClassifierHead> {
        self.head
            .as_ref()
            .ok_or_else(|| Error::MissingHead(self.stage_id.clone()))
    }
}

/// Per-hidden-unit keep flags. Dropped units output exactly zero at every
/// timestep, toward the recurrence, the output projection and the head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneMask {
    keep: Vec<bool>,
}

impl PruneMask {
    pub fn new(keep: Vec<bool>) -> Result<Self> {
        if !keep.iter().any(|&k| k) {
            return Err(Error::EmptyMask);
        }
        Ok(Self { keep })
    }

    pub fn keep_all(hidden: usize) -> Self {
        Self {
            keep: alloc::vec![true; hidden],
        }
    }

    /// Mask dropping the listed units.
    pub fn without(hidden: usize, pruned: &[usize]) -> Result<Self> {
        let mut keep = alloc::vec![true; hidden];
        for &n in pruned {
            if n >= hidden {
                return Err(Error::NeuronOutOfRange { neuron: n, hidden });
            }
            keep[n] = false;
        }
        Self::new(keep)
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept(&self, unit: usize) -> bool {
        self.keep[unit]
    }

    pub fn pruned_units(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| !k)
            .map(|(i, _)| i)
            .collect()
    }

    pub(crate) fn check(&self, hidden: usize) -> Result<()> {
        if self.keep.len() != hidden {
            return Err(Error::MaskLength {
                found: self.keep.len(),
                hidden,
            });
        }
        Ok(())
    }
}
