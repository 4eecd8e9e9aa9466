// SPDX-License-Identifier: MIT OR Apache-2.0

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{backward_window, check_head, classifier_backward, forward_window, lm_head_backward, Tape};
use super::{ClassifierHead, EncoderParams, Snapshot, StageRecord};
use crate::corpus::{Corpus, LabeledExample};
use crate::error::{Error, Result};

/// Language model pretraining hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    pub epochs: usize,
    /// 1-based epochs after which a snapshot is emitted.
    pub snapshot_epochs: Vec<usize>,
    pub lr: f32,
    pub clip_norm: f32,
    /// Truncated backpropagation window, in tokens.
    pub bptt: usize,
    /// Seeds the per-epoch sequence shuffle.
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            snapshot_epochs: vec![1, 9, 10],
            lr: 1.0,
            clip_norm: 5.0,
            bptt: 35,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub lr: f32,
    pub clip_norm: f32,
    /// Seeds head initialization and the per-epoch example shuffle.
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            lr: 0.1,
            clip_norm: 5.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub snapshots: Vec<Snapshot>,
    /// Mean next-token cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

fn clip_and_step(values: &mut [f32], grads: &[f32], ranges: &[Range<usize>], extra: Option<(&mut [f32], &[f32])>, lr: f32, clip_norm: f32) {
    let mut sq = 0.0f64;
    for r in ranges {
        sq += grads[r.clone()].iter().map(|g| (*g as f64) * (*g as f64)).sum::<f64>();
    }
    if let Some((_, eg)) = &extra {
        sq += eg.iter().map(|g| (*g as f64) * (*g as f64)).sum::<f64>();
    }
    let norm = Float::sqrt(sq);
    let scale = if clip_norm > 0.0 && norm > clip_norm as f64 {
        (clip_norm as f64 / norm) as f32
    } else {
        1.0
    };
    let step = lr * scale;
    for r in ranges {
        for (p, g) in values[r.clone()].iter_mut().zip(&grads[r.clone()]) {
            *p -= step * *g;
        }
    }
    if let Some((ev, eg)) = extra {
        for (p, g) in ev.iter_mut().zip(eg) {
            *p -= step * *g;
        }
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Trains next-token prediction with truncated backpropagation through time.
/// Every corpus sequence starts from the zero state; state is carried (but
/// not differentiated) across windows of `bptt` tokens.
pub fn train_lm(mut params: EncoderParams, corpus: &Corpus, config: &LmConfig) -> Result<TrainRun> {
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    if config.bptt == 0 {
        return Err(Error::InvalidArgument("bptt window must be at least 1".into()));
    }
    if let Some(&e) = config.snapshot_epochs.iter().find(|&&e| e == 0 || e > config.epochs) {
        return Err(Error::InvalidArgument(format!(
            "snapshot epoch {e} outside 1..={}",
            config.epochs
        )));
    }
    corpus.check_range(params.dims.vocab)?;
    let trainable: Vec<usize> = (0..corpus.sequences.len())
        .filter(|&i| corpus.sequences[i].len() >= 2)
        .collect();
    if trainable.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }

    let h = params.dims.hidden;
    let all = 0..params.values().len();
    let mut tape = Tape::<f32>::new(h);
    let mut grads = vec![0.0f32; params.values().len()];
    let mut dh_ext = vec![0.0f32; config.bptt * h];
    let mut logits = vec![0.0f32; params.dims.vocab];
    let mut state_h = vec![0.0f32; h];
    let mut state_c = vec![0.0f32; h];

    let mut snapshots = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut order = trainable;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut epoch_rng(config.seed, epoch));
        let mut loss_sum = 0.0f64;
        let mut predictions = 0usize;
        for &si in &order {
            let ids = &corpus.sequences[si].ids;
            state_h.iter_mut().for_each(|v| *v = 0.0);
            state_c.iter_mut().for_each(|v| *v = 0.0);
            let n_pred = ids.len() - 1;
            let mut start = 0;
            while start < n_pred {
                let end = (start + config.bptt).min(n_pred);
                let inputs = &ids[start..end];
                let targets = &ids[start + 1..end + 1];
                forward_window(&params, None, inputs, &state_h, &state_c, &mut tape);
                grads.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / targets.len() as f32;
                let dh = &mut dh_ext[..inputs.len() * h];
                let loss = lm_head_backward(&params, &tape, targets, scale, &mut grads, dh, &mut logits);
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                backward_window(&params, None, &tape, dh, &mut grads, true);
                state_h.copy_from_slice(tape.hidden_at(inputs.len() - 1));
                state_c.copy_from_slice(tape.cell_at(inputs.len() - 1));
                clip_and_step(params.values_mut(), &grads, core::slice::from_ref(&all), None, config.lr, config.clip_norm);
                loss_sum += loss as f64;
                predictions += targets.len();
                start = end;
            }
        }
        let mean = loss_sum / predictions as f64;
        if !mean.is_finite() || params.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
        log::debug!("epoch {epoch}: mean loss {mean:.4}");
        if config.snapshot_epochs.contains(&epoch) {
            let mut snap = Snapshot::new(params.clone(), format!("epoch-{epoch}"));
            snap.history.push(StageRecord::Pretrain {
                config: config.clone(),
                epoch,
            });
            snapshots.push(snap);
        }
    }
    Ok(TrainRun {
        snapshots,
        epoch_losses,
    })
}

/// Fine-tunes the recurrent weights and the classifier head on binary
/// cross-entropy. Embedding and output projection are frozen; there is no
/// language modeling term.
pub fn finetune_classifier(snapshot: &Snapshot, data: &[LabeledExample], config: &FinetuneConfig) -> Result<Snapshot> {
    finetune_classifier_with(snapshot, data, config, |_, _| true)
}

/// [`finetune_classifier`] that hands the model to `after_epoch` after every
/// epoch and stops early once it returns false. The recorded config carries
/// the number of epochs actually run, so replaying it reproduces the result.
pub fn finetune_classifier_with<F>(
    snapshot: &Snapshot,
    data: &[LabeledExample],
    config: &FinetuneConfig,
    mut after_epoch: F,
) -> Result<Snapshot>
where
    F: FnMut(usize, &Snapshot) -> bool,
{
    if data.is_empty() {
        return Err(Error::EmptyInput("labeled data"));
    }
    let mut params = snapshot.params.clone();
    for (index, ex) in data.iter().enumerate() {
        if ex.label > 1 {
            return Err(Error::NonBinaryLabel { index, label: ex.label });
        }
        ex.sequence.check_range(params.dims.vocab)?;
        if ex.sequence.is_empty() {
            return Err(Error::EmptyInput("labeled sequence"));
        }
    }
    let h = params.dims.hidden;
    let mut head = match &snapshot.head {
        Some(head) => {
            check_head(&params, head)?;
            head.clone()
        }
        None => ClassifierHead::init(config.seed, h),
    };
    let layout = params.dims.layout();
    let recurrent = [layout.w_input.clone(), layout.w_hidden.clone(), layout.bias.clone()];

    let mut tape = Tape::<f32>::new(h);
    let mut grads = vec![0.0f32; params.values().len()];
    let mut head_grads = vec![0.0f32; h + 1];
    let mut head_values = vec![0.0f32; h + 1];
    let mut order: Vec<usize> = (0..data.len()).collect();

    let tuned = |params: &EncoderParams, head: &ClassifierHead, epochs: usize| {
        let mut history = snapshot.history.clone();
        history.push(StageRecord::Finetune {
            config: FinetuneConfig {
                epochs,
                ..config.clone()
            },
        });
        Snapshot {
            params: params.clone(),
            head: Some(head.clone()),
            stage_id: format!("{}-sup", snapshot.stage_id),
            format_version: snapshot.format_version,
            history,
        }
    };
    let mut run = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut epoch_rng(config.seed, epoch));
        let mut loss_sum = 0.0f64;
        for &i in &order {
            let ex = &data[i];
            for r in &recurrent {
                grads[r.clone()].iter_mut().for_each(|g| *g = 0.0);
            }
            head_grads.iter_mut().for_each(|g| *g = 0.0);
            let loss = classifier_backward(
                &params,
                &head,
                None,
                &ex.sequence.ids,
                ex.label,
                &mut tape,
                &mut grads,
                &mut head_grads,
                false,
            );
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss as f64;
            head_values[..h].copy_from_slice(&head.weight);
            head_values[h] = head.bias;
            clip_and_step(
                params.values_mut(),
                &grads,
                &recurrent,
                Some((&mut head_values, &head_grads)),
                config.lr,
                config.clip_norm,
            );
            head.weight.copy_from_slice(&head_values[..h]);
            head.bias = head_values[h];
        }
        log::debug!("finetune epoch {epoch}: mean loss {:.4}", loss_sum / data.len() as f64);
        run = epoch;
        if !after_epoch(epoch, &tuned(&params, &head, run)) {
            break;
        }
    }
    Ok(tuned(&params, &head, run))
}
