// SPDX-License-Identifier: MIT OR Apache-2.0

//! Forward and backward passes, generic over compute precision.

use alloc::vec;
use alloc::vec::Vec;

use super::{ClassifierHead, EncoderParams, Layout, PruneMask};
use crate::error::{Error, Result};
use crate::math::{axpy, axpy_w, dot_w, log_sigmoid, sigmoid, Scalar};

/// Activations of one forward window, kept for backpropagation.
pub(crate) struct Tape<T> {
    hidden: usize,
    pub(crate) steps: usize,
    tokens: Vec<u32>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// activated gates i, f, g, o per step
    gates: Vec<T>,
    tanh_c: Vec<T>,
    /// masked hidden output per step
    pub(crate) hs: Vec<T>,
    /// cell state per step
    cs: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    pub(crate) fn new(hidden: usize) -> Self {
        Self {
            hidden,
            steps: 0,
            tokens: Vec::new(),
            h_prev: Vec::new(),
            c_prev: Vec::new(),
            gates: Vec::new(),
            tanh_c: Vec::new(),
            hs: Vec::new(),
            cs: Vec::new(),
        }
    }

    fn reset(&mut self, steps: usize) {
        let h = self.hidden;
        self.steps = steps;
        self.tokens.clear();
        for buf in [&mut self.h_prev, &mut self.c_prev, &mut self.tanh_c, &mut self.hs, &mut self.cs] {
            buf.clear();
            buf.resize(steps * h, T::zero());
        }
        self.gates.clear();
        self.gates.resize(steps * 4 * h, T::zero());
    }

    pub(crate) fn hidden_at(&self, t: usize) -> &[T] {
        &self.hs[t * self.hidden..(t + 1) * self.hidden]
    }

    pub(crate) fn cell_at(&self, t: usize) -> &[T] {
        &self.cs[t * self.hidden..(t + 1) * self.hidden]
    }
}

pub(crate) fn check_inputs(params: &EncoderParams, tokens: &[u32], mask: Option<&PruneMask>) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("token sequence"));
    }
    let vocab_size = params.dims.vocab;
    if let Some(&id) = tokens.iter().find(|&&id| id as usize >= vocab_size) {
        return Err(Error::TokenOutOfRange { id, vocab_size });
    }
    if let Some(m) = mask {
        m.check(params.dims.hidden)?;
    }
    Ok(())
}

/// One LSTM step. Writes activated gates, tanh(c), c and the masked h.
#[allow(clippy::too_many_arguments)]
#[inline]
fn step<T: Scalar>(
    params: &EncoderParams,
    layout: &Layout,
    mask: Option<&[bool]>,
    token: u32,
    h_prev: &[T],
    c_prev: &[T],
    gates: &mut [T],
    tanh_c: &mut [T],
    c_out: &mut [T],
    h_out: &mut [T],
) {
    let h = params.dims.hidden;
    let d = params.dims.embed;
    let g4 = 4 * h;
    let values = params.values();
    let w_input = &values[layout.w_input.clone()];
    let w_hidden = &values[layout.w_hidden.clone()];
    for (z, b) in gates.iter_mut().zip(&values[layout.bias.clone()]) {
        *z = T::of(*b);
    }
    let x = params.embedding_row(token);
    for k in 0..d {
        axpy_w(gates, T::of(x[k]), &w_input[k * g4..(k + 1) * g4]);
    }
    for j in 0..h {
        let hp = h_prev[j];
        if hp != T::zero() {
            axpy_w(gates, hp, &w_hidden[j * g4..(j + 1) * g4]);
        }
    }
    let (gi, rest) = gates.split_at_mut(h);
    let (gf, rest) = rest.split_at_mut(h);
    let (gg, go) = rest.split_at_mut(h);
    for j in 0..h {
        gi[j] = sigmoid(gi[j]);
        gf[j] = sigmoid(gf[j]);
        gg[j] = gg[j].tanh();
        go[j] = sigmoid(go[j]);
        let c = gf[j] * c_prev[j] + gi[j] * gg[j];
        c_out[j] = c;
        let tc = c.tanh();
        tanh_c[j] = tc;
        let keep = mask.is_none_or(|m| m[j]);
        h_out[j] = if keep { go[j] * tc } else { T::zero() };
    }
}

/// Runs the recurrence over `tokens` from state (`h0`, `c0`).
pub(crate) fn forward_window<T: Scalar>(
    params: &EncoderParams,
    mask: Option<&[bool]>,
    tokens: &[u32],
    h0: &[T],
    c0: &[T],
    tape: &mut Tape<T>,
) {
    let h = params.dims.hidden;
    let layout = params.dims.layout();
    tape.reset(tokens.len());
    tape.tokens.extend_from_slice(tokens);
    for (t, &tok) in tokens.iter().enumerate() {
        let cur = t * h..(t + 1) * h;
        if t == 0 {
            tape.h_prev[cur.clone()].copy_from_slice(h0);
            tape.c_prev[cur.clone()].copy_from_slice(c0);
        } else {
            let prev = (t - 1) * h..t * h;
            tape.h_prev[cur.clone()].copy_from_slice(&tape.hs[prev.clone()]);
            tape.c_prev[cur.clone()].copy_from_slice(&tape.cs[prev]);
        }
        step(
            params,
            &layout,
            mask,
            tok,
            &tape.h_prev[cur.clone()],
            &tape.c_prev[cur.clone()],
            &mut tape.gates[t * 4 * h..(t + 1) * 4 * h],
            &mut tape.tanh_c[cur.clone()],
            &mut tape.cs[cur.clone()],
            &mut tape.hs[cur],
        );
    }
}

/// Backpropagates external gradients on the masked hidden outputs through
/// the window. `dh_ext` holds one length-h gradient per step. Gradients are
/// accumulated into `grads` (same layout as the parameters); embedding rows
/// are only touched when `train_embedding` is set.
pub(crate) fn backward_window<T: Scalar>(
    params: &EncoderParams,
    mask: Option<&[bool]>,
    tape: &Tape<T>,
    dh_ext: &[T],
    grads: &mut [T],
    train_embedding: bool,
) {
    let h = params.dims.hidden;
    let d = params.dims.embed;
    let g4 = 4 * h;
    let layout = params.dims.layout();
    let values = params.values();
    let w_input = &values[layout.w_input.clone()];
    let w_hidden = &values[layout.w_hidden.clone()];

    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut dz = vec![T::zero(); g4];
    let one = T::one();

    for t in (0..tape.steps).rev() {
        let cur = t * h..(t + 1) * h;
        let gates = &tape.gates[t * g4..(t + 1) * g4];
        let tanh_c = &tape.tanh_c[cur.clone()];
        let c_prev = &tape.c_prev[cur.clone()];
        let h_prev = &tape.h_prev[cur.clone()];
        let ext = &dh_ext[cur.clone()];
        for j in 0..h {
            let keep = mask.is_none_or(|m| m[j]);
            let dh = if keep { ext[j] + dh_next[j] } else { T::zero() };
            let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = tanh_c[j];
            let d_o = dh * tc;
            let dc = dc_next[j] + dh * o * (one - tc * tc);
            dc_next[j] = dc * f;
            dz[j] = dc * g * i * (one - i);
            dz[h + j] = dc * c_prev[j] * f * (one - f);
            dz[2 * h + j] = dc * i * (one - g * g);
            dz[3 * h + j] = d_o * o * (one - o);
        }

        let gb = &mut grads[layout.bias.clone()];
        for (g, z) in gb.iter_mut().zip(&dz) {
            *g += *z;
        }
        let token = tape.tokens[t] as usize;
        let x = params.embedding_row(token as u32);
        {
            let gw = &mut grads[layout.w_input.clone()];
            for k in 0..d {
                axpy(&mut gw[k * g4..(k + 1) * g4], T::of(x[k]), &dz);
            }
        }
        if train_embedding {
            let row = layout.embedding.start + token * d;
            for k in 0..d {
                grads[row + k] += dot_w(&w_input[k * g4..(k + 1) * g4], &dz);
            }
        }
        let gw = &mut grads[layout.w_hidden.clone()];
        for j in 0..h {
            let hp = h_prev[j];
            if hp != T::zero() {
                axpy(&mut gw[j * g4..(j + 1) * g4], hp, &dz);
            }
            dh_next[j] = dot_w(&w_hidden[j * g4..(j + 1) * g4], &dz);
        }
    }
}

/// Logits of one hidden vector.
#[inline]
pub(crate) fn project<T: Scalar>(params: &EncoderParams, layout: &Layout, hidden: &[T], logits: &mut [T]) {
    let v = params.dims.vocab;
    let values = params.values();
    for (z, b) in logits.iter_mut().zip(&values[layout.b_out.clone()]) {
        *z = T::of(*b);
    }
    let w_out = &values[layout.w_out.clone()];
    for (j, &hj) in hidden.iter().enumerate() {
        if hj != T::zero() {
            axpy_w(logits, hj, &w_out[j * v..(j + 1) * v]);
        }
    }
}

/// Softmax in place; returns log-sum-exp.
#[inline]
fn softmax_in_place<T: Scalar>(logits: &mut [T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    let inv = T::one() / sum;
    for z in logits.iter_mut() {
        *z *= inv;
    }
    max + sum.ln()
}

/// Next-token cross-entropy over a window. Adds `scale`-weighted output
/// gradients to `grads`, writes the per-step hidden gradients into `dh_ext`
/// and returns the summed (unscaled) loss.
pub(crate) fn lm_head_backward<T: Scalar>(
    params: &EncoderParams,
    tape: &Tape<T>,
    targets: &[u32],
    scale: T,
    grads: &mut [T],
    dh_ext: &mut [T],
    logits: &mut [T],
) -> T {
    let h = params.dims.hidden;
    let v = params.dims.vocab;
    let layout = params.dims.layout();
    let w_out = &params.values()[layout.w_out.clone()];
    let mut loss = T::zero();
    for (t, &target) in targets.iter().enumerate() {
        let hidden = tape.hidden_at(t);
        project(params, &layout, hidden, logits);
        let target = target as usize;
        let target_logit = logits[target];
        let lse = softmax_in_place(logits);
        loss += lse - target_logit;
        logits[target] -= T::one();
        for z in logits.iter_mut() {
            *z *= scale;
        }
        {
            let gb = &mut grads[layout.b_out.clone()];
            for (g, z) in gb.iter_mut().zip(logits.iter()) {
                *g += *z;
            }
        }
        let gw = &mut grads[layout.w_out.clone()];
        let dh = &mut dh_ext[t * h..(t + 1) * h];
        for j in 0..h {
            let hj = hidden[j];
            if hj != T::zero() {
                axpy(&mut gw[j * v..(j + 1) * v], hj, logits);
            }
            dh[j] = dot_w(&w_out[j * v..(j + 1) * v], logits);
        }
    }
    loss
}

/// Mean next-token loss and its gradient over one sequence processed as a
/// single window from the zero state.
pub fn lm_loss_and_grad<T: Scalar>(
    params: &EncoderParams,
    tokens: &[u32],
    mask: Option<&PruneMask>,
) -> Result<(T, Vec<T>)> {
    check_inputs(params, tokens, mask)?;
    if tokens.len() < 2 {
        return Err(Error::EmptyInput("language model targets"));
    }
    let h = params.dims.hidden;
    let mask = mask.map(PruneMask::keep);
    let inputs = &tokens[..tokens.len() - 1];
    let targets = &tokens[1..];
    let zeros = vec![T::zero(); h];
    let mut tape = Tape::new(h);
    forward_window(params, mask, inputs, &zeros, &zeros, &mut tape);
    let mut grads = vec![T::zero(); params.values().len()];
    let mut dh_ext = vec![T::zero(); inputs.len() * h];
    let mut logits = vec![T::zero(); params.dims.vocab];
    let scale = T::one() / T::of(targets.len() as f32);
    let loss = lm_head_backward(params, &tape, targets, scale, &mut grads, &mut dh_ext, &mut logits);
    backward_window(params, mask, &tape, &dh_ext, &mut grads, true);
    Ok((loss * scale, grads))
}

pub fn lm_loss<T: Scalar>(params: &EncoderParams, tokens: &[u32], mask: Option<&PruneMask>) -> Result<T> {
    check_inputs(params, tokens, mask)?;
    if tokens.len() < 2 {
        return Err(Error::EmptyInput("language model targets"));
    }
    let h = params.dims.hidden;
    let zeros = vec![T::zero(); h];
    let mut tape = Tape::new(h);
    let inputs = &tokens[..tokens.len() - 1];
    forward_window(params, mask.map(PruneMask::keep), inputs, &zeros, &zeros, &mut tape);
    let layout = params.dims.layout();
    let mut logits = vec![T::zero(); params.dims.vocab];
    let mut loss = T::zero();
    for (t, &target) in tokens[1..].iter().enumerate() {
        project(params, &layout, tape.hidden_at(t), &mut logits);
        let target_logit = logits[target as usize];
        loss += softmax_in_place(&mut logits) - target_logit;
    }
    Ok(loss / T::of((tokens.len() - 1) as f32))
}

fn head_logit<T: Scalar>(head: &ClassifierHead, hidden: &[T]) -> T {
    dot_w(&head.weight, hidden) + T::of(head.bias)
}

/// Binary cross-entropy of sigmoid(head · h_T) against `label`.
fn bce<T: Scalar>(logit: T, label: u8) -> T {
    if label == 1 {
        -log_sigmoid(logit)
    } else {
        -log_sigmoid(-logit)
    }
}

pub(crate) fn check_head(params: &EncoderParams, head: &ClassifierHead) -> Result<()> {
    if head.weight.len() != params.dims.hidden {
        return Err(Error::ParamShape {
            expected: params.dims.hidden,
            found: head.weight.len(),
        });
    }
    Ok(())
}

/// Classifier loss with gradients for the encoder parameters (embedding
/// excluded unless `train_embedding`) and for the head (`h` weights then the
/// bias).
pub(crate) fn classifier_backward<T: Scalar>(
    params: &EncoderParams,
    head: &ClassifierHead,
    mask: Option<&[bool]>,
    tokens: &[u32],
    label: u8,
    tape: &mut Tape<T>,
    grads: &mut [T],
    head_grads: &mut [T],
    train_embedding: bool,
) -> T {
    let h = params.dims.hidden;
    let zeros = vec![T::zero(); h];
    forward_window(params, mask, tokens, &zeros, &zeros, tape);
    let last = tape.hidden_at(tokens.len() - 1);
    let logit = head_logit(head, last);
    let loss = bce(logit, label);
    let dz = sigmoid(logit) - T::of(label as f32);
    for j in 0..h {
        head_grads[j] += dz * last[j];
    }
    head_grads[h] += dz;
    let mut dh_ext = vec![T::zero(); tokens.len() * h];
    let tail = &mut dh_ext[(tokens.len() - 1) * h..];
    for j in 0..h {
        tail[j] = dz * T::of(head.weight[j]);
    }
    backward_window(params, mask, tape, &dh_ext, grads, train_embedding);
    loss
}

/// Classifier loss and gradients (`(loss, encoder grads, head grads)`), with
/// the embedding gradient included so it can be checked numerically.
pub fn classifier_loss_and_grad<T: Scalar>(
    params: &EncoderParams,
    head: &ClassifierHead,
    tokens: &[u32],
    label: u8,
    mask: Option<&PruneMask>,
) -> Result<(T, Vec<T>, Vec<T>)> {
    check_inputs(params, tokens, mask)?;
    check_head(params, head)?;
    let h = params.dims.hidden;
    let mut tape = Tape::new(h);
    let mut grads = vec![T::zero(); params.values().len()];
    let mut head_grads = vec![T::zero(); h + 1];
    let loss = classifier_backward(
        params,
        head,
        mask.map(PruneMask::keep),
        tokens,
        label,
        &mut tape,
        &mut grads,
        &mut head_grads,
        true,
    );
    Ok((loss, grads, head_grads))
}

pub fn classifier_loss<T: Scalar>(
    params: &EncoderParams,
    head: &ClassifierHead,
    tokens: &[u32],
    label: u8,
    mask: Option<&PruneMask>,
) -> Result<T> {
    check_inputs(params, tokens, mask)?;
    check_head(params, head)?;
    let h = params.dims.hidden;
    let zeros = vec![T::zero(); h];
    let mut tape = Tape::new(h);
    forward_window(params, mask.map(PruneMask::keep), tokens, &zeros, &zeros, &mut tape);
    Ok(bce(head_logit(head, tape.hidden_at(tokens.len() - 1)), label))
}

pub(crate) fn head_probability<T: Scalar>(head: &ClassifierHead, hidden: &[T]) -> T {
    sigmoid(head_logit(head, hidden))
}

/// Per-token hidden states and logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LmOutput {
    pub hidden: Vec<Vec<f32>>,
    pub logits: Vec<Vec<f32>>,
}

/// Runs the language model over `tokens` from the zero state.
pub fn forward_lm(params: &EncoderParams, tokens: &[u32], mask: Option<&PruneMask>) -> Result<LmOutput> {
    check_inputs(params, tokens, mask)?;
    let h = params.dims.hidden;
    let zeros = vec![0.0f32; h];
    let mut tape = Tape::new(h);
    forward_window(params, mask.map(PruneMask::keep), tokens, &zeros, &zeros, &mut tape);
    let layout = params.dims.layout();
    let mut hidden = Vec::with_capacity(tokens.len());
    let mut logits = Vec::with_capacity(tokens.len());
    for t in 0..tokens.len() {
        let hv = tape.hidden_at(t);
        let mut z = vec![0.0f32; params.dims.vocab];
        project(params, &layout, hv, &mut z);
        hidden.push(hv.to_vec());
        logits.push(z);
    }
    Ok(LmOutput { hidden, logits })
}
