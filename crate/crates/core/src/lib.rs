// SPDX-License-Identifier: MIT OR Apache-2.0

//! Allocation-only core of txray.
//!
//! A neuron is described by the tokens it fires on most strongly: every
//! token of a corpus is run through an LSTM encoder, the hidden unit with the
//! largest activation is recorded ([`trace`]), and the records are folded
//! into one probability distribution over tokens per unit ([`preference`]).
//! Comparing those distributions between two training stages with the
//! Hellinger distance, the distribution length and the
//! shared/avoided/gained state ([`metrics`]) measures how knowledge moves
//! during pretraining, zero-shot application and supervised fine-tuning.
//! [`pruning`] validates the findings by ablating selected neuron sets.
//!
//! File formats, the command line and the figure renderer live in the
//! `txray` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod exact;
pub mod math;
pub mod metrics;
pub mod preference;
pub mod pruning;
pub mod trace;
pub mod vocab;

pub use error::{Error, Result};
