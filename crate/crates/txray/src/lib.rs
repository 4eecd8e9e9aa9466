// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats, demo recipes, reports and the command line of the txray
//! toolkit. The algorithms live in [`txray_core`].

pub mod cli;
pub mod config;
pub mod demo;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod text;

pub use error::{Error, Result};
