// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use txray_core::trace::MagnitudeMode;

use crate::error::{Error, Result};

/// Settings of one CLI invocation, echoed into every file it writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    pub embed: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub snapshot_epochs: Vec<usize>,
    pub token_budget: Option<usize>,
    pub mode: MagnitudeMode,
    /// Input and output paths as given on the command line.
    pub paths: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            seed: 7,
            embed: 32,
            hidden: 64,
            epochs: 10,
            snapshot_epochs: vec![1, 9, 10],
            token_budget: Some(100_000),
            mode: MagnitudeMode::Abs,
            paths: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 {
            return Err(Error::Usage("--embed and --hidden must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Usage("--epochs must be at least 1".into()));
        }
        if let Some(bad) = self.snapshot_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return Err(Error::Usage(format!(
                "snapshot epoch {bad} outside 1..={}",
                self.epochs
            )));
        }
        if self.token_budget == Some(0) {
            return Err(Error::Usage("--budget must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_path(mut self, key: &str, path: impl AsRef<std::path::Path>) -> Self {
        self.paths.insert(key.into(), path.as_ref().display().to_string());
        self
    }
}
