// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ablation by hidden-unit masks, with F1 deltas and removed activation
//! mass.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledExample;
use crate::encoder::{evaluate_f1, PruneMask, Snapshot};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::preference::ModelPreference;

/// Neurons pruned by the least/most active policies unless told otherwise.
pub const DEFAULT_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum PrunePolicy {
    /// Preferred before, un-preferred after.
    Avoided,
    /// The k neurons with the lowest nonzero mass after.
    LeastActive(usize),
    /// The k neurons with the highest mass after.
    MostActive(usize),
    /// Un-preferred before, preferred after.
    GainedBySupervision,
    Explicit(Vec<usize>),
}

impl fmt::Display for PrunePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrunePolicy::Avoided => f.write_str("avoided"),
            PrunePolicy::LeastActive(k) => write!(f, "least:{k}"),
            PrunePolicy::MostActive(k) => write!(f, "most:{k}"),
            PrunePolicy::GainedBySupervision => f.write_str("gained"),
            PrunePolicy::Explicit(ns) => {
                f.write_str("explicit:")?;
                for (i, n) in ns.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{n}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for PrunePolicy {
    type Err = Error;

    /// Parses `avoided`, `gained`, `least[:k]`, `most[:k]` and
    /// `explicit:i,j,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = || Error::InvalidArgument(alloc::format!("unknown prune policy {s:?}"));
        let k = |a: Option<&str>| -> Result<usize> {
            match a {
                None => Ok(DEFAULT_K),
                Some(a) => a.trim().parse().map_err(|_| bad()),
            }
        };
        match name {
            "avoided" if arg.is_none() => Ok(PrunePolicy::Avoided),
            "gained" if arg.is_none() => Ok(PrunePolicy::GainedBySupervision),
            "least" => Ok(PrunePolicy::LeastActive(k(arg)?)),
            "most" => Ok(PrunePolicy::MostActive(k(arg)?)),
            "explicit" => {
                let list = arg.unwrap_or("").trim();
                if list.is_empty() {
                    return Ok(PrunePolicy::Explicit(Vec::new()));
                }
                list.split(',')
                    .map(|t| t.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()
                    .map(PrunePolicy::Explicit)
            }
            _ => Err(bad()),
        }
    }
}

fn check_pair(before: &ModelPreference, after: &ModelPreference) -> Result<usize> {
    let h = after.hidden();
    if before.hidden() != h {
        return Err(Error::Incompatible {
            what: "hidden sizes",
            a: before.hidden().to_string(),
            b: h.to_string(),
        });
    }
    if before.per_neuron.len() != h || after.per_neuron.len() != h {
        return Err(Error::InvalidArgument("preference does not list every neuron".into()));
    }
    Ok(h)
}

/// Neurons chosen by `policy`, in ascending index order.
pub fn select(policy: &PrunePolicy, before: &ModelPreference, after: &ModelPreference) -> Result<Vec<usize>> {
    let h = check_pair(before, after)?;
    let pairs = before.per_neuron.iter().zip(&after.per_neuron);
    let mut out: Vec<usize> = match policy {
        PrunePolicy::Avoided => pairs
            .filter(|(b, a)| !b.is_empty() && a.is_empty())
            .map(|(_, a)| a.neuron)
            .collect(),
        PrunePolicy::GainedBySupervision => pairs
            .filter(|(b, a)| b.is_empty() && !a.is_empty())
            .map(|(_, a)| a.neuron)
            .collect(),
        PrunePolicy::LeastActive(k) | PrunePolicy::MostActive(k) => {
            if *k == 0 {
                return Err(Error::InvalidArgument("k must be at least 1".into()));
            }
            let mut active: Vec<(usize, f64)> = after
                .per_neuron
                .iter()
                .filter(|d| d.record_mass > 0.0)
                .map(|d| (d.neuron, d.record_mass))
                .collect();
            if *k > active.len() {
                return Err(Error::NotEnoughNeurons {
                    requested: *k,
                    available: active.len(),
                });
            }
            let most = matches!(policy, PrunePolicy::MostActive(_));
            active.sort_by(|x, y| {
                let by_mass = if most { y.1.total_cmp(&x.1) } else { x.1.total_cmp(&y.1) };
                by_mass.then(x.0.cmp(&y.0))
            });
            active.into_iter().take(*k).map(|(n, _)| n).collect()
        }
        PrunePolicy::Explicit(list) => {
            if let Some(&n) = list.iter().find(|&&n| n >= h) {
                return Err(Error::NeuronOutOfRange { neuron: n, hidden: h });
            }
            list.clone()
        }
    };
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Percentage change `100 · (after − before) / before`.
pub fn relative_change(before: f64, after: f64) -> Result<f64> {
    if before == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (after - before) / before)
}

/// Share of the stage's total activation mass held by `neurons`, in
/// percent. A stage without any mass gives 0.
pub fn mass_share(stage: &ModelPreference, neurons: &[usize]) -> Result<f64> {
    let h = stage.hidden();
    let mut selected = ExactSum::new();
    for &n in neurons {
        let d = stage.per_neuron.get(n).ok_or(Error::NeuronOutOfRange { neuron: n, hidden: h })?;
        selected.add(d.record_mass);
    }
    let total = ExactSum::from_iter(stage.masses()).value();
    if total == 0.0 {
        log::warn!("stage {} has no activation mass", stage.meta.stage_id);
        return Ok(0.0);
    }
    Ok((100.0 * selected.value() / total).clamp(0.0, 100.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub policy: PrunePolicy,
    pub stage_id: String,
    pub neurons: Vec<usize>,
    pub neuron_count: usize,
    pub mass_share: f64,
    pub f1_train_before: f64,
    pub f1_train_after: f64,
    pub f1_test_before: f64,
    pub f1_test_after: f64,
    /// `None` when the unpruned F1 is 0.
    pub rel_train_change: Option<f64>,
    pub rel_test_change: Option<f64>,
}

/// Evaluates `snapshot` with and without the policy's mask on both splits.
/// Masses come from `after`, the stage being pruned. No retraining happens.
pub fn run_experiment(
    snapshot: &Snapshot,
    before: &ModelPreference,
    after: &ModelPreference,
    policy: &PrunePolicy,
    train: &[LabeledExample],
    test: &[LabeledExample],
) -> Result<PruneReport> {
    snapshot.head()?;
    let h = snapshot.hidden();
    if after.hidden() != h {
        return Err(Error::Incompatible {
            what: "hidden sizes",
            a: h.to_string(),
            b: after.hidden().to_string(),
        });
    }
    let neurons = select(policy, before, after)?;
    let mask = if neurons.is_empty() {
        None
    } else {
        Some(PruneMask::without(h, &neurons)?)
    };
    let (f1_train_before, _) = evaluate_f1(snapshot, train, None, 0.5)?;
    let (f1_test_before, _) = evaluate_f1(snapshot, test, None, 0.5)?;
    let (f1_train_after, _) = evaluate_f1(snapshot, train, mask.as_ref(), 0.5)?;
    let (f1_test_after, _) = evaluate_f1(snapshot, test, mask.as_ref(), 0.5)?;
    Ok(PruneReport {
        policy: policy.clone(),
        stage_id: after.meta.stage_id.clone(),
        neuron_count: neurons.len(),
        mass_share: mass_share(after, &neurons)?,
        neurons,
        f1_train_before,
        f1_train_after,
        f1_test_before,
        f1_test_after,
        rel_train_change: relative_change(f1_train_before, f1_train_after).ok(),
        rel_test_change: relative_change(f1_test_before, f1_test_after).ok(),
    })
}
