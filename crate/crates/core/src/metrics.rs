// SPDX-License-Identifier: MIT OR Apache-2.0

//! Comparison of two preference stages.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::preference::{ModelPreference, PreferenceDistribution};

/// Hellinger distance over the union of both supports.
///
/// Exactly 1 when the supports are disjoint and exactly 0 for identical
/// distributions.
pub fn hellinger<F: Ord>(p: &PreferenceDistribution<F>, q: &PreferenceDistribution<F>) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::IllDefined("first"));
    }
    if q.is_empty() {
        return Err(Error::IllDefined("second"));
    }
    let mut sq = ExactSum::new();
    let mut overlap = false;
    let (mut i, mut j) = (0, 0);
    let (a, b) = (&p.entries, &q.entries);
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.feature.cmp(&y.feature),
            (Some(_), None) => core::cmp::Ordering::Less,
            _ => core::cmp::Ordering::Greater,
        };
        match ord {
            core::cmp::Ordering::Less => {
                sq.add(a[i].p);
                i += 1;
            }
            core::cmp::Ordering::Greater => {
                sq.add(b[j].p);
                j += 1;
            }
            core::cmp::Ordering::Equal => {
                overlap = true;
                let d = Float::sqrt(a[i].p) - Float::sqrt(b[j].p);
                sq.add(d * d);
                i += 1;
                j += 1;
            }
        }
    }
    if !overlap {
        return Ok(1.0);
    }
    let h = Float::sqrt(sq.value()) * core::f64::consts::FRAC_1_SQRT_2;
    // Overlapping supports keep the true distance strictly below 1.
    Ok(h.clamp(0.0, 1.0 - f64::EPSILON / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronState {
    Shared,
    Avoided,
    Gained,
    Never,
}

impl NeuronState {
    pub const ALL: [NeuronState; 4] = [NeuronState::Shared, NeuronState::Avoided, NeuronState::Gained, NeuronState::Never];

    pub fn from_lengths(a: usize, b: usize) -> Self {
        match (a > 0, b > 0) {
            (true, true) => NeuronState::Shared,
            (true, false) => NeuronState::Avoided,
            (false, true) => NeuronState::Gained,
            (false, false) => NeuronState::Never,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NeuronState::Shared => "shared",
            NeuronState::Avoided => "avoided",
            NeuronState::Gained => "gained",
            NeuronState::Never => "never",
        }
    }
}

pub fn classify_state<F: Ord>(p: &PreferenceDistribution<F>, q: &PreferenceDistribution<F>) -> NeuronState {
    NeuronState::from_lengths(p.length, q.length)
}

/// Sum of the neuron's recorded maximum activations; zero for a neuron with
/// no records.
pub fn activation_mass(stage: &ModelPreference, neuron: usize) -> Result<f64> {
    stage
        .per_neuron
        .get(neuron)
        .map(|d| d.record_mass)
        .ok_or(Error::NeuronOutOfRange {
            neuron,
            hidden: stage.hidden(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronComparison {
    #[serde(rename = "n")]
    pub neuron: usize,
    #[serde(rename = "H")]
    pub distance: Option<f64>,
    #[serde(rename = "l_a")]
    pub length_a: usize,
    #[serde(rename = "l_b")]
    pub length_b: usize,
    pub state: NeuronState,
    pub mass_a: f64,
    pub mass_b: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub shared: usize,
    pub avoided: usize,
    pub gained: usize,
    pub never: usize,
}

impl StateCounts {
    pub fn get(&self, s: NeuronState) -> usize {
        match s {
            NeuronState::Shared => self.shared,
            NeuronState::Avoided => self.avoided,
            NeuronState::Gained => self.gained,
            NeuronState::Never => self.never,
        }
    }

    fn bump(&mut self, s: NeuronState) {
        match s {
            NeuronState::Shared => self.shared += 1,
            NeuronState::Avoided => self.avoided += 1,
            NeuronState::Gained => self.gained += 1,
            NeuronState::Never => self.never += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.shared + self.avoided + self.gained + self.never
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub stage_a: String,
    pub stage_b: String,
    pub counts: StateCounts,
    /// Statistics over shared neurons; `None` when no neuron is shared.
    pub mean_distance: Option<f64>,
    pub median_distance: Option<f64>,
    pub mean_length_a: Option<f64>,
    pub mean_length_b: Option<f64>,
    pub neurons: Vec<NeuronComparison>,
}

fn check_comparable(a: &ModelPreference, b: &ModelPreference) -> Result<()> {
    if a.hidden() != b.hidden() {
        return Err(Error::Incompatible {
            what: "hidden sizes",
            a: a.hidden().to_string(),
            b: b.hidden().to_string(),
        });
    }
    if a.meta.mode != b.meta.mode {
        return Err(Error::Incompatible {
            what: "magnitude modes",
            a: a.meta.mode.to_string(),
            b: b.meta.mode.to_string(),
        });
    }
    if a.per_neuron.len() != a.hidden() || b.per_neuron.len() != b.hidden() {
        return Err(Error::InvalidArgument("preference does not list every neuron".into()));
    }
    Ok(())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| ExactSum::from_iter(values.iter().copied()).value() / values.len() as f64)
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn compare(a: &ModelPreference, b: &ModelPreference) -> Result<ComparisonSummary> {
    check_comparable(a, b)?;
    let mut counts = StateCounts::default();
    let mut neurons = Vec::with_capacity(a.hidden());
    for (p, q) in a.per_neuron.iter().zip(&b.per_neuron) {
        let state = classify_state(p, q);
        counts.bump(state);
        let distance = match state {
            NeuronState::Shared => Some(hellinger(p, q)?),
            _ => None,
        };
        neurons.push(NeuronComparison {
            neuron: p.neuron,
            distance,
            length_a: p.length,
            length_b: q.length,
            state,
            mass_a: p.record_mass,
            mass_b: q.record_mass,
        });
    }
    let shared: Vec<&NeuronComparison> = neurons.iter().filter(|n| n.state == NeuronState::Shared).collect();
    let distances: Vec<f64> = shared.iter().filter_map(|n| n.distance).collect();
    let la: Vec<f64> = shared.iter().map(|n| n.length_a as f64).collect();
    let lb: Vec<f64> = shared.iter().map(|n| n.length_b as f64).collect();
    Ok(ComparisonSummary {
        stage_a: a.meta.stage_id.clone(),
        stage_b: b.meta.stage_id.clone(),
        counts,
        mean_distance: mean(&distances),
        median_distance: median(&distances),
        mean_length_a: mean(&la),
        mean_length_b: mean(&lb),
        neurons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagShare {
    pub tag: String,
    pub corpus: f64,
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMatch {
    pub stage_id: String,
    pub tags: Vec<TagShare>,
    pub l1: f64,
}

/// Corpus tag frequencies against each tag's share of the stage's total
/// activation mass. Shares are fractions in [0, 1]; tags are sorted.
pub fn tag_frequency_match<S: AsRef<str>>(corpus_tags: &[S], stage: &ModelPreference) -> Result<TagMatch> {
    if corpus_tags.is_empty() {
        return Err(Error::EmptyInput("corpus annotations"));
    }
    let tag_dists = stage.tags.as_ref().ok_or(Error::Untagged(0))?;
    let mut corpus_counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in corpus_tags {
        *corpus_counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut mass: BTreeMap<&str, ExactSum> = BTreeMap::new();
    let mut total = ExactSum::new();
    for d in tag_dists {
        for e in &d.entries {
            mass.entry(e.feature.as_str()).or_default().add(e.sum);
            total.add(e.sum);
        }
    }
    let total = total.value();
    let n = corpus_tags.len() as f64;
    let mut keys: Vec<&str> = corpus_counts.keys().chain(mass.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let tags: Vec<TagShare> = keys
        .into_iter()
        .map(|t| TagShare {
            tag: t.into(),
            corpus: corpus_counts.get(t).map_or(0.0, |&c| c as f64 / n),
            activation: match mass.get(t) {
                Some(m) if total > 0.0 => m.value() / total,
                _ => 0.0,
            },
        })
        .collect();
    let l1 = ExactSum::from_iter(tags.iter().map(|s| (s.corpus - s.activation).abs())).value();
    Ok(TagMatch {
        stage_id: stage.meta.stage_id.clone(),
        tags,
        l1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Longer,
    Shorter,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthShift {
    #[serde(rename = "n")]
    pub neuron: usize,
    pub l_a: usize,
    pub l_b: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthShiftSummary {
    pub stage_a: String,
    pub stage_b: String,
    pub longer: usize,
    pub shorter: usize,
    pub unchanged: usize,
    pub neurons: Vec<LengthShift>,
}

pub fn direction(a: usize, b: usize) -> Direction {
    match b.cmp(&a) {
        core::cmp::Ordering::Greater => Direction::Longer,
        core::cmp::Ordering::Less => Direction::Shorter,
        core::cmp::Ordering::Equal => Direction::Unchanged,
    }
}

pub fn length_shift(a: &ModelPreference, b: &ModelPreference) -> Result<LengthShiftSummary> {
    check_comparable(a, b)?;
    let neurons: Vec<LengthShift> = a
        .per_neuron
        .iter()
        .zip(&b.per_neuron)
        .map(|(p, q)| LengthShift {
            neuron: p.neuron,
            l_a: p.length,
            l_b: q.length,
            direction: direction(p.length, q.length),
        })
        .collect();
    let count = |d| neurons.iter().filter(|n| n.direction == d).count();
    Ok(LengthShiftSummary {
        stage_a: a.meta.stage_id.clone(),
        stage_b: b.meta.stage_id.clone(),
        longer: count(Direction::Longer),
        shorter: count(Direction::Shorter),
        unchanged: count(Direction::Unchanged),
        neurons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassCurve {
    pub stage_id: String,
    /// (neuron, mass) in non-increasing mass order; ties by neuron index.
    pub sorted: Vec<(usize, f64)>,
    pub gini: f64,
}

/// Gini coefficient of non-negative values; 0 when every value is 0.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mass list"));
    }
    if let Some(&bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidActivation(bad));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let total = ExactSum::from_iter(v.iter().copied()).value();
    if total == 0.0 {
        log::warn!("all activation masses are zero; Gini coefficient set to 0");
        return Ok(0.0);
    }
    let n = v.len() as f64;
    let weighted = ExactSum::from_iter(v.iter().enumerate().map(|(i, x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)).value();
    Ok((weighted / (n * total)).clamp(0.0, 1.0))
}

pub fn mass_curve(stage: &ModelPreference) -> Result<MassCurve> {
    let mut sorted: Vec<(usize, f64)> = stage.per_neuron.iter().map(|d| (d.neuron, d.record_mass)).collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(MassCurve {
        stage_id: stage.meta.stage_id.clone(),
        gini: gini(&stage.masses())?,
        sorted,
    })
}
