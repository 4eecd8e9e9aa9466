// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-neuron feature preference distributions.
//!
//! Records of one neuron are grouped by feature; each feature gets the mean
//! of its maximum activations, and the means are normalized into a
//! probability distribution. Sums are accumulated exactly, so aggregating
//! shards and merging them gives the same bits as one pass.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::trace::{validate_record, TraceMatrix, TraceMeta, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry<F> {
    #[serde(rename = "f")]
    pub feature: F,
    pub sum: f64,
    pub count: u64,
    pub p: f64,
    /// Most frequent tag among this feature's records, when the trace was
    /// tagged.
    #[serde(rename = "t", default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl<F> FeatureEntry<F> {
    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

/// Normalized preference of one neuron. Entries are sorted by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDistribution<F = u32> {
    #[serde(rename = "n")]
    pub neuron: usize,
    pub entries: Vec<FeatureEntry<F>>,
    pub length: usize,
    pub mean_mass: f64,
    pub record_mass: f64,
}

impl<F: Ord> PreferenceDistribution<F> {
    pub fn empty(neuron: usize) -> Self {
        PreferenceDistribution {
            neuron,
            entries: Vec::new(),
            length: 0,
            mean_mass: 0.0,
            record_mass: 0.0,
        }
    }

    /// Builds a distribution from explicit probabilities, for analysis of
    /// hand-made inputs. Masses are set as if every feature had one record
    /// of activation `p`.
    pub fn from_probs<I: IntoIterator<Item = (F, f64)>>(neuron: usize, probs: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (f, p) in probs {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::InvalidArgument(alloc::format!("probability {p} must be positive and finite")));
            }
            if map.insert(f, p).is_some() {
                return Err(Error::InvalidArgument("duplicate feature".into()));
            }
        }
        let total: f64 = ExactSum::from_iter(map.values().copied()).value();
        let entries: Vec<_> = map
            .into_iter()
            .map(|(feature, p)| FeatureEntry {
                feature,
                sum: p,
                count: 1,
                p,
                tag: None,
            })
            .collect();
        Ok(PreferenceDistribution {
            neuron,
            length: entries.len(),
            entries,
            mean_mass: total,
            record_mass: total,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, feature: &F) -> f64 {
        self.entries
            .binary_search_by(|e| e.feature.cmp(feature))
            .map_or(0.0, |i| self.entries[i].p)
    }

    pub fn probs(&self) -> impl Iterator<Item = (&F, f64)> {
        self.entries.iter().map(|e| (&e.feature, e.p))
    }

    /// Checks the structural invariants after loading from a file.
    pub fn validate(&self) -> Result<()> {
        if self.length != self.entries.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "neuron {} declares length {} but has {} entries",
                self.neuron,
                self.length,
                self.entries.len()
            )));
        }
        if !self.entries.windows(2).all(|w| w[0].feature < w[1].feature) {
            return Err(Error::InvalidArgument(alloc::format!(
                "neuron {} entries are not sorted by feature",
                self.neuron
            )));
        }
        if self.entries.iter().any(|e| e.count == 0 || !(e.p > 0.0) || !e.sum.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "neuron {} has an entry with zero count or non-positive probability",
                self.neuron
            )));
        }
        if !self.is_empty() {
            let total = ExactSum::from_iter(self.entries.iter().map(|e| e.p)).value();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "neuron {} probabilities sum to {total}",
                    self.neuron
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPreference {
    pub meta: TraceMeta,
    #[serde(rename = "neurons")]
    pub per_neuron: Vec<PreferenceDistribution<u32>>,
    /// Per-neuron tag distributions, present when the trace was tagged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<PreferenceDistribution<String>>>,
}

impl ModelPreference {
    pub fn hidden(&self) -> usize {
        self.meta.hidden
    }

    pub fn masses(&self) -> Vec<f64> {
        self.per_neuron.iter().map(|d| d.record_mass).collect()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.per_neuron.iter().map(|d| d.length).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_neuron.len() != self.meta.hidden {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} neuron entries for {} hidden units",
                self.per_neuron.len(),
                self.meta.hidden
            )));
        }
        for (i, d) in self.per_neuron.iter().enumerate() {
            if d.neuron != i {
                return Err(Error::InvalidArgument(alloc::format!("neuron entry {i} is labelled {}", d.neuron)));
            }
            d.validate()?;
            if let Some(e) = d.entries.iter().find(|e| e.feature as usize >= self.meta.vocab_size) {
                return Err(Error::TokenOutOfRange {
                    id: e.feature,
                    vocab_size: self.meta.vocab_size,
                });
            }
        }
        if let Some(tags) = &self.tags {
            if tags.len() != self.meta.hidden {
                return Err(Error::InvalidArgument("tag distributions do not cover every neuron".into()));
            }
            tags.iter().try_for_each(|d| d.validate())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Cell {
    sum: ExactSum,
    count: u64,
    tags: BTreeMap<String, u64>,
}

impl Cell {
    fn merge(&mut self, other: &Cell) {
        self.sum.merge(&other.sum);
        self.count += other.count;
        for (t, c) in &other.tags {
            *self.tags.entry(t.clone()).or_default() += c;
        }
    }

    fn dominant_tag(&self) -> Option<String> {
        let mut best: Option<(&String, u64)> = None;
        for (t, &c) in &self.tags {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((t, c));
            }
        }
        best.map(|(t, _)| t.clone())
    }
}

/// Exact (sum, count) state of one neuron keyed by feature.
#[derive(Debug, Clone)]
struct NeuronCells<F> {
    cells: BTreeMap<F, Cell>,
    mass: ExactSum,
}

impl<F: Ord + Clone> NeuronCells<F> {
    fn new() -> Self {
        NeuronCells {
            cells: BTreeMap::new(),
            mass: ExactSum::new(),
        }
    }

    fn add(&mut self, feature: F, a: f32, tag: Option<&str>) {
        let cell = self.cells.entry(feature).or_default();
        cell.sum.add(a as f64);
        cell.count += 1;
        if let Some(t) = tag {
            *cell.tags.entry(t.into()).or_default() += 1;
        }
        self.mass.add(a as f64);
    }

    fn merge(&mut self, other: &Self) {
        for (f, c) in &other.cells {
            self.cells.entry(f.clone()).or_default().merge(c);
        }
        self.mass.merge(&other.mass);
    }

    fn finish(&self, neuron: usize) -> PreferenceDistribution<F> {
        let mut entries: Vec<FeatureEntry<F>> = self
            .cells
            .iter()
            .map(|(f, c)| FeatureEntry {
                feature: f.clone(),
                sum: c.sum.value(),
                count: c.count,
                p: 0.0,
                tag: c.dominant_tag(),
            })
            .collect();
        let mean_mass = ExactSum::from_iter(entries.iter().map(FeatureEntry::mean)).value();
        for e in &mut entries {
            e.p = e.mean() / mean_mass;
        }
        // All-zero activations leave nothing to normalize; such a neuron
        // counts as un-preferred.
        if !(mean_mass > 0.0) {
            entries.clear();
        }
        PreferenceDistribution {
            neuron,
            length: entries.len(),
            entries,
            mean_mass: if mean_mass > 0.0 { mean_mass } else { 0.0 },
            record_mass: self.mass.value(),
        }
    }
}

/// Mergeable aggregation state over part of a trace.
#[derive(Debug, Clone)]
pub struct PartialAggregate {
    meta: TraceMeta,
    tokens: Vec<NeuronCells<u32>>,
    tags: Vec<NeuronCells<String>>,
    records: u64,
    tagged: u64,
}

impl PartialAggregate {
    pub fn new(meta: TraceMeta) -> Self {
        let h = meta.hidden;
        PartialAggregate {
            meta,
            tokens: (0..h).map(|_| NeuronCells::new()).collect(),
            tags: (0..h).map(|_| NeuronCells::new()).collect(),
            records: 0,
            tagged: 0,
        }
    }

    pub fn from_records(meta: TraceMeta, records: &[TraceRecord]) -> Result<Self> {
        let mut agg = PartialAggregate::new(meta);
        records.iter().try_for_each(|r| agg.add(r))?;
        Ok(agg)
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    /// Unrounded activation mass of one neuron.
    pub fn neuron_mass(&self, neuron: usize) -> Option<&ExactSum> {
        self.tokens.get(neuron).map(|c| &c.mass)
    }

    /// Unrounded activation mass of all neurons together.
    pub fn total_mass(&self) -> ExactSum {
        let mut total = ExactSum::new();
        self.tokens.iter().for_each(|c| total.merge(&c.mass));
        total
    }

    pub fn add(&mut self, r: &TraceRecord) -> Result<()> {
        validate_record(&self.meta, r)?;
        let n = r.neuron as usize;
        self.tokens[n].add(r.feature, r.activation, r.tag.as_deref());
        if let Some(t) = &r.tag {
            self.tags[n].add(t.clone(), r.activation, None);
            self.tagged += 1;
        }
        self.records += 1;
        Ok(())
    }

    /// Folds `other` into `self`. Both must describe the same stage, corpus
    /// width and magnitude mode.
    pub fn merge(&mut self, other: &PartialAggregate) -> Result<()> {
        check_meta(&self.meta, &other.meta)?;
        for (a, b) in self.tokens.iter_mut().zip(&other.tokens) {
            a.merge(b);
        }
        for (a, b) in self.tags.iter_mut().zip(&other.tags) {
            a.merge(b);
        }
        self.records += other.records;
        self.tagged += other.tagged;
        Ok(())
    }

    pub fn finish(&self) -> ModelPreference {
        let per_neuron = self.tokens.iter().enumerate().map(|(n, c)| c.finish(n)).collect();
        let tags = (self.records > 0 && self.tagged == self.records)
            .then(|| self.tags.iter().enumerate().map(|(n, c)| c.finish(n)).collect());
        ModelPreference {
            meta: self.meta.clone(),
            per_neuron,
            tags,
        }
    }

    /// Tag distributions built from the same records with the tag as the
    /// feature.
    pub fn finish_tags(&self) -> Result<Vec<PreferenceDistribution<String>>> {
        if self.tagged != self.records || self.records == 0 {
            return Err(Error::Untagged((self.records - self.tagged) as usize));
        }
        Ok(self.tags.iter().enumerate().map(|(n, c)| c.finish(n)).collect())
    }
}

fn check_meta(a: &TraceMeta, b: &TraceMeta) -> Result<()> {
    let pairs: [(&'static str, String, String); 4] = [
        ("hidden sizes", a.hidden.to_string(), b.hidden.to_string()),
        ("magnitude modes", a.mode.to_string(), b.mode.to_string()),
        ("stages", a.stage_id.clone(), b.stage_id.clone()),
        ("vocabulary sizes", a.vocab_size.to_string(), b.vocab_size.to_string()),
    ];
    for (what, x, y) in pairs {
        if x != y {
            return Err(Error::Incompatible { what, a: x, b: y });
        }
    }
    Ok(())
}

pub fn aggregate(trace: &TraceMatrix) -> Result<ModelPreference> {
    Ok(PartialAggregate::from_records(trace.meta.clone(), &trace.records)?.finish())
}

/// Merges shard aggregates of disjoint parts of one trace.
pub fn merge(shards: &[PartialAggregate]) -> Result<ModelPreference> {
    let (first, rest) = shards.split_first().ok_or(Error::EmptyInput("shard list"))?;
    let mut acc = first.clone();
    rest.iter().try_for_each(|s| acc.merge(s))?;
    Ok(acc.finish())
}

/// Per-neuron tag preference of a tagged trace.
pub fn project_to_tags(trace: &TraceMatrix) -> Result<Vec<PreferenceDistribution<String>>> {
    if let Some(i) = trace.records.iter().position(|r| r.tag.is_none()) {
        return Err(Error::Untagged(i));
    }
    PartialAggregate::from_records(trace.meta.clone(), &trace.records)?.finish_tags()
}
