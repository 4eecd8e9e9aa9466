// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned JSON report: the single hand-off artifact for the explorer and
//! the SVG renderer.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use txray_core::metrics::{
    compare, length_shift, mass_curve, tag_frequency_match, LengthShiftSummary, MassCurve, NeuronComparison, StateCounts,
    TagMatch,
};
use txray_core::preference::ModelPreference;
use txray_core::pruning::PruneReport;
use txray_core::trace::MagnitudeMode;
use txray_core::vocab::Vocabulary;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::text;

pub const REPORT_VERSION: u32 = 1;
const REPORT_FORMAT: &str = "txray-report";

/// Tokens per stage and neuron in the stopword-filtered listings.
pub const LISTING_LEN: usize = 10;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");

pub fn stopwords() -> BTreeSet<&'static str> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageInfo {
    /// Unique within the report: `<snapshot stage>@<corpus>`.
    pub stage_id: String,
    pub snapshot: String,
    pub corpus_id: String,
    pub h: usize,
    pub mode: MagnitudeMode,
    pub token_budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub counts: StateCounts,
    pub mean_distance: Option<f64>,
    pub median_distance: Option<f64>,
    pub mean_length_a: Option<f64>,
    pub mean_length_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub pair: [String; 2],
    pub summary: Summary,
    pub points: Vec<NeuronComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub token: String,
    pub tag: Option<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRow {
    pub tag: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronDetail {
    pub n: usize,
    pub stage_id: String,
    /// Every feature of the neuron, sorted by tag, then by descending p,
    /// then by token.
    pub features: Vec<FeatureRow>,
    /// Tag preference of the neuron, when the stage was tagged.
    pub tags: Option<Vec<TagRow>>,
}

/// Top tokens of a neuron by decreasing probability with stopwords
/// removed. Presentation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub n: usize,
    pub stage_id: String,
    pub stopwords_removed: bool,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub run_config: RunConfig,
    pub stages: Vec<StageInfo>,
    pub comparisons: Vec<Comparison>,
    pub neuron_details: Vec<NeuronDetail>,
    pub listings: Vec<Listing>,
    pub tag_match: Vec<TagMatch>,
    pub mass_curves: Vec<MassCurve>,
    pub length_shifts: Vec<LengthShiftSummary>,
    pub prune_reports: Vec<PruneReport>,
}

impl Report {
    pub fn stage(&self, stage_id: &str) -> Option<&StageInfo> {
        self.stages.iter().find(|s| s.stage_id == stage_id)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.pair[0] == a && c.pair[1] == b)
    }

    pub fn detail(&self, n: usize, stage_id: &str) -> Option<&NeuronDetail> {
        self.neuron_details.iter().find(|d| d.n == n && d.stage_id == stage_id)
    }

    /// Checks cross references and probability sums.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.format != REPORT_FORMAT {
            return Err(format!("not a report (format {:?})", self.format));
        }
        if self.version != REPORT_VERSION {
            return Err(format!("report version {} is not supported (expected {REPORT_VERSION})", self.version));
        }
        let h = |id: &str| self.stage(id).map(|s| s.h).ok_or_else(|| format!("unknown stage {id:?}"));
        let mut seen = BTreeSet::new();
        for s in &self.stages {
            if !seen.insert(&s.stage_id) {
                return Err(format!("duplicate stage {:?}", s.stage_id));
            }
        }
        for c in &self.comparisons {
            let (ha, hb) = (h(&c.pair[0])?, h(&c.pair[1])?);
            if ha != hb || c.points.len() != ha {
                return Err(format!("comparison {:?} does not cover {ha} neurons", c.pair));
            }
        }
        for d in &self.neuron_details {
            if d.n >= h(&d.stage_id)? {
                return Err(format!("neuron {} outside stage {:?}", d.n, d.stage_id));
            }
            if !d.features.is_empty() {
                let total: f64 = txray_core::exact::exact_sum(d.features.iter().map(|f| f.p));
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("neuron {} of {:?} sums to {total}", d.n, d.stage_id));
                }
            }
        }
        for l in &self.listings {
            if l.n >= h(&l.stage_id)? {
                return Err(format!("listing neuron {} outside stage {:?}", l.n, l.stage_id));
            }
        }
        for m in &self.mass_curves {
            h(&m.stage_id)?;
        }
        for t in &self.tag_match {
            h(&t.stage_id)?;
        }
        Ok(())
    }
}

/// Accumulates report sections from preference stages.
pub struct ReportBuilder<'v> {
    vocab: &'v Vocabulary,
    stopwords: BTreeSet<&'static str>,
    report: Report,
    preferences: Vec<ModelPreference>,
}

pub fn stage_key(p: &ModelPreference) -> String {
    format!("{}@{}", p.meta.stage_id, p.meta.corpus_id)
}

impl<'v> ReportBuilder<'v> {
    pub fn new(vocab: &'v Vocabulary, run_config: RunConfig) -> Self {
        ReportBuilder {
            vocab,
            stopwords: stopwords(),
            report: Report {
                format: REPORT_FORMAT.into(),
                version: REPORT_VERSION,
                run_config,
                stages: Vec::new(),
                comparisons: Vec::new(),
                neuron_details: Vec::new(),
                listings: Vec::new(),
                tag_match: Vec::new(),
                mass_curves: Vec::new(),
                length_shifts: Vec::new(),
                prune_reports: Vec::new(),
            },
            preferences: Vec::new(),
        }
    }

    fn find(&self, key: &str) -> Result<&ModelPreference> {
        self.preferences
            .iter()
            .find(|p| stage_key(p) == key)
            .ok_or_else(|| Error::Usage(format!("stage {key:?} was not added to the report")))
    }

    fn token(&self, id: u32) -> String {
        self.vocab.token(id).map_or_else(|| format!("#{id}"), String::from)
    }

    /// Adds a stage with its neuron details and listings; returns its key.
    pub fn add_stage(&mut self, p: &ModelPreference) -> Result<String> {
        let key = stage_key(p);
        if let Some(first) = self.preferences.first() {
            if first.hidden() != p.hidden() {
                return Err(Error::Core(txray_core::Error::Incompatible {
                    what: "hidden sizes",
                    a: first.hidden().to_string(),
                    b: p.hidden().to_string(),
                }));
            }
        }
        if self.preferences.iter().any(|q| stage_key(q) == key) {
            return Ok(key);
        }
        if p.meta.vocab_size != self.vocab.len() {
            return Err(Error::Core(txray_core::Error::Incompatible {
                what: "vocabulary sizes",
                a: self.vocab.len().to_string(),
                b: p.meta.vocab_size.to_string(),
            }));
        }
        self.report.stages.push(StageInfo {
            stage_id: key.clone(),
            snapshot: p.meta.stage_id.clone(),
            corpus_id: p.meta.corpus_id.clone(),
            h: p.hidden(),
            mode: p.meta.mode,
            token_budget: p.meta.token_budget,
        });
        for (i, d) in p.per_neuron.iter().enumerate() {
            let mut features: Vec<FeatureRow> = d
                .entries
                .iter()
                .map(|e| FeatureRow {
                    token: self.token(e.feature),
                    tag: e.tag.clone(),
                    p: e.p,
                })
                .collect();
            features.sort_by(|a, b| {
                a.tag
                    .cmp(&b.tag)
                    .then(b.p.total_cmp(&a.p))
                    .then_with(|| a.token.cmp(&b.token))
            });
            let tags = p.tags.as_ref().map(|t| {
                let mut rows: Vec<TagRow> = t[i]
                    .entries
                    .iter()
                    .map(|e| TagRow {
                        tag: e.feature.clone(),
                        p: e.p,
                    })
                    .collect();
                rows.sort_by(|a, b| b.p.total_cmp(&a.p).then_with(|| a.tag.cmp(&b.tag)));
                rows
            });
            let mut ranked: Vec<(&str, f64)> = d
                .entries
                .iter()
                .filter_map(|e| self.vocab.token(e.feature).map(|t| (t, e.p)))
                .filter(|(t, _)| !self.stopwords.contains(t.to_lowercase().as_str()))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            self.report.listings.push(Listing {
                n: i,
                stage_id: key.clone(),
                stopwords_removed: true,
                tokens: ranked.iter().take(LISTING_LEN).map(|(t, _)| t.to_string()).collect(),
            });
            self.report.neuron_details.push(NeuronDetail {
                n: i,
                stage_id: key.clone(),
                features,
                tags,
            });
        }
        self.preferences.push(p.clone());
        Ok(key)
    }

    pub fn compare(&mut self, a: &str, b: &str) -> Result<&Comparison> {
        let s = compare(self.find(a)?, self.find(b)?)?;
        self.report.comparisons.push(Comparison {
            pair: [a.into(), b.into()],
            summary: Summary {
                counts: s.counts,
                mean_distance: s.mean_distance,
                median_distance: s.median_distance,
                mean_length_a: s.mean_length_a,
                mean_length_b: s.mean_length_b,
            },
            points: s.neurons,
        });
        Ok(self.report.comparisons.last().expect("just pushed"))
    }

    pub fn length_shift(&mut self, a: &str, b: &str) -> Result<()> {
        let mut s = length_shift(self.find(a)?, self.find(b)?)?;
        s.stage_a = a.into();
        s.stage_b = b.into();
        self.report.length_shifts.push(s);
        Ok(())
    }

    pub fn mass_curve(&mut self, key: &str) -> Result<&MassCurve> {
        let mut c = mass_curve(self.find(key)?)?;
        c.stage_id = key.into();
        self.report.mass_curves.push(c);
        Ok(self.report.mass_curves.last().expect("just pushed"))
    }

    pub fn tag_match<S: AsRef<str>>(&mut self, key: &str, corpus_tags: &[S]) -> Result<&TagMatch> {
        let mut m = tag_frequency_match(corpus_tags, self.find(key)?)?;
        m.stage_id = key.into();
        self.report.tag_match.push(m);
        Ok(self.report.tag_match.last().expect("just pushed"))
    }

    /// Records a pruning result against the stage `key` it was measured on.
    pub fn prune(&mut self, key: &str, mut r: PruneReport) {
        r.stage_id = key.into();
        self.report.prune_reports.push(r);
    }

    pub fn finish(self) -> Report {
        self.report
    }
}

pub fn encode_report(report: &Report) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(report).map_err(|e| Error::Render(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn decode_report(path: &Path, text: &str) -> Result<Report> {
    let r: Report = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    r.validate().map_err(|m| Error::format(path, m))?;
    Ok(r)
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    text::write(path, encode_report(report)?)
}

pub fn read_report(path: &Path) -> Result<Report> {
    decode_report(path, &text::read_to_string(path)?)
}
