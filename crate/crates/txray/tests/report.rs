// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use txray::config::RunConfig;
use txray::render::{render, standard_figures, Figure};
use txray::report::{decode_report, encode_report, stopwords, Report, ReportBuilder};
use txray_core::metrics::NeuronState;
use txray_core::preference::{aggregate, ModelPreference};
use txray_core::trace::{MagnitudeMode, TraceMatrix, TraceMeta, TraceRecord};
use txray_core::vocab::Vocabulary;

const TOKENS: [&str; 7] = ["the", "dog", "cat", "runs", "barks", "a", "<unk>"];

fn vocab() -> Vocabulary {
    Vocabulary::from_tokens(TOKENS.iter().map(|t| t.to_string()).collect(), "<unk>").unwrap()
}

fn tag_of(f: u32) -> &'static str {
    match f {
        0 | 5 => "DT",
        1 | 2 => "NN",
        _ => "VBZ",
    }
}

/// Preference from `(feature, neuron, activation)` records, tagged.
fn stage(stage_id: &str, h: usize, records: &[(u32, u32, f32)]) -> ModelPreference {
    let trace = TraceMatrix {
        meta: TraceMeta {
            stage_id: stage_id.into(),
            corpus_id: "toy".into(),
            hidden: h,
            vocab_size: TOKENS.len(),
            mode: MagnitudeMode::Abs,
            token_budget: None,
        },
        records: records
            .iter()
            .map(|&(f, n, a)| TraceRecord {
                feature: f,
                neuron: n,
                activation: a,
                predicted: None,
                label: None,
                tag: Some(tag_of(f).into()),
            })
            .collect(),
    };
    aggregate(&trace).unwrap()
}

/// Neuron 0 prefers five features in both stages; neuron 1 is avoided,
/// neuron 2 gained, neuron 3 never.
fn two_stages() -> (ModelPreference, ModelPreference) {
    let a = stage(
        "epoch-1",
        4,
        &[(1, 0, 1.0), (2, 0, 0.5), (3, 0, 0.25), (4, 0, 0.75), (0, 0, 2.0), (5, 1, 1.0)],
    );
    let b = stage(
        "epoch-2",
        4,
        &[(1, 0, 0.5), (2, 0, 1.5), (3, 0, 0.25), (4, 0, 0.25), (0, 0, 0.5), (3, 2, 1.0)],
    );
    (a, b)
}

fn report() -> Report {
    let v = vocab();
    let (a, b) = two_stages();
    let mut builder = ReportBuilder::new(&v, RunConfig::default());
    let ka = builder.add_stage(&a).unwrap();
    let kb = builder.add_stage(&b).unwrap();
    builder.compare(&ka, &kb).unwrap();
    builder.length_shift(&ka, &kb).unwrap();
    builder.mass_curve(&ka).unwrap();
    builder.mass_curve(&kb).unwrap();
    builder.tag_match(&ka, &["DT", "NN", "NN", "VBZ"]).unwrap();
    builder.finish()
}

fn schema_errors(report: &Report) -> Vec<String> {
    let schema_text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json")).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&schema_text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: serde_json::Value = serde_json::from_slice(&encode_report(report).unwrap()).unwrap();
    validator.iter_errors(&instance).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

#[test]
fn two_stage_report_matches_published_schema() {
    let r = report();
    assert_eq!(r.stages.len(), 2);
    assert_eq!(r.comparisons.len(), 1);
    assert_eq!(schema_errors(&r), Vec::<String>::new());
    r.validate().unwrap();
}

#[test]
fn schema_rejects_missing_field() {
    let schema_text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json")).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&schema_text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let mut instance: serde_json::Value = serde_json::from_slice(&encode_report(&report()).unwrap()).unwrap();
    instance["comparisons"][0]["points"][0].as_object_mut().unwrap().remove("H");
    assert!(!validator.is_valid(&instance));
}

#[test]
fn export_then_parse_is_identity() {
    let r = report();
    let bytes = encode_report(&r).unwrap();
    let back = decode_report(Path::new("r.json"), std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(encode_report(&back).unwrap(), bytes);
}

#[test]
fn details_resum_and_sort_by_tag_then_probability() {
    let r = report();
    for d in &r.neuron_details {
        if d.features.is_empty() {
            continue;
        }
        let total: f64 = d.features.iter().map(|f| f.p).sum();
        assert!((total - 1.0).abs() <= 1e-9, "{total}");
        for w in d.features.windows(2) {
            assert!(w[0].tag < w[1].tag || (w[0].tag == w[1].tag && w[0].p >= w[1].p), "{w:?}");
        }
    }
    let d = r.detail(0, "epoch-1@toy").unwrap();
    let order: Vec<&str> = d.features.iter().map(|f| f.token.as_str()).collect();
    assert_eq!(order, ["the", "dog", "cat", "barks", "runs"]);
}

#[test]
fn comparison_points_carry_states() {
    let r = report();
    let c = r.comparison("epoch-1@toy", "epoch-2@toy").unwrap();
    let states: Vec<NeuronState> = c.points.iter().map(|p| p.state).collect();
    assert_eq!(states, [NeuronState::Shared, NeuronState::Avoided, NeuronState::Gained, NeuronState::Never]);
    assert!(c.points[0].distance.unwrap() > 0.0);
    assert_eq!(c.points[1].distance, None);
}

#[test]
fn listings_drop_stopwords_and_sort_by_probability() {
    let r = report();
    let sw = stopwords();
    assert!(sw.contains("the") && sw.contains("a"));
    let l = r.listings.iter().find(|l| l.n == 0 && l.stage_id == "epoch-2@toy").unwrap();
    assert!(l.stopwords_removed);
    assert_eq!(l.tokens, ["cat", "dog", "barks", "runs"]);
}

#[test]
fn inconsistent_hidden_sizes_are_rejected() {
    let v = vocab();
    let (a, _) = two_stages();
    let c = stage("epoch-3", 3, &[(1, 0, 1.0)]);
    let mut builder = ReportBuilder::new(&v, RunConfig::default());
    builder.add_stage(&a).unwrap();
    let err = builder.add_stage(&c).unwrap_err().to_string();
    assert!(err.contains('4') && err.contains('3'), "{err}");
}

#[test]
fn validate_catches_unknown_stage_and_bad_sums() {
    let mut r = report();
    r.neuron_details[0].stage_id = "nowhere".into();
    assert!(r.validate().unwrap_err().contains("nowhere"));
    let mut r = report();
    let d = r.neuron_details.iter_mut().find(|d| !d.features.is_empty()).unwrap();
    d.features[0].p += 1e-6;
    assert!(r.validate().unwrap_err().contains("sums to"));
}

fn three_point_report() -> Report {
    let v = vocab();
    let a = stage("s1", 3, &[(1, 0, 1.0), (2, 1, 1.0), (3, 2, 1.0), (4, 2, 1.0)]);
    let b = stage("s2", 3, &[(1, 0, 1.0), (1, 1, 1.0), (3, 2, 1.0)]);
    let mut builder = ReportBuilder::new(&v, RunConfig::default());
    let ka = builder.add_stage(&a).unwrap();
    let kb = builder.add_stage(&b).unwrap();
    builder.compare(&ka, &kb).unwrap();
    builder.finish()
}

#[test]
fn scatter_draws_one_glyph_per_shared_point() {
    let svg = render(&three_point_report(), &Figure::Scatter { comparison: 0 }).unwrap();
    assert_eq!(svg.matches(r#"class="point""#).count(), 3);
    assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    assert!(svg.contains("x-label") && svg.contains("y-label"));
}

#[test]
fn missing_sections_are_named() {
    let mut r = report();
    r.comparisons.clear();
    r.length_shifts.clear();
    r.mass_curves.clear();
    r.tag_match.clear();
    let msg = |f: Figure| render(&r, &f).unwrap_err().to_string();
    assert_eq!(msg(Figure::Scatter { comparison: 0 }), "no comparison section");
    assert_eq!(msg(Figure::Histogram { comparison: 0, neuron: 0 }), "no comparison section");
    assert_eq!(msg(Figure::LengthShift { index: 0 }), "no length_shifts section");
    assert_eq!(msg(Figure::MassCurve), "no mass_curves section");
    assert_eq!(msg(Figure::TagMatch { index: 0 }), "no tag_match section");
}

#[test]
fn rendering_is_deterministic() {
    let r = report();
    for f in standard_figures(&r) {
        assert_eq!(render(&r, &f).unwrap(), render(&r.clone(), &f).unwrap());
    }
    assert_eq!(standard_figures(&r).len(), 5);
}

#[test]
fn histogram_of_five_feature_neuron_matches_golden_file() {
    let svg = render(&report(), &Figure::Histogram { comparison: 0, neuron: 0 }).unwrap();
    assert_eq!(svg.matches(r#"class="bar-group""#).count(), 5);
    assert_eq!(svg.matches(r#"class="bar""#).count(), 10);
    let tags: Vec<&str> = svg
        .match_indices(r#"data-tag=""#)
        .map(|(i, m)| {
            let rest = &svg[i + m.len()..];
            &rest[..rest.find('"').unwrap()]
        })
        .collect();
    assert_eq!(tags, ["DT", "NN", "NN", "VBZ", "VBZ"]);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/histogram-5.svg");
    if std::env::var_os("TXRAY_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(&golden).unwrap());
}

#[test]
fn unpreferred_side_is_badged() {
    let v = vocab();
    let a = stage("s1", 2, &[(1, 0, 1.0), (2, 1, 1.0)]);
    let b = stage("s2", 2, &[(1, 0, 1.0)]);
    let mut builder = ReportBuilder::new(&v, RunConfig::default());
    let ka = builder.add_stage(&a).unwrap();
    let kb = builder.add_stage(&b).unwrap();
    builder.compare(&ka, &kb).unwrap();
    let svg = render(&builder.finish(), &Figure::Histogram { comparison: 0, neuron: 1 }).unwrap();
    assert!(svg.contains("s2@toy (un-preferred)"));
}
