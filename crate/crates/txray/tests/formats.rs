// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;

use proptest::prelude::*;
use txray::config::RunConfig;
use txray::formats::*;
use txray::text;
use txray::Error;
use txray_core::encoder::{ClassifierHead, Dims, EncoderParams, Snapshot};
use txray_core::preference::aggregate;
use txray_core::trace::{MagnitudeMode, TraceMatrix, TraceMeta, TraceRecord};
use txray_core::vocab::Vocabulary;

fn vocab(n: usize) -> Vocabulary {
    let mut tokens: Vec<String> = (0..n - 1).map(|i| format!("w{i}")).collect();
    tokens.push("<unk>".into());
    Vocabulary::from_tokens(tokens, "<unk>").unwrap()
}

fn run_config() -> RunConfig {
    RunConfig {
        command: "test".into(),
        ..RunConfig::default()
    }
    .with_path("corpus", "data/corpus.txt")
}

fn snapshot_file(seed: u64, head: bool) -> SnapshotFile {
    let dims = Dims {
        vocab: 6,
        embed: 3,
        hidden: 4,
    };
    let mut snapshot = Snapshot::new(EncoderParams::init(seed, dims).unwrap(), "epoch-1");
    if head {
        snapshot.head = Some(ClassifierHead::init(seed, 4));
    }
    SnapshotFile {
        snapshot,
        vocab: vocab(6),
        run_config: run_config(),
    }
}

fn meta(h: usize, v: usize) -> TraceMeta {
    TraceMeta {
        stage_id: "epoch-1".into(),
        corpus_id: "wiki".into(),
        hidden: h,
        vocab_size: v,
        mode: MagnitudeMode::Abs,
        token_budget: Some(100),
    }
}

fn record(f: u32, n: u32, a: f32) -> TraceRecord {
    TraceRecord {
        feature: f,
        neuron: n,
        activation: a,
        predicted: None,
        label: None,
        tag: None,
    }
}

fn trace_file(records: Vec<TraceRecord>) -> TraceFile {
    TraceFile {
        trace: TraceMatrix {
            meta: meta(4, 6),
            records,
        },
        run_config: run_config(),
    }
}

fn parse_line(err: Error) -> usize {
    match err {
        Error::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn snapshot_round_trips_bit_exactly() {
    for head in [false, true] {
        let file = snapshot_file(3, head);
        let bytes = encode_snapshot(&file).unwrap();
        let back = decode_snapshot(Path::new("s.snap"), &bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(encode_snapshot(&back).unwrap(), bytes);
    }
}

#[test]
fn snapshot_header_is_one_json_line() {
    let bytes = encode_snapshot(&snapshot_file(1, true)).unwrap();
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header: serde_json::Value = serde_json::from_slice(&bytes[..nl]).unwrap();
    assert_eq!(header["format"], "txray-snapshot");
    assert_eq!(header["dims"]["hidden"], 4);
    assert_eq!(header["run_config"]["paths"]["corpus"], "data/corpus.txt");
    let names: Vec<&str> = header["arrays"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["embedding", "w_input", "w_hidden", "bias", "w_out", "b_out", "head_weight", "head_bias"]);
}

#[test]
fn truncated_or_foreign_snapshots_are_rejected() {
    let bytes = encode_snapshot(&snapshot_file(1, false)).unwrap();
    let err = decode_snapshot(Path::new("s.snap"), &bytes[..bytes.len() - 3]).unwrap_err().to_string();
    assert!(err.contains("s.snap") && err.contains("bytes"), "{err}");
    let err = decode_snapshot(Path::new("s.snap"), b"{}").unwrap_err().to_string();
    assert!(err.contains("no header line"), "{err}");
    let mut v2 = String::from_utf8_lossy(&bytes).into_owned();
    v2 = v2.replacen("\"format_version\":1", "\"format_version\":9", 1);
    let err = decode_snapshot(Path::new("s.snap"), v2.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("version 9"), "{err}");
}

#[test]
fn trace_round_trips_with_optional_columns() {
    let mut records = vec![record(1, 0, 0.5), record(5, 3, 1.25e-7)];
    records[1].predicted = Some(0.123_456_789_012_345_67);
    records[1].label = Some(1);
    records[1].tag = Some("NN".into());
    let file = trace_file(records);
    let bytes = encode_trace(&file).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().nth(1).unwrap(), r#"{"f":1,"n":0,"a":0.5}"#);
    let back = decode_trace(Path::new("t.jsonl"), &text).unwrap();
    assert_eq!(back, file);
    assert_eq!(encode_trace(&back).unwrap(), bytes);
}

#[test]
fn trace_errors_carry_line_numbers() {
    let text = String::from_utf8(encode_trace(&trace_file(vec![record(1, 0, 0.5), record(2, 1, 0.5)])).unwrap()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = r#"{"f":1,"n":"x","a":0.5}"#;
    let bad = lines.join("\n") + "\n";
    assert_eq!(parse_line(decode_trace(Path::new("t"), &bad).unwrap_err()), 3);
    lines[2] = r#"{"f":1,"n":9,"a":0.5}"#;
    let out_of_range = lines.join("\n") + "\n";
    let err = decode_trace(Path::new("t"), &out_of_range).unwrap_err();
    assert!(err.to_string().starts_with("t:3:"), "{err}");
    assert_eq!(parse_line(decode_trace(Path::new("t"), "not json\n").unwrap_err()), 1);
    let truncated = &text[..text.len() - 1];
    assert!(decode_trace(Path::new("t"), truncated).unwrap_err().to_string().contains("truncated"));
}

#[test]
fn preference_round_trips_bit_exactly() {
    let file = trace_file(vec![record(1, 0, 0.1), record(2, 0, 0.2), record(1, 0, 0.3), record(4, 2, 1.0 / 3.0)]);
    let pref = PreferenceFile::new(aggregate(&file.trace).unwrap(), run_config());
    let bytes = encode_preference(&pref).unwrap();
    let back = decode_preference(Path::new("p.json"), std::str::from_utf8(&bytes).unwrap()).unwrap();
    let bits = |p: &PreferenceFile| -> Vec<u64> {
        p.preference.per_neuron.iter().flat_map(|d| d.entries.iter().flat_map(|e| [e.p.to_bits(), e.sum.to_bits()])).collect()
    };
    assert_eq!(bits(&back), bits(&pref));
    assert_eq!(back, pref);
    assert_eq!(encode_preference(&back).unwrap(), bytes);
    let json: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(json["meta"]["h"], 4);
    assert_eq!(json["neurons"][0]["entries"][0]["f"], 1);
}

#[test]
fn preference_with_broken_contract_is_rejected() {
    let file = trace_file(vec![record(1, 0, 0.1), record(2, 0, 0.2)]);
    let pref = PreferenceFile::new(aggregate(&file.trace).unwrap(), run_config());
    let mut json: serde_json::Value = serde_json::from_slice(&encode_preference(&pref).unwrap()).unwrap();
    json["neurons"][0]["entries"][0]["p"] = serde_json::json!(0.9);
    let err = decode_preference(Path::new("p.json"), &json.to_string()).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
    let err = decode_preference(Path::new("p.json"), "{\n  \"format\": 3\n}").unwrap_err();
    assert_eq!(parse_line(err), 2);
}

#[test]
fn corpus_and_labeled_text_round_trip() {
    let lines = vec![vec!["a".to_string(), "b".into()], vec!["c".into()]];
    assert_eq!(text::parse_corpus(&text::format_corpus(&lines)), lines);
    let labeled = vec![(1u8, vec!["good".to_string(), "film".into()]), (0, vec!["bad".into()])];
    let back = text::parse_labeled(Path::new("l"), &text::format_labeled(&labeled)).unwrap();
    assert_eq!(back, labeled);
    let err = text::parse_labeled(Path::new("l"), "1\tgood\n2\tbad\n").unwrap_err();
    assert_eq!(parse_line(err), 2);
    let err = text::parse_labeled(Path::new("l"), "1\tgood\nno tab here\n").unwrap_err();
    assert_eq!(parse_line(err), 2);
}

#[test]
fn annotation_mismatch_names_file_line() {
    let corpus = vec![vec!["the".to_string(), "dog".into()], vec!["runs".into()]];
    let good = "the\tDT\ndog\tNN\n\nruns\tVBZ\n";
    let ann = text::parse_annotations(Path::new("a.tsv"), good).unwrap();
    let tags = text::align_annotations(Path::new("a.tsv"), &corpus, &ann).unwrap();
    assert_eq!(tags.tags, ["DT", "NN", "VBZ"]);
    let wrong_token = "the\tDT\ncat\tNN\n\nruns\tVBZ\n";
    let ann = text::parse_annotations(Path::new("a.tsv"), wrong_token).unwrap();
    assert_eq!(parse_line(text::align_annotations(Path::new("a.tsv"), &corpus, &ann).unwrap_err()), 2);
    let unknown_tag = "the\tDT\ndog\tNN\n\nruns\tXYZ\n";
    let ann = text::parse_annotations(Path::new("a.tsv"), unknown_tag).unwrap();
    assert_eq!(parse_line(text::align_annotations(Path::new("a.tsv"), &corpus, &ann).unwrap_err()), 4);
    let short = "the\tDT\ndog\tNN\n";
    let ann = text::parse_annotations(Path::new("a.tsv"), short).unwrap();
    assert!(text::align_annotations(Path::new("a.tsv"), &corpus, &ann).is_err());
}

#[test]
fn neuron_list_round_trips_sorted() {
    let path = Path::new("set.txt");
    let s = text::format_neuron_list(&[5, 1, 5, 3]);
    assert_eq!(s, "1\n3\n5\n");
    assert_eq!(text::parse_neuron_list(path, &s).unwrap(), [1, 3, 5]);
    assert_eq!(parse_line(text::parse_neuron_list(path, "1\nx\n").unwrap_err()), 2);
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = snapshot_file(2, true);
    let p = dir.path().join("nested/s.snap");
    write_snapshot(&p, &s).unwrap();
    assert_eq!(read_snapshot(&p).unwrap(), s);
    let t = trace_file(vec![record(0, 1, 2.0)]);
    let p = dir.path().join("t.jsonl");
    write_trace(&p, &t).unwrap();
    assert_eq!(read_trace(&p).unwrap(), t);
    let err = read_trace(&dir.path().join("missing")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

/// Parameter count of the (|V|=6, d=3, h=4) model.
const PARAMS: usize = 176;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn snapshots_round_trip_any_values(values in proptest::collection::vec(any::<f32>(), PARAMS + 5)) {
        let dims = Dims { vocab: 6, embed: 3, hidden: 4 };
        let n = dims.param_count();
        prop_assert_eq!(n, PARAMS);
        let params = EncoderParams::from_values(dims, 0, values[..n].to_vec()).unwrap();
        let mut snapshot = Snapshot::new(params, "x");
        snapshot.head = Some(ClassifierHead { weight: values[n..n + 4].to_vec(), bias: values[n + 4] });
        let file = SnapshotFile { snapshot, vocab: vocab(6), run_config: run_config() };
        let bytes = encode_snapshot(&file).unwrap();
        let back = decode_snapshot(Path::new("s"), &bytes).unwrap();
        prop_assert_eq!(encode_snapshot(&back).unwrap(), bytes);
        let bits: Vec<u32> = back.snapshot.params.values().iter().map(|v| v.to_bits()).collect();
        let want: Vec<u32> = values[..n].iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(bits, want);
    }

    #[test]
    fn traces_round_trip_any_finite_records(
        raw in proptest::collection::vec((0u32..6, 0u32..4, 0.0f32..1e6, proptest::option::of(0.0f64..=1.0), proptest::option::of(0u8..2)), 0..50)
    ) {
        let records: Vec<TraceRecord> = raw
            .into_iter()
            .map(|(f, n, a, yhat, y)| TraceRecord { feature: f, neuron: n, activation: a, predicted: yhat, label: y, tag: None })
            .collect();
        let file = trace_file(records);
        let bytes = encode_trace(&file).unwrap();
        let back = decode_trace(Path::new("t"), std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(encode_trace(&back).unwrap(), bytes);
    }
}
