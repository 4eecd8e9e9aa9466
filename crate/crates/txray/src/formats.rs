// SPDX-License-Identifier: MIT OR Apache-2.0

//! Snapshot, trace and preference files.
//!
//! A snapshot is one line of JSON header followed by little-endian f32
//! arrays in header order. Traces are JSON Lines: a header line, then one
//! record per line. Preferences are a single JSON document. Every header
//! carries the format name, its version and the producing [`RunConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use txray_core::encoder::{ClassifierHead, Dims, EncoderParams, Snapshot, StageRecord, FORMAT_VERSION};
use txray_core::preference::ModelPreference;
use txray_core::trace::{validate_record, TraceMatrix, TraceMeta, TraceRecord};
use txray_core::vocab::{Vocabulary, UNK_TOKEN};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::text;

pub const TRACE_VERSION: u32 = 1;
pub const PREFERENCE_VERSION: u32 = 1;

/// A snapshot together with the vocabulary its ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub snapshot: Snapshot,
    pub vocab: Vocabulary,
    pub run_config: RunConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArraySpec {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    format_version: u32,
    stage_id: String,
    seed: u64,
    dims: Dims,
    history: Vec<StageRecord>,
    arrays: Vec<ArraySpec>,
    vocab: Vec<String>,
    run_config: RunConfig,
}

const SNAPSHOT_FORMAT: &str = "txray-snapshot";

fn snapshot_arrays(s: &Snapshot) -> Vec<(&'static str, &[f32])> {
    let layout = s.params.dims.layout();
    let v = s.params.values();
    let mut arrays = vec![
        ("embedding", &v[layout.embedding]),
        ("w_input", &v[layout.w_input]),
        ("w_hidden", &v[layout.w_hidden]),
        ("bias", &v[layout.bias]),
        ("w_out", &v[layout.w_out]),
        ("b_out", &v[layout.b_out]),
    ];
    if let Some(head) = &s.head {
        arrays.push(("head_weight", &head.weight));
        arrays.push(("head_bias", std::slice::from_ref(&head.bias)));
    }
    arrays
}

pub fn encode_snapshot(file: &SnapshotFile) -> Result<Vec<u8>> {
    let s = &file.snapshot;
    let arrays = snapshot_arrays(s);
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        format_version: s.format_version,
        stage_id: s.stage_id.clone(),
        seed: s.params.seed,
        dims: s.params.dims,
        history: s.history.clone(),
        arrays: arrays
            .iter()
            .map(|(n, a)| ArraySpec {
                name: (*n).into(),
                len: a.len(),
            })
            .collect(),
        vocab: file.vocab.tokens().to_vec(),
        run_config: file.run_config.clone(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Render(e.to_string()))?;
    out.push(b'\n');
    for (_, a) in arrays {
        for x in a {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_snapshot(path: &Path, bytes: &[u8]) -> Result<SnapshotFile> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(path, "truncated snapshot: no header line"))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::parse(path, 1, format!("snapshot header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(Error::format(path, format!("not a snapshot file (format {:?})", header.format)));
    }
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!(
                "snapshot format version {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }
    let expected_total: usize = header.arrays.iter().map(|a| a.len).sum();
    let body = &bytes[nl + 1..];
    if body.len() != expected_total * 4 {
        return Err(Error::format(
            path,
            format!(
                "snapshot body has {} bytes, header declares {}",
                body.len(),
                expected_total * 4
            ),
        ));
    }
    let floats: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let names: Vec<&str> = header.arrays.iter().map(|a| a.name.as_str()).collect();
    let with_head = match names.as_slice() {
        ["embedding", "w_input", "w_hidden", "bias", "w_out", "b_out"] => false,
        ["embedding", "w_input", "w_hidden", "bias", "w_out", "b_out", "head_weight", "head_bias"] => true,
        _ => return Err(Error::format(path, format!("unexpected snapshot arrays {names:?}"))),
    };
    let layout = header.dims.layout();
    let expected = [
        layout.embedding.len(),
        layout.w_input.len(),
        layout.w_hidden.len(),
        layout.bias.len(),
        layout.w_out.len(),
        layout.b_out.len(),
        header.dims.hidden,
        1,
    ];
    for (spec, want) in header.arrays.iter().zip(expected) {
        if spec.len != want {
            return Err(Error::format(
                path,
                format!("array {} has {} values, dimensions require {want}", spec.name, spec.len),
            ));
        }
    }
    let n = header.dims.param_count();
    let params = EncoderParams::from_values(header.dims, header.seed, floats[..n].to_vec())?;
    let head = with_head.then(|| ClassifierHead {
        weight: floats[n..n + header.dims.hidden].to_vec(),
        bias: floats[n + header.dims.hidden],
    });
    if header.vocab.len() != header.dims.vocab {
        return Err(Error::format(
            path,
            format!(
                "vocabulary has {} tokens, dimensions declare {}",
                header.vocab.len(),
                header.dims.vocab
            ),
        ));
    }
    let vocab = Vocabulary::from_tokens(header.vocab, UNK_TOKEN)?;
    Ok(SnapshotFile {
        snapshot: Snapshot {
            params,
            head,
            stage_id: header.stage_id,
            format_version: header.format_version,
            history: header.history,
        },
        vocab,
        run_config: header.run_config,
    })
}

pub fn write_snapshot(path: &Path, file: &SnapshotFile) -> Result<()> {
    text::write(path, encode_snapshot(file)?)
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(path, &bytes)
}

/// A trace with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub trace: TraceMatrix,
    pub run_config: RunConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    format: String,
    version: u32,
    #[serde(flatten)]
    meta: TraceMeta,
    run_config: RunConfig,
}

const TRACE_FORMAT: &str = "txray-trace";

pub fn encode_trace(file: &TraceFile) -> Result<Vec<u8>> {
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        meta: file.trace.meta.clone(),
        run_config: file.run_config.clone(),
    };
    let mut out = Vec::new();
    json_line(&mut out, &header)?;
    for r in &file.trace.records {
        json_line(&mut out, r)?;
    }
    Ok(out)
}

fn json_line<T: Serialize>(out: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::Render(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}

pub fn decode_trace(path: &Path, text: &str) -> Result<TraceFile> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::format(path, "truncated trace: missing header line"))?;
    let header: TraceHeader =
        serde_json::from_str(first).map_err(|e| Error::parse(path, 1, format!("trace header: {e}")))?;
    if header.format != TRACE_FORMAT {
        return Err(Error::parse(path, 1, format!("not a trace file (format {:?})", header.format)));
    }
    if header.version != TRACE_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!("trace version {} is not supported (expected {TRACE_VERSION})", header.version),
        ));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let r: TraceRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, format!("trace record: {e}")))?;
        validate_record(&header.meta, &r).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        records.push(r);
    }
    if !text.ends_with('\n') {
        return Err(Error::format(path, "truncated trace: last line is incomplete"));
    }
    Ok(TraceFile {
        trace: TraceMatrix {
            meta: header.meta,
            records,
        },
        run_config: header.run_config,
    })
}

pub fn write_trace(path: &Path, file: &TraceFile) -> Result<()> {
    text::write(path, encode_trace(file)?)
}

pub fn read_trace(path: &Path) -> Result<TraceFile> {
    decode_trace(path, &text::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceFile {
    pub format: String,
    pub version: u32,
    pub run_config: RunConfig,
    #[serde(flatten)]
    pub preference: ModelPreference,
}

const PREFERENCE_FORMAT: &str = "txray-preference";

impl PreferenceFile {
    pub fn new(preference: ModelPreference, run_config: RunConfig) -> Self {
        PreferenceFile {
            format: PREFERENCE_FORMAT.into(),
            version: PREFERENCE_VERSION,
            run_config,
            preference,
        }
    }
}

pub fn encode_preference(file: &PreferenceFile) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(file).map_err(|e| Error::Render(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn decode_preference(path: &Path, text: &str) -> Result<PreferenceFile> {
    let file: PreferenceFile = serde_json::from_str(text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if file.format != PREFERENCE_FORMAT {
        return Err(Error::format(path, format!("not a preference file (format {:?})", file.format)));
    }
    if file.version != PREFERENCE_VERSION {
        return Err(Error::format(
            path,
            format!(
                "preference version {} is not supported (expected {PREFERENCE_VERSION})",
                file.version
            ),
        ));
    }
    file.preference
        .validate()
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(file)
}

pub fn write_preference(path: &Path, file: &PreferenceFile) -> Result<()> {
    text::write(path, encode_preference(file)?)
}

pub fn read_preference(path: &Path) -> Result<PreferenceFile> {
    decode_preference(path, &text::read_to_string(path)?)
}
