// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sequence-sharded trace recording.

use std::num::NonZeroUsize;
use std::thread;

use txray_core::corpus::Corpus;
use txray_core::encoder::Snapshot;
use txray_core::trace::{prepare, record_sequences, RecordOptions, TraceMatrix, TraceMeta};

use crate::error::Result;

/// Worker count: `TXRAY_THREADS` if set to a positive integer, otherwise the
/// available parallelism.
pub fn thread_count() -> usize {
    std::env::var("TXRAY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, NonZeroUsize::get))
}

/// Same output as [`txray_core::trace::record`], computed on up to
/// `threads` workers over contiguous sequence ranges.
pub fn record(
    snapshot: &Snapshot,
    corpus: &Corpus,
    corpus_id: &str,
    token_budget: Option<usize>,
    opts: &RecordOptions<'_>,
    threads: usize,
) -> Result<TraceMatrix> {
    let starts = prepare(snapshot, corpus, opts)?;
    let n = corpus.sequences.len();
    let workers = threads.clamp(1, n);
    let chunk = n.div_ceil(workers);
    let parts: Vec<Result<Vec<_>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let range = (w * chunk).min(n)..((w + 1) * chunk).min(n);
                let starts = &starts;
                s.spawn(move || record_sequences(snapshot, corpus, starts, opts, range).map_err(Into::into))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trace worker panicked"))
            .collect()
    });
    let mut records = Vec::with_capacity(corpus.token_count());
    for p in parts {
        records.extend(p?);
    }
    Ok(TraceMatrix {
        meta: TraceMeta {
            stage_id: snapshot.stage_id.clone(),
            corpus_id: corpus_id.into(),
            hidden: snapshot.hidden(),
            vocab_size: snapshot.params.dims.vocab,
            mode: opts.mode,
            token_budget,
        },
        records,
    })
}
