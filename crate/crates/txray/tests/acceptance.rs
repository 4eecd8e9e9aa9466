// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exit criteria. Each test prints one `PASS` or `FAIL` line to stderr
//! (uncaptured) and then asserts its criterion. Tests hold a shared lock so
//! the timed criteria never compete for the CPU.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use txray::config::RunConfig;
use txray::demo::{self, DemoOptions};
use txray::formats::{
    decode_preference, decode_snapshot, decode_trace, encode_preference, encode_snapshot, encode_trace,
};
use txray::report::{decode_report, encode_report, Report};
use txray_core::corpus::{Corpus, LabeledExample, TokenSequence};
use txray_core::encoder::{
    classifier_loss, classifier_loss_and_grad, lm_loss, lm_loss_and_grad, ClassifierHead, Dims, EncoderParams,
    Snapshot,
};
use txray_core::metrics::{classify_state, compare, hellinger, NeuronState};
use txray_core::preference::{aggregate, merge, PartialAggregate, PreferenceDistribution};
use txray_core::pruning::{relative_change, run_experiment, PrunePolicy};
use txray_core::trace::{record, MagnitudeMode, RecordOptions, TraceMatrix, TraceMeta, TraceRecord};
use txray_core::Error;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(criterion: &str, pass: bool, detail: &str) -> bool {
    let line = format!("{} {criterion}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}

fn dist(probs: &[(u32, f64)]) -> PreferenceDistribution {
    PreferenceDistribution::from_probs(0, probs.to_vec()).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng) -> Vec<(u32, f64)> {
    let mut w = BTreeMap::new();
    for _ in 0..rng.gen_range(1..10) {
        w.insert(rng.gen_range(0u32..15), rng.gen_range(0.01f64..1.0));
    }
    let total: f64 = w.values().sum();
    w.into_iter().map(|(f, x)| (f, x / total)).collect()
}

#[test]
fn hellinger_suite() {
    let _g = serial();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2_000 {
        let (p, q) = (dist(&random_probs(&mut rng)), dist(&random_probs(&mut rng)));
        let h = hellinger(&p, &q).unwrap();
        if h != hellinger(&q, &p).unwrap() {
            failures.push("symmetry");
        }
        if !(0.0..=1.0).contains(&h) {
            failures.push("range");
        }
        if hellinger(&p, &p).unwrap() != 0.0 || (h == 0.0) != (p == q) {
            failures.push("identity");
        }
        let disjoint = p.probs().all(|(f, _)| q.prob(f) == 0.0);
        if (h == 1.0) != disjoint {
            failures.push("disjoint support");
        }
    }
    if hellinger(&dist(&[(0, 0.5), (1, 0.5)]), &dist(&[(2, 1.0)])).unwrap() != 1.0 {
        failures.push("disjoint support");
    }
    let hand = hellinger(&dist(&[(0, 1.0)]), &dist(&[(0, 0.5), (1, 0.5)])).unwrap();
    if (hand - 0.541196).abs() > 1e-6 {
        failures.push("hand case");
    }
    let empty = PreferenceDistribution::<u32>::empty(0);
    let one = dist(&[(0, 1.0)]);
    if !matches!(hellinger(&empty, &one), Err(Error::IllDefined(_)))
        || !matches!(hellinger(&one, &empty), Err(Error::IllDefined(_)))
    {
        failures.push("empty side");
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push("runtime");
    }
    failures.dedup();
    let pass = verdict(
        "hellinger suite",
        failures.is_empty(),
        &format!("hand case {hand:.7}, {:.3}s, failed checks {failures:?}", elapsed.as_secs_f64()),
    );
    assert!(pass);
}

fn random_trace(seed: u64, len: usize, h: usize, vocab: usize) -> TraceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TraceMatrix {
        meta: TraceMeta {
            stage_id: "stage".into(),
            corpus_id: "corpus".into(),
            hidden: h,
            vocab_size: vocab,
            mode: MagnitudeMode::Abs,
            token_budget: None,
        },
        records: (0..len)
            .map(|_| TraceRecord {
                feature: rng.gen_range(0..vocab as u32),
                neuron: rng.gen_range(0..h as u32),
                activation: rng.gen_range(0.0f32..1.0),
                predicted: None,
                label: None,
                tag: None,
            })
            .collect(),
    }
}

#[test]
fn aggregation_oracle() {
    let _g = serial();
    let start = Instant::now();
    let t = random_trace(2024, 10_000, 32, 100);
    let whole = aggregate(&t).unwrap();
    let shards: Vec<_> = t
        .records
        .chunks(1_337)
        .map(|c| PartialAggregate::from_records(t.meta.clone(), c).unwrap())
        .collect();
    let merged = merge(&shards).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in whole.per_neuron.iter().zip(&merged.per_neuron) {
        let features: std::collections::BTreeSet<u32> = a.probs().chain(b.probs()).map(|(f, _)| *f).collect();
        for f in features {
            worst = worst.max((a.prob(&f) - b.prob(&f)).abs());
        }
    }
    let exact: txray_core::exact::ExactSum = t.records.iter().map(|r| r.activation as f64).collect();
    let mut shard_total = txray_core::exact::ExactSum::new();
    for s in &shards {
        shard_total.merge(&s.total_mass());
    }
    let conserved = shard_total.value().to_bits() == exact.value().to_bits()
        && PartialAggregate::from_records(t.meta.clone(), &t.records).unwrap().total_mass().value().to_bits()
            == exact.value().to_bits();
    let elapsed = start.elapsed();
    let pass = verdict(
        "aggregation oracle",
        worst <= 1e-12 && conserved && elapsed < Duration::from_secs(5),
        &format!(
            "max |Δp| {worst:.1e}, mass conserved {conserved}, {:.3}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn state_classification() {
    let _g = serial();
    let p = dist(&[(0, 1.0)]);
    let e = PreferenceDistribution::<u32>::empty(0);
    let table = [
        (&p, &p, NeuronState::Shared),
        (&p, &e, NeuronState::Avoided),
        (&e, &p, NeuronState::Gained),
        (&e, &e, NeuronState::Never),
    ];
    let table_ok = table.iter().all(|(a, b, s)| classify_state(a, b) == *s);
    let mut t = random_trace(9, 3_000, 16, 40);
    t.records.retain(|r| r.neuron != 3);
    let x = aggregate(&t).unwrap();
    let c = compare(&x, &x).unwrap();
    let self_ok = c.counts.avoided == 0
        && c.counts.gained == 0
        && c.counts.shared == 15
        && c.counts.never == 1
        && c.neurons.iter().all(|n| n.distance.is_none_or(|d| d == 0.0));
    let pass = verdict(
        "state classification",
        table_ok && self_ok,
        &format!("4-case table {table_ok}, compare(X, X) {:?}", c.counts),
    );
    assert!(pass);
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-9 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn central<F: Fn(&EncoderParams) -> f64>(params: &EncoderParams, i: usize, loss: F) -> f64 {
    let (mut plus, mut minus) = (params.values().to_vec(), params.values().to_vec());
    plus[i] += 1e-3;
    minus[i] -= 1e-3;
    let step = plus[i] as f64 - minus[i] as f64;
    let p = EncoderParams::from_values(params.dims, params.seed, plus).unwrap();
    let m = EncoderParams::from_values(params.dims, params.seed, minus).unwrap();
    (loss(&p) - loss(&m)) / step
}

#[test]
fn gradient_check() {
    let _g = serial();
    let params = EncoderParams::init(3, Dims { vocab: 2, embed: 3, hidden: 4 }).unwrap();
    let seq = [0u32, 1, 1, 0, 1, 0, 0, 1, 1];
    let (_, grads) = lm_loss_and_grad::<f64>(&params, &seq, None).unwrap();
    let lm_worst = (0..params.values().len())
        .map(|i| rel_err(grads[i], central(&params, i, |p| lm_loss::<f64>(p, &seq, None).unwrap())))
        .fold(0.0, f64::max);
    let head = ClassifierHead::init(4, 4);
    let mut cls_worst = 0.0f64;
    for label in [0u8, 1] {
        let (_, grads, _) = classifier_loss_and_grad::<f64>(&params, &head, &seq, label, None).unwrap();
        for i in 0..params.values().len() {
            let n = central(&params, i, |p| classifier_loss::<f64>(p, &head, &seq, label, None).unwrap());
            cls_worst = cls_worst.max(rel_err(grads[i], n));
        }
    }
    let pass = verdict(
        "gradient check",
        lm_worst < 1e-3 && cls_worst < 1e-3,
        &format!("worst relative error LM {lm_worst:.2e}, classifier {cls_worst:.2e}"),
    );
    assert!(pass);
}

fn tiny_classifier() -> (Snapshot, Snapshot, Vec<LabeledExample>) {
    let params = EncoderParams::init(1, Dims { vocab: 9, embed: 5, hidden: 12 }).unwrap();
    let zero_shot = Snapshot::new(params.clone(), "epoch-1");
    let mut sup = Snapshot::new(params, "epoch-1-sup");
    let mut head = ClassifierHead::init(2, 12);
    // Predicts positive everywhere, so F1 is non-zero on balanced labels.
    head.bias = 50.0;
    sup.head = Some(head);
    let data = (0..40)
        .map(|i| {
            let ids = (0..6).map(|t| ((i * 7 + t * 3) % 9) as u32).collect();
            LabeledExample::new(TokenSequence::new(ids, 0).unwrap(), (i % 2) as u8, i).unwrap()
        })
        .collect();
    (zero_shot, sup, data)
}

#[test]
fn pruning_harness() {
    let _g = serial();
    let (zero_shot, sup, data) = tiny_classifier();
    let corpus = Corpus::from_labeled(&data);
    let opts = RecordOptions {
        mode: MagnitudeMode::Abs,
        annotations: None,
        mask: None,
    };
    let before = aggregate(&record(&zero_shot, &corpus, "toy", None, &opts).unwrap()).unwrap();
    let after = aggregate(&record(&sup, &corpus, "toy", None, &opts).unwrap()).unwrap();
    let avoided = run_experiment(&sup, &before, &after, &PrunePolicy::Avoided, &data, &data).unwrap();
    let empty = run_experiment(&sup, &before, &after, &PrunePolicy::Explicit(vec![]), &data, &data).unwrap();
    let rel = relative_change(80.0, 77.0).unwrap();
    let empty_ok = empty.f1_train_before > 0.0
        && empty.rel_train_change == Some(0.0)
        && empty.rel_test_change == Some(0.0);
    let pass = verdict(
        "pruning harness",
        avoided.mass_share == 0.0 && empty_ok && rel == -3.75,
        &format!(
            "avoided mass share {}%, empty policy F1 {:.4} rel changes {:?}/{:?}, relative_change(80, 77) = {rel}%",
            avoided.mass_share, empty.f1_train_before, empty.rel_train_change, empty.rel_test_change
        ),
    );
    assert!(pass);
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn run_demo_rq1(cwd: &Path) -> Duration {
    let start = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_txray"))
        .args(["demo-rq1", "--seed", "7", "--out", "txray-out"])
        .current_dir(cwd)
        .output()
        .unwrap();
    assert!(output.status.success(), "demo-rq1 exited with {}", output.status);
    start.elapsed()
}

/// Re-encoding every artifact reproduces the file bytes.
fn round_trip_failures(out: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    for rel in files_under(out) {
        let path = out.join(&rel);
        let bytes = std::fs::read(&path).unwrap();
        let text = || String::from_utf8(bytes.clone()).unwrap();
        let again = match rel.components().next().unwrap().as_os_str().to_str().unwrap() {
            "snapshots" => encode_snapshot(&decode_snapshot(&path, &bytes).unwrap()).unwrap(),
            "traces" => encode_trace(&decode_trace(&path, &text()).unwrap()).unwrap(),
            "preferences" => encode_preference(&decode_preference(&path, &text()).unwrap()).unwrap(),
            "report.json" => encode_report(&decode_report(&path, &text()).unwrap()).unwrap(),
            _ => continue,
        };
        if again != bytes {
            bad.push(rel.display().to_string());
        }
    }
    bad
}

struct Rq1Run {
    report: Report,
    elapsed: Duration,
    deterministic: bool,
    round_trip_failures: Vec<String>,
    artifacts: usize,
}

fn rq1_run() -> &'static Rq1Run {
    static RUN: std::sync::OnceLock<Rq1Run> = std::sync::OnceLock::new();
    RUN.get_or_init(|| {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let elapsed = run_demo_rq1(a.path());
        run_demo_rq1(b.path());
        let (out_a, out_b) = (a.path().join("txray-out"), b.path().join("txray-out"));
        let files = files_under(&out_a);
        let deterministic = files == files_under(&out_b)
            && files
                .iter()
                .all(|f| std::fs::read(out_a.join(f)).unwrap() == std::fs::read(out_b.join(f)).unwrap());
        Rq1Run {
            report: txray::report::read_report(&out_a.join("report.json")).unwrap(),
            elapsed,
            deterministic,
            round_trip_failures: round_trip_failures(&out_a),
            artifacts: files.len(),
        }
    })
}

#[test]
fn epoch_pairs_converge() {
    let _g = serial();
    let run = rq1_run();
    let c = &run.report.comparisons;
    assert_eq!(c[0].pair, ["epoch-1@wiki", "epoch-9@wiki"]);
    assert_eq!(c[1].pair, ["epoch-9@wiki", "epoch-10@wiki"]);
    let (early, late) = (&c[0].summary, &c[1].summary);
    let (he, hl) = (early.mean_distance.unwrap_or(f64::NAN), late.mean_distance.unwrap_or(f64::NAN));
    let pass = verdict(
        "epoch convergence",
        hl < he && late.counts.shared >= early.counts.shared && run.elapsed < Duration::from_secs(600),
        &format!(
            "mean H (1,9) {he:.4} -> (9,10) {hl:.4}; shared {} -> {}; {:.0}s",
            early.counts.shared,
            late.counts.shared,
            run.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn tag_shares_approach_corpus_frequencies() {
    let _g = serial();
    let run = rq1_run();
    let l1 = |stage: &str| run.report.tag_match.iter().find(|t| t.stage_id == stage).unwrap().l1;
    let (first, last) = (l1("epoch-1@wiki"), l1("epoch-10@wiki"));
    let pass = verdict(
        "tag frequency match",
        last <= first,
        &format!("L1 epoch 1 {first:.4}, epoch 10 {last:.4}"),
    );
    assert!(pass);
}

#[test]
fn artifacts_round_trip_and_demo_is_deterministic() {
    let _g = serial();
    let run = rq1_run();
    let pass = verdict(
        "format round-trips",
        run.round_trip_failures.is_empty() && run.deterministic && run.artifacts > 0,
        &format!(
            "{} artifacts, re-encode mismatches {:?}, demo-rq1 --seed 7 byte-identical across runs {}",
            run.artifacts, run.round_trip_failures, run.deterministic
        ),
    );
    assert!(pass);
}

const SUPERVISION_SEEDS: [u64; 3] = [7, 8, 9];
const SUPERVISION_PRETRAIN_EPOCHS: usize = 4;

struct SupervisionRun {
    seed: u64,
    outcome: demo::Rq3Outcome,
}

fn supervision_runs() -> &'static [SupervisionRun] {
    static RUNS: std::sync::OnceLock<Vec<SupervisionRun>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        SUPERVISION_SEEDS
            .iter()
            .map(|&seed| {
                let dir = tempfile::tempdir().unwrap();
                let run = RunConfig {
                    seed,
                    epochs: SUPERVISION_PRETRAIN_EPOCHS,
                    snapshot_epochs: vec![SUPERVISION_PRETRAIN_EPOCHS],
                    ..RunConfig::default()
                };
                let outcome = demo::rq3(dir.path(), &DemoOptions::new("demo-rq3", run)).unwrap();
                let o = &outcome;
                let _ = writeln!(
                    std::io::stderr(),
                    "  seed {seed}: {} fine-tuning epochs, test F1 {:.4}, shared {} -> {}, gini {:.4} -> {:.4}",
                    o.valid_f1.len(),
                    o.f1_test,
                    o.shared_zero_shot,
                    o.shared_supervised,
                    o.gini_zero_shot,
                    o.gini_supervised
                );
                SupervisionRun { seed, outcome }
            })
            .collect()
    })
}

fn seed_mean(f: impl Fn(&demo::Rq3Outcome) -> f64) -> f64 {
    let runs = supervision_runs();
    runs.iter().map(|r| f(&r.outcome)).sum::<f64>() / runs.len() as f64
}

#[test]
fn supervision_shrinks_shared_set() {
    let _g = serial();
    let (zs, sup) = (seed_mean(|o| o.shared_zero_shot as f64), seed_mean(|o| o.shared_supervised as f64));
    let pass = verdict(
        "supervision shared neurons",
        sup <= zs,
        &format!("mean shared: corpus vs zero-shot {zs:.2}, zero-shot vs supervised {sup:.2}"),
    );
    assert!(pass);
}

#[test]
fn supervision_sparsifies_activation_mass() {
    let _g = serial();
    let (zs, sup) = (seed_mean(|o| o.gini_zero_shot), seed_mean(|o| o.gini_supervised));
    let pass = verdict(
        "supervision sparsity",
        sup >= zs,
        &format!("mean Gini: zero-shot {zs:.4}, supervised {sup:.4}"),
    );
    assert!(pass);
}

#[test]
fn supervision_demo_prunes_avoided_without_mass() {
    let _g = serial();
    let shares: Vec<(u64, Option<f64>)> = supervision_runs()
        .iter()
        .map(|r| {
            let avoided = r.outcome.report.prune_reports.iter().find(|p| p.policy == PrunePolicy::Avoided);
            (r.seed, avoided.map(|p| p.mass_share))
        })
        .collect();
    let pass = verdict(
        "demo avoided prune",
        shares.iter().all(|(_, s)| *s == Some(0.0)),
        &format!("avoided mass share per seed {shares:?}"),
    );
    assert!(pass);
}
