// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end recipes on the bundled data.
//!
//! * rq1: language model snapshots over epochs on the tagged corpus
//! * rq2: the final language model on its own corpus and zero-shot on reviews
//! * rq3: zero-shot against sentiment fine-tuning, plus pruning

pub mod data;

use std::path::{Path, PathBuf};

use txray_core::corpus::{LabeledExample, TagAnnotation};
use txray_core::encoder::{evaluate_f1, finetune_classifier_with, FinetuneConfig, Snapshot};
use txray_core::pruning::{run_experiment, PrunePolicy};
use txray_core::vocab::Vocabulary;

use crate::config::RunConfig;
use crate::error::Result;
use crate::formats::{self, PreferenceFile, SnapshotFile, TraceFile};
use crate::pipeline::{self, Stage};
use crate::render::write_figures;
use crate::report::{write_report, Report, ReportBuilder};
use crate::text;

pub const CORPUS_TOKENS: usize = 200_000;
pub const TRAIN_REVIEWS: usize = 1_200;
pub const VALID_REVIEWS: usize = 200;
pub const TEST_REVIEWS: usize = 400;

/// Paths of the bundled data files, relative to the output directory.
pub struct DataFiles {
    pub corpus: PathBuf,
    pub annotations: PathBuf,
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
}

impl DataFiles {
    pub fn relative() -> Self {
        DataFiles {
            corpus: "data/corpus.txt".into(),
            annotations: "data/corpus.pos.tsv".into(),
            train: "data/reviews.train.tsv".into(),
            valid: "data/reviews.valid.tsv".into(),
            test: "data/reviews.test.tsv".into(),
        }
    }
}

/// Writes the bundled corpus, its tags and the review splits under `out`.
pub fn write_data(out: &Path) -> Result<DataFiles> {
    let files = DataFiles::relative();
    let lines = data::tagged_corpus(data::DATA_SEED, CORPUS_TOKENS);
    let words: Vec<Vec<String>> = lines.iter().map(|l| l.iter().map(|(w, _)| w.clone()).collect()).collect();
    text::write(&out.join(&files.corpus), text::format_corpus(&words))?;
    text::write(&out.join(&files.annotations), text::format_annotations(&lines))?;
    let reviews = data::reviews(data::DATA_SEED + 1, TRAIN_REVIEWS + VALID_REVIEWS + TEST_REVIEWS);
    let (train, rest) = reviews.split_at(TRAIN_REVIEWS);
    let (valid, test) = rest.split_at(VALID_REVIEWS);
    text::write(&out.join(&files.train), text::format_labeled(train))?;
    text::write(&out.join(&files.valid), text::format_labeled(valid))?;
    text::write(&out.join(&files.test), text::format_labeled(test))?;
    Ok(files)
}

/// Inputs read back from disk through the regular loaders.
pub struct Inputs {
    pub vocab: Vocabulary,
    pub corpus: txray_core::corpus::Corpus,
    pub tags: TagAnnotation,
    pub train: Vec<LabeledExample>,
    pub valid: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

pub fn load_inputs(out: &Path, files: &DataFiles) -> Result<Inputs> {
    let lines = text::read_corpus(&out.join(&files.corpus))?;
    let tags = text::read_annotations(&out.join(&files.annotations), &lines)?;
    let train = text::read_labeled(&out.join(&files.train))?;
    let valid = text::read_labeled(&out.join(&files.valid))?;
    let test = text::read_labeled(&out.join(&files.test))?;
    let vocab = pipeline::build_vocab(&lines, &[&train, &valid, &test])?;
    Ok(Inputs {
        corpus: text::encode_corpus(&vocab, &lines)?,
        train: text::encode_labeled(&vocab, &train)?,
        valid: text::encode_labeled(&vocab, &valid)?,
        test: text::encode_labeled(&vocab, &test)?,
        vocab,
        tags,
    })
}

/// Settings of a recipe beyond the shared [`RunConfig`].
#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub run: RunConfig,
    pub finetune: Plateau,
    /// Neurons pruned by the least/most active policies.
    pub prune_k: usize,
}

impl DemoOptions {
    pub fn new(command: &str, run: RunConfig) -> Self {
        let prune_k = (run.hidden / 75).max(1);
        let mut finetune = Plateau::default();
        finetune.config.seed = run.seed;
        DemoOptions {
            run: RunConfig {
                command: command.into(),
                ..run
            },
            finetune,
            prune_k,
        }
    }
}

/// Fine-tuning that stops at the onset of the validation F1 plateau: once
/// the best validation F1 reaches `min_f1`, training ends after `patience`
/// epochs without an improvement of at least `min_delta`. `config.epochs`
/// is the upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub config: FinetuneConfig,
    pub min_f1: f64,
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for Plateau {
    fn default() -> Self {
        Plateau {
            config: FinetuneConfig {
                epochs: 20,
                lr: 0.2,
                ..FinetuneConfig::default()
            },
            min_f1: 0.75,
            patience: 2,
            min_delta: 0.01,
        }
    }
}

/// Fine-tuned snapshot and the validation F1 after each epoch.
pub fn finetune_to_plateau(
    lm: &Snapshot,
    train: &[LabeledExample],
    valid: &[LabeledExample],
    plan: &Plateau,
) -> Result<(Snapshot, Vec<f64>)> {
    let mut curve = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut failure = None;
    let tuned = finetune_classifier_with(lm, train, &plan.config, |epoch, s| {
        let f1 = match evaluate_f1(s, valid, None, 0.5) {
            Ok((f1, _)) => f1,
            Err(e) => {
                failure = Some(e);
                return false;
            }
        };
        log::info!("finetune epoch {epoch}: validation F1 {f1:.4}");
        curve.push(f1);
        let warmed_up = best >= plan.min_f1;
        if f1 >= best + plan.min_delta {
            stale = 0;
        } else if warmed_up {
            stale += 1;
        }
        best = best.max(f1);
        stale < plan.patience
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((tuned, curve))
}

struct Artifacts<'a> {
    out: &'a Path,
    run: &'a RunConfig,
    vocab: &'a Vocabulary,
}

impl Artifacts<'_> {
    fn snapshot(&self, s: &Snapshot) -> Result<()> {
        let file = SnapshotFile {
            snapshot: s.clone(),
            vocab: self.vocab.clone(),
            run_config: self.run.clone(),
        };
        formats::write_snapshot(&self.out.join("snapshots").join(format!("{}.snap", s.stage_id)), &file)
    }

    fn stage(&self, st: &Stage) -> Result<()> {
        let key = crate::report::stage_key(&st.preference);
        let trace = TraceFile {
            trace: st.trace.clone(),
            run_config: self.run.clone(),
        };
        formats::write_trace(&self.out.join("traces").join(format!("{key}.jsonl")), &trace)?;
        let pref = PreferenceFile::new(st.preference.clone(), self.run.clone());
        formats::write_preference(&self.out.join("preferences").join(format!("{key}.json")), &pref)
    }

    fn report(&self, report: &Report) -> Result<()> {
        write_report(&self.out.join("report.json"), report)?;
        write_figures(report, &self.out.join("figures"))?;
        Ok(())
    }
}

fn with_data_paths(run: &RunConfig, out: &Path, files: &DataFiles) -> RunConfig {
    run.clone()
        .with_path("corpus", &files.corpus)
        .with_path("annotations", &files.annotations)
        .with_path("train", &files.train)
        .with_path("valid", &files.valid)
        .with_path("test", &files.test)
        .with_path("out", out)
}

/// Headline numbers of the epoch recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Rq1Outcome {
    pub report: Report,
    /// (shared count, mean Hellinger over shared) per consecutive pair.
    pub early: (usize, Option<f64>),
    pub late: (usize, Option<f64>),
    /// Tag L1 at the first and the last snapshot.
    pub l1_first: f64,
    pub l1_last: f64,
}

pub fn rq1(out: &Path, opts: &DemoOptions) -> Result<Rq1Outcome> {
    opts.run.validate()?;
    if opts.run.snapshot_epochs.len() < 3 {
        return Err(crate::Error::Usage("demo-rq1 needs three snapshot epochs".into()));
    }
    let files = write_data(out)?;
    let inputs = load_inputs(out, &files)?;
    let run = with_data_paths(&opts.run, out, &files);
    let art = Artifacts {
        out,
        run: &run,
        vocab: &inputs.vocab,
    };
    let train = pipeline::pretrain(&inputs.vocab, &inputs.corpus, &run)?;
    let mut builder = ReportBuilder::new(&inputs.vocab, run.clone());
    let mut keys = Vec::new();
    for s in &train.snapshots {
        art.snapshot(s)?;
        let st = pipeline::stage(s, &inputs.corpus, Some(&inputs.tags), "wiki", run.token_budget, run.mode)?;
        art.stage(&st)?;
        keys.push(builder.add_stage(&st.preference)?);
    }
    let sliced = pipeline::slice(&inputs.corpus, Some(&inputs.tags), run.token_budget)?.1;
    let corpus_tags = &sliced.expect("tags were given").tags;
    let (first, mid, last) = (&keys[0], &keys[keys.len() - 2], &keys[keys.len() - 1]);
    let early = builder.compare(first, mid)?;
    let early = (early.summary.counts.shared, early.summary.mean_distance);
    let late = builder.compare(mid, last)?;
    let late = (late.summary.counts.shared, late.summary.mean_distance);
    builder.length_shift(first, mid)?;
    builder.length_shift(mid, last)?;
    for k in &keys {
        builder.mass_curve(k)?;
    }
    let l1_first = builder.tag_match(first, corpus_tags)?.l1;
    for k in &keys[1..keys.len() - 1] {
        builder.tag_match(k, corpus_tags)?;
    }
    let l1_last = builder.tag_match(last, corpus_tags)?.l1;
    let report = builder.finish();
    art.report(&report)?;
    Ok(Rq1Outcome {
        report,
        early,
        late,
        l1_first,
        l1_last,
    })
}

fn final_snapshot(train: txray_core::encoder::TrainRun) -> Snapshot {
    train.snapshots.into_iter().last().expect("validated snapshot epochs are non-empty")
}

/// Pretraining with a single snapshot at the last epoch.
fn pretrain_final(inputs: &Inputs, run: &RunConfig) -> Result<Snapshot> {
    let run = RunConfig {
        snapshot_epochs: vec![run.epochs],
        ..run.clone()
    };
    Ok(final_snapshot(pipeline::pretrain(&inputs.vocab, &inputs.corpus, &run)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq2Outcome {
    pub report: Report,
    pub shared: usize,
    pub mean_distance: Option<f64>,
}

pub fn rq2(out: &Path, opts: &DemoOptions) -> Result<Rq2Outcome> {
    opts.run.validate()?;
    let files = write_data(out)?;
    let inputs = load_inputs(out, &files)?;
    let run = with_data_paths(&opts.run, out, &files);
    let art = Artifacts {
        out,
        run: &run,
        vocab: &inputs.vocab,
    };
    let lm = pretrain_final(&inputs, &run)?;
    art.snapshot(&lm)?;
    let reviews = pipeline::labeled_corpus(&inputs.train);
    let home = pipeline::stage(&lm, &inputs.corpus, Some(&inputs.tags), "wiki", run.token_budget, run.mode)?;
    let zero_shot = pipeline::stage(&lm, &reviews, None, "reviews", run.token_budget, run.mode)?;
    art.stage(&home)?;
    art.stage(&zero_shot)?;
    let mut builder = ReportBuilder::new(&inputs.vocab, run.clone());
    let a = builder.add_stage(&home.preference)?;
    let b = builder.add_stage(&zero_shot.preference)?;
    let c = builder.compare(&a, &b)?;
    let (shared, mean_distance) = (c.summary.counts.shared, c.summary.mean_distance);
    builder.length_shift(&a, &b)?;
    builder.mass_curve(&a)?;
    builder.mass_curve(&b)?;
    let report = builder.finish();
    art.report(&report)?;
    Ok(Rq2Outcome {
        report,
        shared,
        mean_distance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rq3Outcome {
    pub report: Report,
    /// Shared neurons between the corpus stage and zero-shot reviews.
    pub shared_zero_shot: usize,
    /// Shared neurons between zero-shot and supervised reviews.
    pub shared_supervised: usize,
    pub gini_zero_shot: f64,
    pub gini_supervised: f64,
    /// Validation F1 after each fine-tuning epoch.
    pub valid_f1: Vec<f64>,
    pub f1_test: f64,
}

pub fn rq3(out: &Path, opts: &DemoOptions) -> Result<Rq3Outcome> {
    opts.run.validate()?;
    let files = write_data(out)?;
    let inputs = load_inputs(out, &files)?;
    let run = with_data_paths(&opts.run, out, &files);
    let art = Artifacts {
        out,
        run: &run,
        vocab: &inputs.vocab,
    };
    let lm = pretrain_final(&inputs, &run)?;
    art.snapshot(&lm)?;
    let (sup, valid_f1) = finetune_to_plateau(&lm, &inputs.train, &inputs.valid, &opts.finetune)?;
    art.snapshot(&sup)?;
    let reviews = pipeline::labeled_corpus(&inputs.train);
    let home = pipeline::stage(&lm, &inputs.corpus, Some(&inputs.tags), "wiki", run.token_budget, run.mode)?;
    let zero_shot = pipeline::stage(&lm, &reviews, None, "reviews", run.token_budget, run.mode)?;
    let supervised = pipeline::stage(&sup, &reviews, None, "reviews", run.token_budget, run.mode)?;
    for st in [&home, &zero_shot, &supervised] {
        art.stage(st)?;
    }
    let mut builder = ReportBuilder::new(&inputs.vocab, run.clone());
    let h = builder.add_stage(&home.preference)?;
    let z = builder.add_stage(&zero_shot.preference)?;
    let s = builder.add_stage(&supervised.preference)?;
    let shared_zero_shot = builder.compare(&h, &z)?.summary.counts.shared;
    let shared_supervised = builder.compare(&z, &s)?.summary.counts.shared;
    builder.length_shift(&z, &s)?;
    let gini_zero_shot = builder.mass_curve(&z)?.gini;
    let gini_supervised = builder.mass_curve(&s)?.gini;
    let policies = [
        PrunePolicy::Avoided,
        PrunePolicy::LeastActive(opts.prune_k),
        PrunePolicy::MostActive(opts.prune_k),
        PrunePolicy::GainedBySupervision,
    ];
    let mut f1_test = 0.0;
    for p in &policies {
        let r = run_experiment(&sup, &zero_shot.preference, &supervised.preference, p, &inputs.train, &inputs.test);
        match r {
            Ok(r) => {
                f1_test = r.f1_test_before;
                builder.prune(&s, r);
            }
            // Too few active neurons for k is a property of the run, not a
            // failure of the recipe.
            Err(txray_core::Error::NotEnoughNeurons { requested, available }) => {
                log::warn!("skipping {p}: {requested} neurons requested, {available} active");
            }
            Err(e) => return Err(e.into()),
        }
    }
    let report = builder.finish();
    art.report(&report)?;
    Ok(Rq3Outcome {
        report,
        shared_zero_shot,
        shared_supervised,
        gini_zero_shot,
        gini_supervised,
        valid_f1,
        f1_test,
    })
}
