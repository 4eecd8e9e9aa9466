// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command line: argument parsing and one function per subcommand.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use txray_core::encoder::{evaluate_f1, finetune_classifier, FinetuneConfig};
use txray_core::metrics::compare;
use txray_core::preference::{merge, PartialAggregate};
use txray_core::pruning::{run_experiment, select, PrunePolicy, PruneReport};
use txray_core::trace::MagnitudeMode;

use crate::config::RunConfig;
use crate::demo::{self, DemoOptions};
use crate::error::{Error, Result};
use crate::formats::{self, PreferenceFile, SnapshotFile, TraceFile};
use crate::render::write_figures;
use crate::report::{write_report, ReportBuilder};
use crate::{pipeline, text};

#[derive(Debug, Parser)]
#[command(name = "txray", version, about = "Trace, compare and prune what encoder neurons prefer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain the language model and write snapshots.
    Train(TrainArgs),
    /// Fine-tune a snapshot as a binary classifier.
    Finetune(FinetuneArgs),
    /// Record the maximally activated neuron of every token.
    Trace(TraceArgs),
    /// Aggregate one or more trace shards into preference distributions.
    Aggregate(AggregateArgs),
    /// Compare two preference files neuron by neuron.
    Compare(CompareArgs),
    /// Ablate a neuron set and measure the F1 change.
    Prune(PruneArgs),
    /// Assemble preference files into a report.
    Report(ReportArgs),
    /// Render the figures of a report as SVG.
    Render(RenderArgs),
    /// Epoch comparison on the bundled corpus.
    #[command(name = "demo-rq1")]
    DemoRq1(DemoArgs),
    /// Zero-shot application to the bundled reviews.
    #[command(name = "demo-rq2")]
    DemoRq2(DemoArgs),
    /// Supervised fine-tuning and pruning on the bundled reviews.
    #[command(name = "demo-rq3")]
    DemoRq3(DemoArgs),
}

/// Tokens traced per stage; `all` means no limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget(pub Option<usize>);

impl std::str::FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(Budget(None));
        }
        s.parse::<usize>().map(|k| Budget(Some(k))).map_err(|e| format!("{s:?}: {e}"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub embed: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Comma-separated 1-based epochs to snapshot.
    #[arg(long, value_delimiter = ',', default_value = "1,9,10")]
    pub snapshots: Vec<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Tokens traced per stage, or `all`.
    #[arg(long, default_value = "100000")]
    pub budget: Budget,
    #[arg(long, default_value_t = MagnitudeMode::Abs)]
    pub mode: MagnitudeMode,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Plain text corpus, one sequence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Labeled files whose tokens join the vocabulary.
    #[arg(long)]
    pub labeled: Vec<PathBuf>,
    /// Output directory for `<stage>.snap` files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Labeled training file (`label<TAB>text`).
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled file to report test F1 on.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = demo::Plateau::default().config.epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = demo::Plateau::default().config.lr)]
    pub lr: f32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Plain text corpus to trace.
    #[arg(long, conflicts_with = "labeled", required_unless_present = "labeled")]
    pub corpus: Option<PathBuf>,
    /// Tag file aligned with the corpus (`token<TAB>tag`).
    #[arg(long, requires = "corpus")]
    pub annotations: Option<PathBuf>,
    /// Labeled file to trace; records carry labels and class probabilities.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Corpus name used in stage keys; defaults to the file stem.
    #[arg(long)]
    pub corpus_id: Option<String>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Trace files, merged in order when more than one is given.
    #[arg(long, required = true)]
    pub trace: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Fine-tuned snapshot to ablate.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Preference of the stage before supervision.
    #[arg(long)]
    pub before: PathBuf,
    /// Preference of the supervised stage.
    #[arg(long)]
    pub after: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// avoided | gained | least[:k] | most[:k] | explicit:i,j | file:<path>
    #[arg(long)]
    pub policy: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the selected neurons as a prune-set file.
    #[arg(long)]
    pub write_set: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Any snapshot sharing the vocabulary of the preferences.
    #[arg(long)]
    pub snapshot: PathBuf,
    /// Preference files; consecutive pairs are compared.
    #[arg(long, required = true)]
    pub preference: Vec<PathBuf>,
    /// Corpus and tag file for tag matching of tagged stages.
    #[arg(long, requires = "annotations")]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub annotations: Option<PathBuf>,
    /// Prune result files to include.
    #[arg(long)]
    pub prune: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also render figures into this directory.
    #[arg(long)]
    pub figures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long, default_value = "txray-out")]
    pub out: PathBuf,
}

/// Result of `prune`, with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneFile {
    pub format: String,
    pub version: u32,
    pub run_config: RunConfig,
    pub report: PruneReport,
}

pub const PRUNE_FORMAT: &str = "txray-prune";

fn run_config(command: &str, model: Option<&ModelArgs>, budget: Option<&BudgetArgs>) -> RunConfig {
    let mut cfg = RunConfig {
        command: command.into(),
        ..RunConfig::default()
    };
    if let Some(m) = model {
        cfg.seed = m.seed;
        cfg.hidden = m.hidden;
        cfg.embed = m.embed;
        cfg.epochs = m.epochs;
        cfg.snapshot_epochs = m.snapshots.clone();
    }
    if let Some(b) = budget {
        cfg.token_budget = b.budget.0;
        cfg.mode = b.mode;
    }
    cfg
}

fn json_to<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Render(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Finetune(a) => finetune(a),
        Command::Trace(a) => trace(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Prune(a) => prune(a),
        Command::Report(a) => report(a),
        Command::Render(a) => render(a),
        Command::DemoRq1(a) => demo_rq1(a),
        Command::DemoRq2(a) => demo_rq2(a),
        Command::DemoRq3(a) => demo_rq3(a),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut run = run_config("train", Some(&a.model), None)
        .with_path("corpus", &a.corpus)
        .with_path("out", &a.out);
    for (i, p) in a.labeled.iter().enumerate() {
        run = run.with_path(&format!("labeled.{i}"), p);
    }
    run.validate()?;
    let lines = text::read_corpus(&a.corpus)?;
    let labeled = a.labeled.iter().map(|p| text::read_labeled(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[(u8, Vec<String>)]> = labeled.iter().map(Vec::as_slice).collect();
    let vocab = pipeline::build_vocab(&lines, &refs)?;
    let corpus = text::encode_corpus(&vocab, &lines)?;
    let result = pipeline::pretrain(&vocab, &corpus, &run)?;
    for (epoch, loss) in result.epoch_losses.iter().enumerate() {
        log::info!("epoch {}: loss {loss:.4}", epoch + 1);
    }
    for s in result.snapshots {
        let path = a.out.join(format!("{}.snap", s.stage_id));
        let file = SnapshotFile {
            snapshot: s,
            vocab: vocab.clone(),
            run_config: run.clone(),
        };
        formats::write_snapshot(&path, &file)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn finetune(a: FinetuneArgs) -> Result<()> {
    let mut run = RunConfig {
        seed: a.seed,
        ..run_config("finetune", None, None)
    }
    .with_path("snapshot", &a.snapshot)
    .with_path("train", &a.train)
    .with_path("out", &a.out);
    if let Some(t) = &a.test {
        run = run.with_path("test", t);
    }
    if a.epochs == 0 {
        return Err(Error::Usage("--epochs must be at least 1".into()));
    }
    let input = formats::read_snapshot(&a.snapshot)?;
    let train = text::encode_labeled(&input.vocab, &text::read_labeled(&a.train)?)?;
    let cfg = FinetuneConfig {
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        ..FinetuneConfig::default()
    };
    let tuned = finetune_classifier(&input.snapshot, &train, &cfg)?;
    println!("train F1 {:.4}", evaluate_f1(&tuned, &train, None, 0.5)?.0);
    if let Some(t) = &a.test {
        let test = text::encode_labeled(&input.vocab, &text::read_labeled(t)?)?;
        println!("test F1 {:.4}", evaluate_f1(&tuned, &test, None, 0.5)?.0);
    }
    let file = SnapshotFile {
        snapshot: tuned,
        vocab: input.vocab,
        run_config: run,
    };
    formats::write_snapshot(&a.out, &file)
}

fn trace(a: TraceArgs) -> Result<()> {
    let mut run = run_config("trace", None, Some(&a.budget))
        .with_path("snapshot", &a.snapshot)
        .with_path("out", &a.out);
    run.validate()?;
    let input = formats::read_snapshot(&a.snapshot)?;
    let (corpus, tags, source) = match (&a.corpus, &a.labeled) {
        (Some(c), _) => {
            run = run.with_path("corpus", c);
            if let Some(t) = &a.annotations {
                run = run.with_path("annotations", t);
            }
            let (corpus, tags) = pipeline::load_corpus(&input.vocab, c, a.annotations.as_deref())?;
            (corpus, tags, c)
        }
        (None, Some(l)) => {
            run = run.with_path("labeled", l);
            let examples = text::encode_labeled(&input.vocab, &text::read_labeled(l)?)?;
            (pipeline::labeled_corpus(&examples), None, l)
        }
        (None, None) => return Err(Error::Usage("one of --corpus or --labeled is required".into())),
    };
    let corpus_id = a.corpus_id.clone().unwrap_or_else(|| file_stem(source));
    let stage = pipeline::stage(&input.snapshot, &corpus, tags.as_ref(), &corpus_id, run.token_budget, run.mode)?;
    println!("{} records", stage.trace.records.len());
    formats::write_trace(
        &a.out,
        &TraceFile {
            trace: stage.trace,
            run_config: run,
        },
    )
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let mut run = run_config("aggregate", None, None).with_path("out", &a.out);
    let mut shards = Vec::new();
    for (i, p) in a.trace.iter().enumerate() {
        run = run.with_path(&format!("trace.{i}"), p);
        let t = formats::read_trace(p)?;
        shards.push(PartialAggregate::from_records(t.trace.meta.clone(), &t.trace.records)?);
    }
    let preference = merge(&shards)?;
    run.mode = preference.meta.mode;
    run.token_budget = preference.meta.token_budget;
    formats::write_preference(&a.out, &PreferenceFile::new(preference, run))
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let pa = formats::read_preference(&a.a)?;
    let pb = formats::read_preference(&a.b)?;
    let summary = compare(&pa.preference, &pb.preference)?;
    let bytes = json_to(&summary)?;
    match &a.out {
        Some(p) => text::write(p, bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn parse_policy(spec: &str) -> Result<PrunePolicy> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let path = Path::new(path);
            let neurons = text::parse_neuron_list(path, &text::read_to_string(path)?)?;
            Ok(PrunePolicy::Explicit(neurons))
        }
        None => spec.parse().map_err(|e: txray_core::Error| Error::Usage(e.to_string())),
    }
}

fn prune(a: PruneArgs) -> Result<()> {
    let policy = parse_policy(&a.policy)?;
    let run = run_config("prune", None, None)
        .with_path("snapshot", &a.snapshot)
        .with_path("before", &a.before)
        .with_path("after", &a.after)
        .with_path("train", &a.train)
        .with_path("test", &a.test)
        .with_path("out", &a.out);
    let sup = formats::read_snapshot(&a.snapshot)?;
    let before = formats::read_preference(&a.before)?.preference;
    let after = formats::read_preference(&a.after)?.preference;
    let train = text::encode_labeled(&sup.vocab, &text::read_labeled(&a.train)?)?;
    let test = text::encode_labeled(&sup.vocab, &text::read_labeled(&a.test)?)?;
    if let Some(p) = &a.write_set {
        text::write(p, text::format_neuron_list(&select(&policy, &before, &after)?))?;
    }
    let report = run_experiment(&sup.snapshot, &before, &after, &policy, &train, &test)?;
    println!(
        "{}: {} neurons, mass share {:.4}%, test F1 {:.4} -> {:.4}",
        report.policy, report.neuron_count, report.mass_share, report.f1_test_before, report.f1_test_after
    );
    let file = PruneFile {
        format: PRUNE_FORMAT.into(),
        version: 1,
        run_config: run,
        report,
    };
    text::write(&a.out, json_to(&file)?)
}

pub fn read_prune(path: &Path) -> Result<PruneFile> {
    let s = text::read_to_string(path)?;
    let f: PruneFile = serde_json::from_str(&s).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if f.format != PRUNE_FORMAT {
        return Err(Error::format(path, format!("expected format {PRUNE_FORMAT:?}, found {:?}", f.format)));
    }
    Ok(f)
}

fn report(a: ReportArgs) -> Result<()> {
    let mut run = run_config("report", None, None)
        .with_path("snapshot", &a.snapshot)
        .with_path("out", &a.out);
    for (i, p) in a.preference.iter().enumerate() {
        run = run.with_path(&format!("preference.{i}"), p);
    }
    let snap = formats::read_snapshot(&a.snapshot)?;
    let tags = match (&a.corpus, &a.annotations) {
        (Some(c), Some(t)) => {
            run = run.with_path("corpus", c).with_path("annotations", t);
            Some(text::read_annotations(t, &text::read_corpus(c)?)?)
        }
        _ => None,
    };
    let prefs = a.preference.iter().map(|p| formats::read_preference(p)).collect::<Result<Vec<_>>>()?;
    let mut builder = ReportBuilder::new(&snap.vocab, run);
    let mut keys = Vec::new();
    for p in &prefs {
        keys.push(builder.add_stage(&p.preference)?);
    }
    for pair in keys.windows(2) {
        builder.compare(&pair[0], &pair[1])?;
        builder.length_shift(&pair[0], &pair[1])?;
    }
    for (key, p) in keys.iter().zip(&prefs) {
        builder.mass_curve(key)?;
        if let (Some(t), Some(_)) = (&tags, &p.preference.tags) {
            let n = p.preference.meta.token_budget.unwrap_or(t.len());
            builder.tag_match(key, &t.slice_first(n).tags)?;
        }
    }
    for p in &a.prune {
        let f = read_prune(p)?;
        let key = f.report.stage_id.clone();
        builder.prune(&key, f.report);
    }
    let report = builder.finish();
    write_report(&a.out, &report)?;
    if let Some(dir) = &a.figures {
        write_figures(&report, dir)?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let report = crate::report::read_report(&a.report)?;
    for p in write_figures(&report, &a.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn demo_options(command: &str, a: &DemoArgs) -> DemoOptions {
    DemoOptions::new(command, run_config(command, Some(&a.model), Some(&a.budget)))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn demo_rq1(a: DemoArgs) -> Result<()> {
    let o = demo::rq1(&a.out, &demo_options("demo-rq1", &a))?;
    println!("early pair: shared {}, mean H {}", o.early.0, fmt_opt(o.early.1));
    println!("late pair: shared {}, mean H {}", o.late.0, fmt_opt(o.late.1));
    println!("tag L1: first {:.4}, last {:.4}", o.l1_first, o.l1_last);
    Ok(())
}

fn demo_rq2(a: DemoArgs) -> Result<()> {
    let o = demo::rq2(&a.out, &demo_options("demo-rq2", &a))?;
    println!("corpus vs zero-shot: shared {}, mean H {}", o.shared, fmt_opt(o.mean_distance));
    Ok(())
}

fn demo_rq3(a: DemoArgs) -> Result<()> {
    let o = demo::rq3(&a.out, &demo_options("demo-rq3", &a))?;
    println!(
        "fine-tuning: {} epochs, validation F1 {}, test F1 {:.4}",
        o.valid_f1.len(),
        fmt_opt(o.valid_f1.last().copied()),
        o.f1_test
    );
    println!("shared: zero-shot {}, supervised {}", o.shared_zero_shot, o.shared_supervised);
    println!("gini: zero-shot {:.4}, supervised {:.4}", o.gini_zero_shot, o.gini_supervised);
    for r in &o.report.prune_reports {
        println!(
            "{}: {} neurons, mass share {:.4}%, test F1 {:.4} -> {:.4}",
            r.policy, r.neuron_count, r.mass_share, r.f1_test_before, r.f1_test_after
        );
    }
    Ok(())
}
