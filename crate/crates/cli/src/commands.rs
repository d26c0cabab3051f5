use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use b3sum_core::classifier::{
    prepare_examples, train_classifier, undersample_tune, ClassifierParams, InputKind, LabeledExample,
};
use b3sum_core::config::RunConfig;
use b3sum_core::corpus::{
    preprocess, split, synth_generate, write_jsonl, NewsPair, SplitSizes, StructureType, SynthConfig, VocabMode,
    Vocabulary,
};
use b3sum_core::eval::{
    annotation_stats, breakdown_report, parse_annotation_tsv, score_document, DocResult, SentenceRouge, PATTERNS,
};
use b3sum_core::pipeline::{
    auto_label_corpus, finetune, model_digest, pretrain, structure_aware_summarize, Finetuned, Manifest, Stage,
    StructureAwareModel,
};
use b3sum_core::summarizer::{decode, Example, SummarizerParams};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use crate::io::{
    load_classifier, load_summarizer, read_pairs, read_summaries, save_model, write_lines, SummaryRecord,
};
use crate::Command;

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Value> {
    match cmd {
        Command::GenSynth(a) => gen_synth(a, cfg),
        Command::BuildVocab(a) => build_vocab(a, cfg),
        Command::Preprocess(a) => run_preprocess(a, cfg),
        Command::Pretrain(a) => run_pretrain(a, cfg),
        Command::AutoLabel(a) => auto_label(a, cfg),
        Command::Finetune(a) => run_finetune(a, cfg),
        Command::TrainClassifier(a) => run_train_classifier(a, cfg),
        Command::TuneUndersample(a) => tune_undersample(a, cfg),
        Command::Summarize(a) => summarize(a, cfg),
        Command::Evaluate(a) => evaluate(a),
        Command::AlignEval(a) => align_eval(a),
        Command::Report(a) => report(a),
        Command::Stats(a) => stats(a),
    }
}

fn path_str(p: &std::path::Path) -> String {
    p.display().to_string()
}

fn update_manifest(path: &Option<PathBuf>, f: impl FnOnce(&mut Manifest)) -> Result<()> {
    if let Some(path) = path {
        let mut m = Manifest::load_or_default(path)?;
        f(&mut m);
        m.save(path)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GenSynth {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    oov_rate: f64,
    /// Fraction of parallel-structure pairs.
    #[arg(long, default_value_t = 0.8)]
    mix: f64,
    /// Output JSONL corpus.
    #[arg(long)]
    data: PathBuf,
}

fn gen_synth(a: GenSynth, cfg: &RunConfig) -> Result<Value> {
    if !(0.0..=1.0).contains(&a.oov_rate) || !(0.0..=1.0).contains(&a.mix) {
        bail!("--oov-rate and --mix must lie in [0, 1]");
    }
    let pairs = synth_generate(&SynthConfig { seed: cfg.seed, n: a.n, oov_rate: a.oov_rate, structure_mix: a.mix });
    write_jsonl(&a.data, &pairs)?;
    let parallel = pairs.iter().filter(|p| p.label.map(|l| l.binary()) == Some(StructureType::Parallel)).count();
    Ok(json!({ "data": path_str(&a.data), "pairs": pairs.len(), "parallel": parallel, "sequence": pairs.len() - parallel }))
}

#[derive(Args, Debug)]
pub struct BuildVocab {
    #[arg(long)]
    data: PathBuf,
    /// Output vocabulary, one token per line.
    #[arg(long)]
    vocab: PathBuf,
    /// Keep tokens seen at least this often instead of the `vocab_size` cap.
    #[arg(long)]
    min_count: Option<usize>,
    /// Use the classifier's `cls_min_count`.
    #[arg(long, conflicts_with = "min_count")]
    classifier: bool,
}

fn build_vocab(a: BuildVocab, cfg: &RunConfig) -> Result<Value> {
    let pairs = read_pairs(&a.data, true)?;
    let mode = match (a.min_count, a.classifier) {
        (Some(k), _) => VocabMode::MinCount(k),
        (None, true) => VocabMode::MinCount(cfg.cls_min_count),
        (None, false) => VocabMode::Cap(cfg.vocab_size),
    };
    let vocab = Vocabulary::build(&pairs, mode)?;
    vocab.save(&a.vocab)?;
    Ok(json!({ "vocab": path_str(&a.vocab), "size": vocab.len(), "mode": mode }))
}

#[derive(Args, Debug)]
pub struct Preprocess {
    #[arg(long)]
    data: PathBuf,
    /// Output JSONL of the kept pairs.
    #[arg(long, required_unless_present = "split_dir")]
    output: Option<PathBuf>,
    /// Also write train/dev/test.jsonl here, split in the reference proportions.
    #[arg(long)]
    split_dir: Option<PathBuf>,
}

fn run_preprocess(a: Preprocess, cfg: &RunConfig) -> Result<Value> {
    let pairs = read_pairs(&a.data, false)?;
    let (kept, report) = preprocess(&pairs, &cfg.preprocess_config());
    if let Some(out) = &a.output {
        write_jsonl(out, &kept)?;
    }
    let mut result = json!({ "report": report });
    if let Some(dir) = &a.split_dir {
        std::fs::create_dir_all(dir)?;
        let sizes = SplitSizes::reference_proportions(kept.len());
        let s = split(&kept, sizes, cfg.seed)?;
        for (name, part) in [("train", &s.train), ("dev", &s.dev), ("test", &s.test)] {
            write_jsonl(dir.join(format!("{name}.jsonl")), part)?;
        }
        result["split"] = json!({ "train": s.train.len(), "dev": s.dev.len(), "test": s.test.len() });
    }
    Ok(result)
}

#[derive(Args, Debug)]
pub struct Pretrain {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Update steps; defaults to `epochs` passes over the data.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn steps_for(n: usize, epochs: usize, batch: usize) -> usize {
    epochs * n.div_ceil(batch.max(1))
}

fn run_pretrain(a: Pretrain, cfg: &RunConfig) -> Result<Value> {
    let pairs = read_pairs(&a.data, true)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let mut model = SummarizerParams::new(cfg.summarizer_dims(vocab.len()), cfg.seed)?;
    let steps = a.steps.unwrap_or_else(|| steps_for(pairs.len(), cfg.epochs, cfg.batch_size));
    let trained = pretrain(&mut model, &vocab, &pairs, &cfg.train_config(), steps, cfg.seed.wrapping_add(1))?;
    save_model(&a.checkpoint, &model.store, cfg)?;
    let digest = model_digest(&model);
    update_manifest(&a.manifest, |m| {
        m.advance(Stage::Pretrained);
        m.config_hash = Some(b3sum_core::checkpoint::hex(&cfg.hash()));
        m.vocab = Some(path_str(&a.vocab));
        m.base_checkpoint = Some(path_str(&a.checkpoint));
        m.base_digest = Some(digest.clone());
        m.base_steps = Some(steps);
    })?;
    Ok(json!({
        "checkpoint": path_str(&a.checkpoint),
        "digest": digest,
        "steps": steps,
        "first_loss": trained.losses.first(),
        "last_loss": trained.losses.last(),
    }))
}

#[derive(Args, Debug)]
pub struct AutoLabel {
    /// Summary classifier checkpoint.
    #[arg(long)]
    classifier: PathBuf,
    /// Classifier vocabulary.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    parallel_out: PathBuf,
    #[arg(long)]
    sequence_out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn auto_label(a: AutoLabel, cfg: &RunConfig) -> Result<Value> {
    let pairs = read_pairs(&a.data, true)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let classifier = load_classifier(&a.classifier, cfg)?;
    let labeled = auto_label_corpus(&classifier, &vocab, &pairs, cfg.tau)?;
    write_jsonl(&a.parallel_out, &labeled.parallel)?;
    write_jsonl(&a.sequence_out, &labeled.sequence)?;
    let counts = labeled.counts();
    update_manifest(&a.manifest, |m| {
        m.advance(Stage::AutoLabeled);
        m.summary_classifier = Some(path_str(&a.classifier));
        m.classifier_vocab.get_or_insert_with(|| path_str(&a.vocab));
        m.tau = Some(cfg.tau);
        m.subset_counts = Some(counts);
        m.parallel_subset = Some(path_str(&a.parallel_out));
        m.sequence_subset = Some(path_str(&a.sequence_out));
        let note = "pairs below tau are left unlabeled; the threshold is a hypothesis for partial labeling";
        if !m.notes.iter().any(|n| n == note) {
            m.notes.push(note.into());
        }
    })?;
    Ok(json!({ "tau": cfg.tau, "counts": counts }))
}

#[derive(Args, Debug)]
pub struct Finetune {
    /// Base summarizer checkpoint.
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Subset JSONL (output of auto-label).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: StructureType,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Update steps; defaults to `finetune_epochs` passes over the subset.
    #[arg(long)]
    steps: Option<usize>,
    /// Steps the base was trained for (read from the manifest when omitted).
    #[arg(long)]
    base_steps: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn run_finetune(a: Finetune, cfg: &RunConfig) -> Result<Value> {
    let subset = read_pairs(&a.data, true)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let base = load_summarizer(&a.base, cfg)?;
    let manifest = a.manifest.as_ref().map(Manifest::load_or_default).transpose()?;
    let base_steps = a.base_steps.or(manifest.as_ref().and_then(|m| m.base_steps)).unwrap_or(0);
    let steps = a.steps.unwrap_or_else(|| steps_for(subset.len(), cfg.finetune_epochs, cfg.batch_size));
    let seed = cfg.seed.wrapping_add(2 + a.label.index() as u64);
    let ft = finetune(&base, base_steps, &vocab, &subset, a.label, &cfg.finetune_config(), steps, seed)?;
    save_model(&a.checkpoint, &ft.model.store, cfg)?;
    let prov = ft.provenance.clone();
    update_manifest(&a.manifest, |m| {
        m.advance(Stage::Finetuned);
        match a.label {
            StructureType::Parallel => {
                m.parallel_checkpoint = Some(path_str(&a.checkpoint));
                m.parallel = Some(prov.clone());
            }
            StructureType::Sequence => {
                m.sequence_checkpoint = Some(path_str(&a.checkpoint));
                m.sequence = Some(prov.clone());
            }
        }
    })?;
    Ok(json!({
        "checkpoint": path_str(&a.checkpoint),
        "digest": model_digest(&ft.model),
        "provenance": ft.provenance,
        "first_loss": ft.losses.first(),
        "last_loss": ft.losses.last(),
    }))
}

#[derive(Args, Debug)]
pub struct TrainClassifier {
    /// summaries or articles
    #[arg(long)]
    input: InputKind,
    #[arg(long)]
    data: PathBuf,
    /// Labeled held-out pairs reported after every epoch.
    #[arg(long)]
    heldout: Option<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Keep the epoch with the best held-out macro-F1.
    #[arg(long, requires = "heldout")]
    select_best: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn labeled(path: &Path, vocab: &Vocabulary, kind: InputKind, cfg: &RunConfig) -> Result<Vec<LabeledExample>> {
    let pairs = read_pairs(path, true)?;
    prepare_examples(vocab, &pairs, kind, cfg.max_src_len).with_context(|| format!("reading {}", path.display()))
}

fn run_train_classifier(a: TrainClassifier, cfg: &RunConfig) -> Result<Value> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let train = labeled(&a.data, &vocab, a.input, cfg)?;
    let heldout = a.heldout.as_ref().map(|p| labeled(p, &vocab, a.input, cfg)).transpose()?;
    let mut model = ClassifierParams::new(cfg.classifier_dims(vocab.len()), cfg.seed)?;
    let tcfg = b3sum_core::classifier::ClassifierTrainConfig { select_best: a.select_best, ..cfg.classifier_train_config() };
    let report = train_classifier(&mut model, &train, heldout.as_deref(), &tcfg)?;
    save_model(&a.checkpoint, &model.store, cfg)?;
    update_manifest(&a.manifest, |m| {
        m.advance(Stage::ClassifiersTrained);
        m.classifier_vocab = Some(path_str(&a.vocab));
        match a.input {
            InputKind::Summary => m.summary_classifier = Some(path_str(&a.checkpoint)),
            InputKind::Article => m.article_classifier = Some(path_str(&a.checkpoint)),
        }
    })?;
    Ok(json!({ "checkpoint": path_str(&a.checkpoint), "input": a.input, "report": report }))
}

#[derive(Args, Debug)]
pub struct TuneUndersample {
    #[arg(long)]
    input: InputKind,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    heldout: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Checkpoint of the selected model.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Majority-class retention ratios to try, in order.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
}

fn tune_undersample(a: TuneUndersample, cfg: &RunConfig) -> Result<Value> {
    let vocab = Vocabulary::load(&a.vocab)?;
    let train = labeled(&a.data, &vocab, a.input, cfg)?;
    let heldout = labeled(&a.heldout, &vocab, a.input, cfg)?;
    let mut ucfg = cfg.undersample_config();
    if let Some(r) = a.ratios {
        if r.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            bail!("ratios must lie in (0, 1]");
        }
        ucfg.ratios = r;
    }
    let init = ClassifierParams::new(cfg.classifier_dims(vocab.len()), cfg.seed)?;
    let outcome = undersample_tune(&init, &train, &heldout, &ucfg)?;
    if !outcome.qualified {
        log::warn!("no ratio reached precision {} for both classes; kept ratio {}", ucfg.target_precision, outcome.ratio);
    }
    save_model(&a.checkpoint, &outcome.model.store, cfg)?;
    Ok(json!({
        "checkpoint": path_str(&a.checkpoint),
        "ratio": outcome.ratio,
        "qualified": outcome.qualified,
        "trials": outcome.trials,
    }))
}

#[derive(Args, Debug)]
pub struct Summarize {
    #[arg(long)]
    data: PathBuf,
    /// Output summaries JSONL.
    #[arg(long)]
    output: PathBuf,
    /// Manifest of a finished pipeline (structure-aware routing).
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    manifest: Option<PathBuf>,
    /// A single summarizer checkpoint used for every article.
    #[arg(long, requires = "vocab")]
    model: Option<PathBuf>,
    /// Summarizer vocabulary (with --model).
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, value_enum)]
    decode: Option<DecodeArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DecodeArg {
    Greedy,
    Beam,
}

fn need<'a>(field: &'a Option<String>, what: &str) -> Result<&'a str> {
    field.as_deref().with_context(|| format!("manifest has no {what}; run the stage that produces it first"))
}

fn load_structure_aware(path: &PathBuf, cfg: &RunConfig) -> Result<StructureAwareModel> {
    let m = Manifest::load(path)?;
    let vocab = Vocabulary::load(need(&m.vocab, "summarizer vocabulary")?)?;
    let cls_vocab = Vocabulary::load(need(&m.classifier_vocab, "classifier vocabulary")?)?;
    let classifier = load_classifier(need(&m.article_classifier, "article classifier")?.as_ref(), cfg)?;
    let sub = |ckpt: &Option<String>, prov: &Option<_>, label: &str| -> Result<Finetuned> {
        Ok(Finetuned {
            model: load_summarizer(need(ckpt, &format!("{label} checkpoint"))?.as_ref(), cfg)?,
            provenance: prov.clone().with_context(|| format!("manifest has no {label} provenance"))?,
            losses: Vec::new(),
        })
    };
    let parallel = sub(&m.parallel_checkpoint, &m.parallel, "parallel")?;
    let sequence = sub(&m.sequence_checkpoint, &m.sequence, "sequence")?;
    Ok(StructureAwareModel::new(classifier, cls_vocab, vocab, parallel, sequence, cfg.max_src_len)?)
}

fn summarize(a: Summarize, cfg: &RunConfig) -> Result<Value> {
    let pairs = read_pairs(&a.data, true)?;
    let mut dcfg = cfg.decode_config();
    match a.decode {
        Some(DecodeArg::Greedy) => dcfg.mode = b3sum_core::summarizer::DecodeMode::Greedy,
        Some(DecodeArg::Beam) => dcfg.mode = b3sum_core::summarizer::DecodeMode::Beam(cfg.beam_size),
        None => {}
    }
    let mut records = Vec::with_capacity(pairs.len());
    let mut routed = BTreeMap::<String, usize>::new();
    let mut degenerate = 0;
    let mut push = |p: &NewsPair, s: &b3sum_core::summarizer::DecodedSummary, label: Option<StructureType>| {
        degenerate += usize::from(s.is_degenerate());
        records.push(SummaryRecord {
            id: p.id.clone(),
            summary: s.sentences.iter().map(|t| t.join(" ")).collect(),
            label: label.map(|l| l.to_string()),
        });
    };
    match (&a.manifest, &a.model) {
        (Some(m), _) => {
            let model = load_structure_aware(m, cfg)?;
            for p in &pairs {
                let r = structure_aware_summarize(&model, &p.article, &dcfg)?;
                *routed.entry(r.chosen_label.to_string()).or_default() += 1;
                push(p, &r.summary, Some(r.chosen_label));
            }
        }
        (None, Some(ckpt)) => {
            let vocab = Vocabulary::load(a.vocab.as_ref().expect("clap requires vocab with model"))?;
            let model = load_summarizer(ckpt, cfg)?;
            for p in &pairs {
                let s = decode(&model, &vocab, &Example::source_only(&vocab, &p.article), &dcfg)?;
                push(p, &s, None);
            }
        }
        (None, None) => unreachable!("clap requires --manifest or --model"),
    }
    write_lines(&a.output, &records)?;
    Ok(json!({ "output": path_str(&a.output), "articles": records.len(), "routed": routed, "degenerate": degenerate }))
}

#[derive(Args, Debug)]
pub struct PairedFiles {
    /// System summaries JSONL.
    #[arg(long)]
    sys: PathBuf,
    /// Reference summaries JSONL (a corpus file works too).
    #[arg(long = "ref")]
    reference: PathBuf,
}

/// Scores every system summary against the reference with the same id.
fn score_all(files: &PairedFiles) -> Result<Vec<DocResult>> {
    let sys = read_summaries(&files.sys)?;
    let refs = read_summaries(&files.reference)?;
    let by_id: HashMap<&str, &SummaryRecord> = refs.iter().map(|r| (r.id.as_str(), r)).collect();
    if sys.is_empty() {
        bail!("{} holds no summaries", files.sys.display());
    }
    sys.iter()
        .map(|s| {
            let r = by_id.get(s.id.as_str()).with_context(|| format!("no reference for id {:?}", s.id))?;
            let label = match r.structure()? {
                Some(l) => Some(l),
                None => s.structure()?,
            };
            Ok(score_document(&s.id, label, &s.sentences(), &r.sentences())?)
        })
        .collect()
}

#[derive(Args, Debug)]
pub struct Evaluate {
    #[command(flatten)]
    files: PairedFiles,
}

fn evaluate(a: Evaluate) -> Result<Value> {
    let docs = score_all(&a.files)?;
    let mean = SentenceRouge::mean(&docs.iter().map(|d| d.overall).collect::<Vec<_>>());
    Ok(json!({ "documents": docs.len(), "rouge_1": mean.r1, "rouge_2": mean.r2, "rouge_l": mean.rl }))
}

#[derive(Args, Debug)]
pub struct AlignEval {
    #[command(flatten)]
    files: PairedFiles,
}

fn align_eval(a: AlignEval) -> Result<Value> {
    let docs = score_all(&a.files)?;
    let mut histogram: BTreeMap<String, usize> =
        PATTERNS.iter().map(|p| (p.iter().map(|d| d.to_string()).collect(), 0)).collect();
    let mut per_doc = Vec::with_capacity(docs.len());
    for d in &docs {
        let pattern = d.alignment.pattern();
        *histogram.get_mut(&pattern).expect("pattern is a permutation") += 1;
        per_doc.push(json!({ "id": d.id, "pattern": pattern, "scores": d.alignment.scores, "mean": d.alignment.mean() }));
    }
    Ok(json!({ "documents": docs.len(), "patterns": histogram, "alignments": per_doc }))
}

#[derive(Args, Debug)]
pub struct Report {
    #[command(flatten)]
    files: PairedFiles,
    /// Also write the tables as TSV.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

fn report(a: Report) -> Result<Value> {
    let docs = score_all(&a.files)?;
    let report = breakdown_report(&docs).context("every document needs a structure label for the breakdown")?;
    if let Some(path) = &a.tsv {
        std::fs::write(path, report.to_tsv())?;
    }
    eprint!("{report}");
    Ok(serde_json::to_value(&report)?)
}

#[derive(Args, Debug)]
pub struct Stats {
    /// `split<TAB>label` annotation file.
    #[arg(long, required_unless_present = "data")]
    annotations: Option<PathBuf>,
    /// Labeled corpus files; each file's stem names its split.
    #[arg(long, num_args = 1..)]
    data: Vec<PathBuf>,
}

fn stats(a: Stats) -> Result<Value> {
    let mut records = Vec::new();
    if let Some(path) = &a.annotations {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        records.extend(parse_annotation_tsv(&text).with_context(|| format!("reading {}", path.display()))?);
    }
    for path in &a.data {
        let split = path.file_stem().map_or_else(|| path_str(path), |s| s.to_string_lossy().into_owned());
        for p in read_pairs(path, true)? {
            let label = p.label.with_context(|| format!("{}: pair {:?} has no label", path.display(), p.id))?;
            records.push((split.clone(), label));
        }
    }
    let stats = annotation_stats(records.iter().map(|(s, l)| (s.as_str(), *l)));
    eprint!("{stats}");
    Ok(serde_json::to_value(&stats)?)
}
