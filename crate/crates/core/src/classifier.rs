//! BiLSTM binary structure classifier over summaries or articles, with the
//! under-sampling search used to raise per-class precision.
//!
//! Each class has its own 2-logit head (`W_p, b_p` and `W_s, b_s`). A head's
//! decision logit is its first ("is this class") logit minus its second, and
//! the two decision logits share one 2-way softmax.

use std::str::FromStr;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{NewsPair, StructureType, Vocabulary};
use crate::eval::{classification_report, ClassificationReport};
use crate::grad::{Axis, Buf, NodeId, ParamStore, Tape};
use crate::nn::{BiLstm, Embedding, Linear, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierDims {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Clone, Debug)]
pub struct ClassifierParams {
    pub store: ParamStore,
    pub dims: ClassifierDims,
    pub embedding: Embedding,
    pub encoder: BiLstm,
    /// `W_p`, `b_p`
    pub head_parallel: Linear,
    /// `W_s`, `b_s` (unrelated to the summarizer's attention `W_s`)
    pub head_sequence: Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub p_parallel: f64,
    pub p_sequence: f64,
    pub label: StructureType,
}

impl ClassifierParams {
    pub fn new(dims: ClassifierDims, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        Embedding::new(&mut store, "embedding", dims.vocab_size, dims.emb_dim, &mut rng)?;
        BiLstm::new(&mut store, "encoder", dims.emb_dim, dims.hidden_dim, &mut rng)?;
        Linear::new(&mut store, "head.parallel", 2 * dims.hidden_dim, 2, &mut rng)?;
        Linear::new(&mut store, "head.sequence", 2 * dims.hidden_dim, 2, &mut rng)?;
        Self::from_store(store)
    }

    pub fn from_store(store: ParamStore) -> Result<Self, ModelError> {
        let embedding = Embedding::from_store(&store, "embedding")?;
        let encoder = BiLstm::from_store(&store, "encoder")?;
        let head_parallel = Linear::from_store(&store, "head.parallel")?;
        let head_sequence = Linear::from_store(&store, "head.sequence")?;
        let dims =
            ClassifierDims { vocab_size: embedding.vocab_size, emb_dim: embedding.dim, hidden_dim: encoder.hidden_dim() };
        let h2 = 2 * dims.hidden_dim;
        for head in [&head_parallel, &head_sequence] {
            if head.in_dim != h2 || head.out_dim != 2 {
                return Err(ModelError::Invalid(format!("classifier head must be 2x{h2}")));
            }
        }
        if encoder.forward.input_dim != dims.emb_dim {
            return Err(ModelError::Invalid("encoder input width differs from embedding width".into()));
        }
        Ok(ClassifierParams { store, dims, embedding, encoder, head_parallel, head_sequence })
    }

    /// `[fw_n; bw_1]` as a 2H×1 column.
    pub fn encode_text(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let xs = self.embedding.columns(tape, ids)?;
        let states = self.encoder.encode(tape, &xs)?;
        let (fw, bw) = states.finals();
        Ok(tape.concat(Axis::Rows, &[fw.h, bw.h])?)
    }

    /// Class probabilities `[p_parallel, p_sequence]` as a 1×2 row.
    pub fn probabilities(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId, ModelError> {
        let h = self.encode_text(tape, ids)?;
        let contrast = tape.input_buf(Buf { rows: 1, cols: 2, data: vec![1.0, -1.0] });
        let mut logits = Vec::with_capacity(2);
        for head in [&self.head_parallel, &self.head_sequence] {
            let out = head.forward(tape, h)?;
            logits.push(tape.matmul(contrast, out)?);
        }
        let row = tape.concat(Axis::Cols, &logits)?;
        Ok(tape.softmax(row)?)
    }

    pub fn classify(&self, ids: &[usize]) -> Result<Classification, ModelError> {
        let mut tape = Tape::new(&self.store);
        let p = self.probabilities(&mut tape, ids)?;
        let v = &tape.value(p).data;
        let (p_parallel, p_sequence) = (v[0], v[1]);
        let label = if p_parallel >= p_sequence { StructureType::Parallel } else { StructureType::Sequence };
        Ok(Classification { p_parallel, p_sequence, label })
    }

    /// Cross-entropy of the gold class.
    pub fn loss(&self, tape: &mut Tape, ids: &[usize], gold: StructureType) -> Result<NodeId, ModelError> {
        let p = self.probabilities(tape, ids)?;
        Ok(tape.neg_log_pick(p, gold.index())?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Summary,
    Article,
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summary" | "summaries" => Ok(InputKind::Summary),
            "article" | "articles" => Ok(InputKind::Article),
            _ => Err(format!("unknown input kind {s:?} (expected summaries or articles)")),
        }
    }
}

/// Tokens the classifier reads for `pair`.
pub fn classifier_input(pair: &NewsPair, kind: InputKind, max_src_len: usize) -> Vec<String> {
    match kind {
        InputKind::Summary => pair.summary_with_boundaries(),
        InputKind::Article => pair.article.iter().take(max_src_len).cloned().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub ids: Vec<usize>,
    pub label: StructureType,
}

/// Maps labeled pairs to classifier examples; unlabeled pairs are an error.
pub fn prepare_examples(
    vocab: &Vocabulary,
    pairs: &[NewsPair],
    kind: InputKind,
    max_src_len: usize,
) -> Result<Vec<LabeledExample>, ModelError> {
    pairs
        .iter()
        .map(|p| {
            let label = p.label.ok_or_else(|| ModelError::Invalid(format!("pair {:?} has no label", p.id)))?;
            Ok(LabeledExample { ids: vocab.ids(&classifier_input(p, kind, max_src_len)), label: label.binary() })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Keep the parameters of the epoch with the best held-out macro-F1.
    pub select_best: bool,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig { epochs: 20, lr: 0.01, batch_size: 2, seed: 0, select_best: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub heldout: Option<ClassificationReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose parameters were kept when selecting on held-out data.
    pub selected_epoch: Option<usize>,
}

fn class_counts(examples: &[LabeledExample]) -> [usize; 2] {
    let mut c = [0, 0];
    for e in examples {
        c[e.label.index()] += 1;
    }
    c
}

pub fn evaluate_classifier(
    model: &ClassifierParams,
    examples: &[LabeledExample],
) -> Result<ClassificationReport, ModelError> {
    let mut preds = Vec::with_capacity(examples.len());
    for e in examples {
        preds.push(model.classify(&e.ids)?.label);
    }
    let golds: Vec<StructureType> = examples.iter().map(|e| e.label).collect();
    classification_report(&preds, &golds).map_err(|e| ModelError::Invalid(e.to_string()))
}

/// Cross-entropy training with Adagrad; shuffles each epoch with the seed.
pub fn train_classifier(
    model: &mut ClassifierParams,
    train: &[LabeledExample],
    heldout: Option<&[LabeledExample]>,
    cfg: &ClassifierTrainConfig,
) -> Result<TrainingReport, ModelError> {
    if class_counts(train).contains(&0) {
        return Err(ModelError::Invalid("training data must contain both classes".into()));
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Invalid("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainingReport::default();
    let mut best: Option<(f64, ParamStore)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let grads = {
                    let mut tape = Tape::new(&model.store);
                    let loss = model.loss(&mut tape, &train[i].ids, train[i].label)?;
                    total += tape.scalar(loss);
                    tape.backward(loss)?
                };
                model.store.accumulate(&grads, scale);
            }
            model.store.adagrad_step(cfg.lr);
        }
        let loss = total / train.len() as f64;
        let heldout_report = heldout.map(|h| evaluate_classifier(model, h)).transpose()?;
        if let Some(r) = &heldout_report {
            debug!("classifier epoch {epoch}: loss {loss:.4} heldout macro-F1 {:.4}", r.macro_f1);
            if cfg.select_best && best.as_ref().is_none_or(|(f, _)| r.macro_f1 > *f) {
                best = Some((r.macro_f1, model.store.clone()));
                report.selected_epoch = Some(epoch);
            }
        } else {
            debug!("classifier epoch {epoch}: loss {loss:.4}");
        }
        report.epochs.push(EpochReport { epoch, loss, heldout: heldout_report });
    }
    if let Some((_, store)) = best {
        model.store = store;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UndersampleConfig {
    pub target_precision: f64,
    /// Fractions of the majority class kept, tried in order.
    pub ratios: Vec<f64>,
    pub train: ClassifierTrainConfig,
}

impl Default for UndersampleConfig {
    fn default() -> Self {
        UndersampleConfig {
            target_precision: 0.8,
            ratios: (1..=10).rev().map(|k| k as f64 / 10.0).collect(),
            train: ClassifierTrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UndersampleTrial {
    pub ratio: f64,
    pub majority: StructureType,
    pub kept_majority: usize,
    pub minority_count: usize,
    pub report: ClassificationReport,
}

#[derive(Clone, Debug)]
pub struct UndersampleOutcome {
    pub ratio: f64,
    /// False when no ratio reached the target and the best fallback was used.
    pub qualified: bool,
    pub trials: Vec<UndersampleTrial>,
    pub model: ClassifierParams,
}

/// Majority-class subsample keeping `ratio` of it (at least one example).
pub fn undersample(examples: &[LabeledExample], ratio: f64, seed: u64) -> (Vec<LabeledExample>, StructureType) {
    let counts = class_counts(examples);
    let majority = if counts[0] >= counts[1] { StructureType::Parallel } else { StructureType::Sequence };
    let mut maj: Vec<usize> = (0..examples.len()).filter(|&i| examples[i].label == majority).collect();
    maj.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let keep = ((maj.len() as f64 * ratio).round() as usize).clamp(1, maj.len().max(1));
    maj.truncate(keep);
    maj.sort_unstable();
    let kept = (0..examples.len())
        .filter(|&i| examples[i].label != majority || maj.binary_search(&i).is_ok())
        .map(|i| examples[i].clone())
        .collect();
    (kept, majority)
}

/// Tries each majority retention ratio in order, training a fresh copy of
/// `init` each time, and returns the first whose held-out precision exceeds
/// the target for both classes. Without a qualifying ratio, the one with the
/// highest minimum precision is returned with `qualified = false`.
pub fn undersample_tune(
    init: &ClassifierParams,
    train: &[LabeledExample],
    heldout: &[LabeledExample],
    cfg: &UndersampleConfig,
) -> Result<UndersampleOutcome, ModelError> {
    if class_counts(heldout).contains(&0) {
        return Err(ModelError::Invalid("held-out data must contain both classes".into()));
    }
    if cfg.ratios.is_empty() {
        return Err(ModelError::Invalid("no under-sampling ratios given".into()));
    }
    let mut trials = Vec::new();
    let mut best: Option<(f64, f64, ClassifierParams)> = None;
    for &ratio in &cfg.ratios {
        let (subset, majority) = undersample(train, ratio, cfg.train.seed);
        let mut model = init.clone();
        train_classifier(&mut model, &subset, None, &cfg.train)?;
        let report = evaluate_classifier(&model, heldout)?;
        let min_p = report.min_precision();
        info!("undersample ratio {ratio:.2}: precision {:.3}/{:.3}", report.classes[0].precision, report.classes[1].precision);
        let minority_count = subset.iter().filter(|e| e.label != majority).count();
        trials.push(UndersampleTrial {
            ratio,
            majority,
            kept_majority: subset.len() - minority_count,
            minority_count,
            report,
        });
        if min_p > cfg.target_precision {
            return Ok(UndersampleOutcome { ratio, qualified: true, trials, model });
        }
        if best.as_ref().is_none_or(|(p, _, _)| min_p > *p) {
            best = Some((min_p, ratio, model));
        }
    }
    let (_, ratio, model) = best.expect("at least one ratio");
    Ok(UndersampleOutcome { ratio, qualified: false, trials, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, SynthConfig, VocabMode};
    use crate::grad::{finite_diff_check, GradError};

    fn tiny(seed: u64) -> ClassifierParams {
        ClassifierParams::new(ClassifierDims { vocab_size: 10, emb_dim: 4, hidden_dim: 3 }, seed).unwrap()
    }

    #[test]
    fn zero_weights_tie_to_parallel() {
        let mut m = tiny(1);
        let ids: Vec<_> = m.store.ids().collect();
        for id in ids {
            m.store.get_mut(id).value.fill(0.0);
        }
        let mut tape = Tape::new(&m.store);
        let h = m.encode_text(&mut tape, &[5, 6]).unwrap();
        assert!(tape.value(h).data.iter().all(|&v| v == 0.0));
        let c = m.classify(&[5, 6, 7]).unwrap();
        assert_eq!((c.p_parallel, c.p_sequence), (0.5, 0.5));
        assert_eq!(c.label, StructureType::Parallel);
    }

    #[test]
    fn probabilities_are_a_distribution() {
        let m = tiny(2);
        for ids in [vec![5], vec![5, 6, 9, 2], vec![9; 12]] {
            let c = m.classify(&ids).unwrap();
            assert!(c.p_parallel > 0.0 && c.p_parallel < 1.0);
            assert!((c.p_parallel + c.p_sequence - 1.0).abs() < 1e-12);
        }
        assert!(matches!(m.classify(&[]), Err(ModelError::EmptySequence)));
    }

    #[test]
    fn single_token_runs_one_step_each_way() {
        let m = tiny(3);
        let mut tape = Tape::new(&m.store);
        let xs = m.embedding.columns(&mut tape, &[4]).unwrap();
        let states = m.encoder.encode(&mut tape, &xs).unwrap();
        assert_eq!((states.forward.len(), states.backward.len()), (1, 1));
        let h = m.encode_text(&mut tape, &[4]).unwrap();
        assert_eq!(tape.value(h).rows, 6);
    }

    #[test]
    fn heads_are_distinct_parameters() {
        let m = tiny(4);
        assert_ne!(m.head_parallel.weight, m.head_sequence.weight);
        assert_ne!(m.head_parallel.bias, m.head_sequence.bias);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut m = tiny(5);
        let layout = m.clone();
        let report = finite_diff_check(&mut m.store, 1e-3, |tape| -> Result<_, GradError> {
            layout.loss(tape, &[5, 6, 7, 8], StructureType::Sequence).map_err(|e| match e {
                ModelError::Grad(g) => g,
                other => panic!("{other}"),
            })
        })
        .unwrap();
        assert!(report.passes(1e-3), "{report:?}");
    }

    #[test]
    fn input_kinds() {
        let p = &synth_generate(&SynthConfig { seed: 1, n: 1, ..Default::default() })[0];
        let s = classifier_input(p, InputKind::Summary, 400);
        assert_eq!(s.iter().filter(|t| *t == "<sb>").count(), 2);
        assert_eq!(classifier_input(p, InputKind::Article, 5).len(), 5);
        assert_eq!("articles".parse::<InputKind>(), Ok(InputKind::Article));
        assert!("titles".parse::<InputKind>().is_err());
    }

    fn synth_examples(n: usize, seed: u64, mix: f64) -> (Vocabulary, Vec<LabeledExample>) {
        let pairs = synth_generate(&SynthConfig { seed, n, oov_rate: 0.1, structure_mix: mix });
        let v = Vocabulary::build(&pairs, VocabMode::MinCount(2)).unwrap();
        let ex = prepare_examples(&v, &pairs, InputKind::Summary, 400).unwrap();
        (v, ex)
    }

    #[test]
    fn single_class_rejected() {
        let (v, ex) = synth_examples(10, 1, 1.0);
        let mut m = ClassifierParams::new(ClassifierDims { vocab_size: v.len(), emb_dim: 4, hidden_dim: 3 }, 0).unwrap();
        assert!(train_classifier(&mut m, &ex, None, &ClassifierTrainConfig::default()).is_err());
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let (v, ex) = synth_examples(120, 3, 0.6);
        let mut m = ClassifierParams::new(ClassifierDims { vocab_size: v.len(), emb_dim: 8, hidden_dim: 8 }, 1).unwrap();
        let cfg = ClassifierTrainConfig { epochs: 5, seed: 2, ..Default::default() };
        let r = train_classifier(&mut m, &ex, None, &cfg).unwrap();
        let losses: Vec<f64> = r.epochs.iter().map(|e| e.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn undersample_keeps_minority() {
        let (_, ex) = synth_examples(100, 4, 0.8);
        let counts = class_counts(&ex);
        let (sub, maj) = undersample(&ex, 0.5, 0);
        assert_eq!(maj, StructureType::Parallel);
        let sc = class_counts(&sub);
        assert_eq!(sc[1], counts[1]);
        assert_eq!(sc[0], (counts[0] as f64 * 0.5).round() as usize);
        assert_eq!(undersample(&ex, 0.5, 0), undersample(&ex, 0.5, 0));
        assert_eq!(undersample(&ex, 1.0, 9).0, ex);
    }

    #[test]
    fn undersample_tune_rejects_one_class_heldout() {
        let (v, ex) = synth_examples(20, 5, 0.5);
        let m = ClassifierParams::new(ClassifierDims { vocab_size: v.len(), emb_dim: 4, hidden_dim: 3 }, 0).unwrap();
        let par: Vec<_> = ex.iter().filter(|e| e.label == StructureType::Parallel).cloned().collect();
        assert!(undersample_tune(&m, &ex, &par, &UndersampleConfig::default()).is_err());
    }
}
