//! Structure-aware summarization: pretrain one base summarizer on all pairs,
//! split the training pairs by the summary classifier, fine-tune one
//! sub-model per structure type and route each article to the sub-model its
//! article classifier picks.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{encode_checkpoint, hex, sha256, CheckpointError};
use crate::classifier::{classifier_input, Classification, ClassifierParams, InputKind};
use crate::corpus::{NewsPair, StructureType, Vocabulary};
use crate::nn::ModelError;
use crate::summarizer::{decode, train_batch, BatchStats, DecodeConfig, DecodedSummary, Example, SummarizerParams, TrainConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot pretrain on an empty corpus")]
    EmptyCorpus,
    #[error("no training pairs were labeled {0}; lower tau to label more pairs")]
    EmptySubset(StructureType),
    #[error("sub-models come from different base checkpoints ({parallel} vs {sequence})")]
    BaseMismatch { parallel: String, sequence: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// SHA-256 of a model's serialized checkpoint (without config hash).
pub fn model_digest(model: &SummarizerParams) -> String {
    hex(&sha256(&encode_checkpoint(&model.store, &[0; 32])))
}

/// Runs `steps` updates over `examples`, reshuffled every pass. Step numbers
/// continue from `first_step` so a coverage switch-on point is honored.
pub fn train_steps(
    model: &mut SummarizerParams,
    examples: &[Example],
    cfg: &TrainConfig,
    steps: usize,
    first_step: usize,
    seed: u64,
) -> Result<Vec<BatchStats>, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::Invalid("no training examples".into()));
    }
    let bs = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut stats = Vec::with_capacity(steps);
    let mut cursor = order.len();
    let mut batch = Vec::with_capacity(bs);
    for step in first_step..first_step + steps {
        batch.clear();
        while batch.len() < bs.min(examples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(examples[order[cursor]].clone());
            cursor += 1;
        }
        let s = train_batch(model, &batch, cfg, step)?;
        if (step + 1) % 100 == 0 {
            info!("step {}: loss {:.4} grad norm {:.3}", step + 1, s.loss, s.grad_norm);
        }
        stats.push(s);
    }
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedSummarizer {
    pub steps: usize,
    pub losses: Vec<f64>,
}

/// Trains `model` on every pair. Zero steps leaves it untouched.
pub fn pretrain(
    model: &mut SummarizerParams,
    vocab: &Vocabulary,
    pairs: &[NewsPair],
    cfg: &TrainConfig,
    steps: usize,
    seed: u64,
) -> Result<TrainedSummarizer, PipelineError> {
    if pairs.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let examples: Vec<Example> = pairs.iter().map(|p| Example::new(vocab, p)).collect();
    let stats = train_steps(model, &examples, cfg, steps, 0, seed)?;
    Ok(TrainedSummarizer { steps, losses: stats.iter().map(|s| s.loss).collect() })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AutoLabeled {
    pub parallel: Vec<NewsPair>,
    pub sequence: Vec<NewsPair>,
    /// Pairs whose top probability fell below the threshold.
    pub rest: Vec<NewsPair>,
}

impl AutoLabeled {
    pub fn subset(&self, label: StructureType) -> &[NewsPair] {
        match label {
            StructureType::Parallel => &self.parallel,
            StructureType::Sequence => &self.sequence,
        }
    }

    pub fn counts(&self) -> SubsetCounts {
        SubsetCounts { parallel: self.parallel.len(), sequence: self.sequence.len(), unlabeled: self.rest.len() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    pub parallel: usize,
    pub sequence: usize,
    pub unlabeled: usize,
}

/// Assigns each pair to its predicted type when that prediction's
/// probability is at least `tau`. Pair labels are overwritten with the
/// prediction in the labeled subsets.
pub fn auto_label_corpus(
    classifier: &ClassifierParams,
    cls_vocab: &Vocabulary,
    pairs: &[NewsPair],
    tau: f64,
) -> Result<AutoLabeled, ModelError> {
    let mut out = AutoLabeled::default();
    for pair in pairs {
        let ids = cls_vocab.ids(&classifier_input(pair, InputKind::Summary, usize::MAX));
        let c = classifier.classify(&ids)?;
        let confidence = c.p_parallel.max(c.p_sequence);
        if confidence >= tau {
            let mut p = pair.clone();
            p.label = Some(c.label.label());
            match c.label {
                StructureType::Parallel => out.parallel.push(p),
                StructureType::Sequence => out.sequence.push(p),
            }
        } else {
            out.rest.push(pair.clone());
        }
    }
    let n = out.counts();
    info!("auto-label at tau {tau}: {} parallel, {} sequence, {} unlabeled", n.parallel, n.sequence, n.unlabeled);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinetuneProvenance {
    pub label: StructureType,
    /// Digest of the base model the sub-model started from.
    pub base_digest: String,
    pub base_steps: usize,
    pub finetune_steps: usize,
    pub subset_size: usize,
}

#[derive(Clone, Debug)]
pub struct Finetuned {
    pub model: SummarizerParams,
    pub provenance: FinetuneProvenance,
    pub losses: Vec<f64>,
}

/// Continues training a copy of `base` on `subset` with fresh Adagrad
/// accumulators.
#[allow(clippy::too_many_arguments)]
pub fn finetune(
    base: &SummarizerParams,
    base_steps: usize,
    vocab: &Vocabulary,
    subset: &[NewsPair],
    label: StructureType,
    cfg: &TrainConfig,
    steps: usize,
    seed: u64,
) -> Result<Finetuned, PipelineError> {
    if subset.is_empty() {
        return Err(PipelineError::EmptySubset(label));
    }
    let mut model = base.clone();
    model.store.reset_optimizer();
    let examples: Vec<Example> = subset.iter().map(|p| Example::new(vocab, p)).collect();
    let stats = train_steps(&mut model, &examples, cfg, steps, base_steps, seed)?;
    Ok(Finetuned {
        model,
        provenance: FinetuneProvenance {
            label,
            base_digest: model_digest(base),
            base_steps,
            finetune_steps: steps,
            subset_size: subset.len(),
        },
        losses: stats.iter().map(|s| s.loss).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct StructureAwareModel {
    pub article_classifier: ClassifierParams,
    pub cls_vocab: Vocabulary,
    pub vocab: Vocabulary,
    pub parallel_model: SummarizerParams,
    pub sequence_model: SummarizerParams,
    pub parallel_provenance: FinetuneProvenance,
    pub sequence_provenance: FinetuneProvenance,
    /// Article tokens the classifier reads.
    pub max_src_len: usize,
}

impl StructureAwareModel {
    /// Fails unless both sub-models share a base.
    pub fn new(
        article_classifier: ClassifierParams,
        cls_vocab: Vocabulary,
        vocab: Vocabulary,
        parallel: Finetuned,
        sequence: Finetuned,
        max_src_len: usize,
    ) -> Result<Self, PipelineError> {
        if parallel.provenance.base_digest != sequence.provenance.base_digest {
            return Err(PipelineError::BaseMismatch {
                parallel: parallel.provenance.base_digest,
                sequence: sequence.provenance.base_digest,
            });
        }
        Ok(StructureAwareModel {
            article_classifier,
            cls_vocab,
            vocab,
            parallel_model: parallel.model,
            sequence_model: sequence.model,
            parallel_provenance: parallel.provenance,
            sequence_provenance: sequence.provenance,
            max_src_len,
        })
    }

    pub fn sub_model(&self, label: StructureType) -> &SummarizerParams {
        match label {
            StructureType::Parallel => &self.parallel_model,
            StructureType::Sequence => &self.sequence_model,
        }
    }

    pub fn classify_article<S: AsRef<str>>(&self, article: &[S]) -> Result<Classification, ModelError> {
        let ids: Vec<usize> = article.iter().take(self.max_src_len).map(|t| self.cls_vocab.id(t.as_ref())).collect();
        self.article_classifier.classify(&ids)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedSummary {
    pub summary: DecodedSummary,
    pub chosen_label: StructureType,
    pub classifier_scores: Classification,
}

pub fn structure_aware_summarize<S: AsRef<str>>(
    model: &StructureAwareModel,
    article: &[S],
    cfg: &DecodeConfig,
) -> Result<RoutedSummary, ModelError> {
    let scores = model.classify_article(article)?;
    let ex = Example::source_only(&model.vocab, article);
    let summary = decode(model.sub_model(scores.label), &model.vocab, &ex, cfg)?;
    Ok(RoutedSummary { summary, chosen_label: scores.label, classifier_scores: scores })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrained,
    ClassifiersTrained,
    AutoLabeled,
    Finetuned,
}

/// Pipeline state on disk; each stage fills in its fields so later stages
/// can resume from it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub stage: Option<Stage>,
    pub config_hash: Option<String>,
    pub vocab: Option<String>,
    pub base_checkpoint: Option<String>,
    pub base_digest: Option<String>,
    pub base_steps: Option<usize>,
    pub summary_classifier: Option<String>,
    pub article_classifier: Option<String>,
    pub classifier_vocab: Option<String>,
    pub tau: Option<f64>,
    pub subset_counts: Option<SubsetCounts>,
    pub parallel_subset: Option<String>,
    pub sequence_subset: Option<String>,
    pub parallel_checkpoint: Option<String>,
    pub sequence_checkpoint: Option<String>,
    pub parallel: Option<FinetuneProvenance>,
    pub sequence: Option<FinetuneProvenance>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Loads `path` if it exists, otherwise starts empty.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        if path.exists() { Self::load(path) } else { Ok(Manifest::default()) }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Moves the recorded stage forward, never backward.
    pub fn advance(&mut self, stage: Stage) {
        self.stage = Some(self.stage.map_or(stage, |s| s.max(stage)));
    }
}
