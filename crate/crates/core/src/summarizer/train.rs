use serde::{Deserialize, Serialize};

use crate::grad::Tape;
use crate::nn::ModelError;

use super::step::{decoder_step, sequence_loss, LossOptions};
use super::{Example, SummarizerParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub clip_norm: f64,
    pub coverage_lambda: f64,
    /// First update step that trains with coverage; `None` keeps it off.
    pub coverage_from_step: Option<usize>,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.15, clip_norm: 2.0, coverage_lambda: 1.0, coverage_from_step: None, batch_size: 16 }
    }
}

impl TrainConfig {
    pub fn loss_options(&self, step: usize) -> LossOptions {
        LossOptions {
            use_coverage: self.coverage_from_step.is_some_and(|s| step >= s),
            lambda: self.coverage_lambda,
            pgen_override: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    /// Mean over the batch of per-sequence losses.
    pub loss: f64,
    pub nll: f64,
    /// Mean coverage penalty (0 when coverage is off).
    pub coverage: f64,
    pub grad_norm: f64,
    pub clip_factor: f64,
    pub use_coverage: bool,
}

/// One update: mean loss over `batch`, backward, clipping, Adagrad.
pub fn train_batch(
    model: &mut SummarizerParams,
    batch: &[Example],
    cfg: &TrainConfig,
    step: usize,
) -> Result<BatchStats, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Invalid("empty batch".into()));
    }
    let opts = cfg.loss_options(step);
    let scale = 1.0 / batch.len() as f64;
    let (mut loss, mut nll, mut coverage) = (0.0, 0.0, 0.0);
    for ex in batch {
        let (grads, l, n, c) = {
            let mut tape = Tape::new(&model.store);
            let seq = sequence_loss(model, &mut tape, ex, &opts)?;
            let values =
                (tape.scalar(seq.total), tape.scalar(seq.nll), seq.coverage.map_or(0.0, |c| tape.scalar(c)));
            let grads = tape.backward(seq.total)?;
            (grads, values.0, values.1, values.2)
        };
        model.store.accumulate(&grads, scale);
        loss += l;
        nll += n;
        coverage += c;
    }
    let grad_norm = model.store.grad_norm();
    let clip_factor = model.store.clip_global_norm(cfg.clip_norm);
    model.store.adagrad_step(cfg.lr);
    Ok(BatchStats {
        loss: loss * scale,
        nll: nll * scale,
        coverage: coverage * scale,
        grad_norm,
        clip_factor,
        use_coverage: opts.use_coverage,
    })
}

/// Mean per-sequence loss without updating parameters.
pub fn evaluate_loss(model: &SummarizerParams, examples: &[Example], opts: &LossOptions) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::Invalid("no examples to evaluate".into()));
    }
    let mut total = 0.0;
    for ex in examples {
        let mut tape = Tape::new(&model.store);
        let seq = sequence_loss(model, &mut tape, ex, opts)?;
        total += tape.scalar(seq.total);
    }
    Ok(total / examples.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tokens: usize,
    pub correct: usize,
    /// Target positions holding a document OOV word.
    pub oov_tokens: usize,
    pub oov_correct: usize,
}

impl AccuracyReport {
    pub fn accuracy(&self) -> f64 {
        ratio(self.correct, self.tokens)
    }

    pub fn oov_accuracy(&self) -> f64 {
        ratio(self.oov_correct, self.oov_tokens)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Teacher-forced next-token accuracy: the argmax of the final distribution
/// against each target.
pub fn teacher_forced_accuracy(
    model: &SummarizerParams,
    examples: &[Example],
    opts: &LossOptions,
) -> Result<AccuracyReport, ModelError> {
    let mut report = AccuracyReport::default();
    for ex in examples {
        let mut tape = Tape::new(&model.store);
        let enc = model.encode(&mut tape, &ex.src_ids)?;
        let mut state = enc.init;
        let mut coverage = tape.constant(1, enc.len, 0.0);
        for (&input, &target) in ex.dec_inputs.iter().zip(&ex.targets) {
            let cov_in = opts.use_coverage.then_some(coverage);
            let out = decoder_step(model, &mut tape, &enc, ex, input, state, cov_in, opts.pgen_override)?;
            let hit = argmax(&tape.value(out.dist).data) == target;
            report.tokens += 1;
            report.correct += hit as usize;
            if ex.ext.is_oov(target) {
                report.oov_tokens += 1;
                report.oov_correct += hit as usize;
            }
            coverage = tape.add(coverage, out.attention.weights)?;
            state = out.state;
        }
    }
    Ok(report)
}
