use crate::grad::{Axis, NodeId, Tape};
use crate::nn::{EncoderStates, LstmState, ModelError};

use super::{Example, SummarizerParams};

/// Encoder output reused by every decoder step.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub states: EncoderStates,
    /// Encoder states as columns (2H×n).
    pub h: NodeId,
    /// `W_h h_i` for all i (A×n).
    pub features: NodeId,
    /// Decoder initial state from the bridge.
    pub init: LstmState,
    pub len: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Attention {
    /// Scores `e^t` (1×n).
    pub scores: NodeId,
    /// Weights `a^t` (1×n).
    pub weights: NodeId,
    /// Context vector `h*_t` (2H×1).
    pub context: NodeId,
}

#[derive(Clone, Copy, Debug)]
pub struct StepLoss {
    pub nll: NodeId,
    /// `Σ_i min(a_i, c_i)`, present when coverage is on.
    pub penalty: Option<NodeId>,
    pub total: NodeId,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub use_coverage: bool,
    pub lambda: f64,
    /// Replaces `p_gen` by a constant (0 = copy only, 1 = generate only).
    pub pgen_override: Option<f64>,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions { use_coverage: false, lambda: 1.0, pgen_override: None }
    }
}

/// Nodes of one teacher-forced step, kept for inspection.
#[derive(Clone, Copy, Debug)]
pub struct StepTrace {
    pub attention: Attention,
    /// Coverage before this step (`c^t`).
    pub coverage: NodeId,
    pub p_vocab: NodeId,
    pub p_gen: NodeId,
    pub dist: NodeId,
    pub loss: StepLoss,
}

#[derive(Clone, Debug)]
pub struct SequenceLoss {
    /// `nll + λ·coverage` (or `nll` alone without coverage).
    pub total: NodeId,
    /// Mean negative log-likelihood over steps.
    pub nll: NodeId,
    /// Mean coverage penalty over steps, when coverage is on.
    pub coverage: Option<NodeId>,
    pub steps: Vec<StepTrace>,
}

impl SummarizerParams {
    pub fn encode(&self, tape: &mut Tape, src_ids: &[usize]) -> Result<Encoded, ModelError> {
        if src_ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let xs = self.embedding.columns(tape, src_ids)?;
        let states = self.encoder.encode(tape, &xs)?;
        let h = states.matrix(tape)?;
        let wh = tape.param(self.attn_wh);
        let features = tape.matmul(wh, h)?;
        let (fw, bw) = states.finals();
        let hcat = tape.concat(Axis::Rows, &[fw.h, bw.h])?;
        let ccat = tape.concat(Axis::Rows, &[fw.c, bw.c])?;
        let h0 = self.bridge_h.forward(tape, hcat)?;
        let c0 = self.bridge_c.forward(tape, ccat)?;
        let init = LstmState { h: tape.tanh(h0)?, c: tape.tanh(c0)? };
        Ok(Encoded { states, h, features, init, len: src_ids.len() })
    }
}

/// Attention over encoder states for decoder state `s` (H×1). With
/// `coverage` (1×n) the scores also see `w_c c_i`.
pub fn attend(
    model: &SummarizerParams,
    tape: &mut Tape,
    enc: &Encoded,
    s: NodeId,
    coverage: Option<NodeId>,
) -> Result<Attention, ModelError> {
    let ws = tape.param(model.attn_ws);
    let ba = tape.param(model.attn_b);
    let wss = tape.matmul(ws, s)?;
    let dec = tape.add(wss, ba)?;
    let mut pre = tape.add_broadcast(enc.features, dec)?;
    if let Some(c) = coverage {
        let wc = tape.param(model.attn_wc);
        let cov = tape.matmul(wc, c)?;
        pre = tape.add(pre, cov)?;
    }
    let act = tape.tanh(pre)?;
    let v = tape.param(model.attn_v);
    let scores = tape.matmul(v, act)?;
    let weights = tape.softmax(scores)?;
    let col = tape.reshape(weights, enc.len, 1)?;
    let context = tape.matmul(enc.h, col)?;
    Ok(Attention { scores, weights, context })
}

/// `softmax(V'(V[s; h*] + b) + b')` as a 1×V row.
pub fn vocab_distribution(
    model: &SummarizerParams,
    tape: &mut Tape,
    s: NodeId,
    context: NodeId,
) -> Result<NodeId, ModelError> {
    let x = tape.concat(Axis::Rows, &[s, context])?;
    let hidden = model.proj_hidden.forward(tape, x)?;
    let logits = model.proj_out.forward(tape, hidden)?;
    let row = tape.reshape(logits, 1, model.dims.vocab_size)?;
    Ok(tape.softmax(row)?)
}

/// `σ(w_{h*}·h* + w_s·s + w_x·x + b_g)` as a 1×1 node.
pub fn generation_prob(
    model: &SummarizerParams,
    tape: &mut Tape,
    context: NodeId,
    s: NodeId,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let mut z = tape.param(model.ptr_b);
    for (w, v) in [(model.ptr_wh, context), (model.ptr_ws, s), (model.ptr_wx, x)] {
        let w = tape.param(w);
        let term = tape.matmul(w, v)?;
        z = tape.add(z, term)?;
    }
    Ok(tape.sigmoid(z)?)
}

/// Mixture of the padded vocabulary distribution and the copy distribution
/// over the extended vocabulary (1×`ext_size`).
pub fn final_distribution(
    tape: &mut Tape,
    p_gen: NodeId,
    p_vocab: NodeId,
    attention: NodeId,
    ext_size: usize,
    src_ext_ids: &[usize],
) -> Result<NodeId, ModelError> {
    let n = tape.value(attention).cols;
    if n != src_ext_ids.len() {
        return Err(ModelError::Invalid(format!(
            "attention has {n} positions but the source has {} ids",
            src_ext_ids.len()
        )));
    }
    let padded = tape.pad_cols(p_vocab, ext_size)?;
    let generated = tape.mul_scalar(padded, p_gen)?;
    let copy = tape.scatter_add(attention, src_ext_ids, ext_size)?;
    let one = tape.constant(1, 1, 1.0);
    let neg = tape.scale(p_gen, -1.0)?;
    let p_copy = tape.add(one, neg)?;
    let copied = tape.mul_scalar(copy, p_copy)?;
    Ok(tape.add(generated, copied)?)
}

pub fn coverage_update(tape: &mut Tape, coverage: NodeId, attention: NodeId) -> Result<NodeId, ModelError> {
    Ok(tape.add(coverage, attention)?)
}

pub fn step_loss(
    tape: &mut Tape,
    dist: NodeId,
    target: usize,
    attention: NodeId,
    coverage: NodeId,
    lambda: f64,
    use_coverage: bool,
) -> Result<StepLoss, ModelError> {
    let nll = tape.neg_log_pick(dist, target)?;
    if !use_coverage {
        return Ok(StepLoss { nll, penalty: None, total: nll });
    }
    let overlap = tape.elem_min(attention, coverage)?;
    let penalty = tape.reduce_sum(overlap)?;
    let weighted = tape.scale(penalty, lambda)?;
    let total = tape.add(nll, weighted)?;
    Ok(StepLoss { nll, penalty: Some(penalty), total })
}

/// One decoder step's outputs.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StepOut {
    pub state: LstmState,
    pub attention: Attention,
    pub p_vocab: NodeId,
    pub p_gen: NodeId,
    pub dist: NodeId,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn decoder_step(
    model: &SummarizerParams,
    tape: &mut Tape,
    enc: &Encoded,
    ex: &Example,
    input_id: usize,
    state: LstmState,
    coverage: Option<NodeId>,
    pgen_override: Option<f64>,
) -> Result<StepOut, ModelError> {
    let x = model.embedding.column(tape, ex.ext.input_id(input_id))?;
    let state = model.decoder.step(tape, x, state)?;
    let attention = attend(model, tape, enc, state.h, coverage)?;
    let p_vocab = vocab_distribution(model, tape, state.h, attention.context)?;
    let p_gen = match pgen_override {
        Some(p) => tape.constant(1, 1, p),
        None => generation_prob(model, tape, attention.context, state.h, x)?,
    };
    let dist = final_distribution(tape, p_gen, p_vocab, attention.weights, ex.ext.size(), &ex.src_ext_ids)?;
    Ok(StepOut { state, attention, p_vocab, p_gen, dist })
}

/// Teacher-forced loss of one example: per-step losses summed and divided
/// by the number of target steps.
pub fn sequence_loss(
    model: &SummarizerParams,
    tape: &mut Tape,
    ex: &Example,
    opts: &LossOptions,
) -> Result<SequenceLoss, ModelError> {
    if ex.targets.is_empty() || ex.targets.len() != ex.dec_inputs.len() {
        return Err(ModelError::Invalid("example has no aligned decoder targets".into()));
    }
    let ext_size = ex.ext.size();
    if let Some(&bad) = ex.targets.iter().find(|&&t| t >= ext_size) {
        return Err(ModelError::IdOutOfRange { position: 0, id: bad, vocab_size: ext_size });
    }
    let enc = model.encode(tape, &ex.src_ids)?;
    let mut state = enc.init;
    let mut coverage = tape.constant(1, enc.len, 0.0);
    let mut steps = Vec::with_capacity(ex.targets.len());
    for (&input, &target) in ex.dec_inputs.iter().zip(&ex.targets) {
        let cov_in = opts.use_coverage.then_some(coverage);
        let out = decoder_step(model, tape, &enc, ex, input, state, cov_in, opts.pgen_override)?;
        let loss =
            step_loss(tape, out.dist, target, out.attention.weights, coverage, opts.lambda, opts.use_coverage)?;
        steps.push(StepTrace {
            attention: out.attention,
            coverage,
            p_vocab: out.p_vocab,
            p_gen: out.p_gen,
            dist: out.dist,
            loss,
        });
        coverage = coverage_update(tape, coverage, out.attention.weights)?;
        state = out.state;
    }
    let nlls: Vec<NodeId> = steps.iter().map(|s| s.loss.nll).collect();
    let row = tape.concat(Axis::Cols, &nlls)?;
    let nll = tape.reduce_mean(row)?;
    if !opts.use_coverage {
        return Ok(SequenceLoss { total: nll, nll, coverage: None, steps });
    }
    let pens: Vec<NodeId> = steps.iter().filter_map(|s| s.loss.penalty).collect();
    let row = tape.concat(Axis::Cols, &pens)?;
    let cov = tape.reduce_mean(row)?;
    let weighted = tape.scale(cov, opts.lambda)?;
    let total = tape.add(nll, weighted)?;
    Ok(SequenceLoss { total, nll, coverage: Some(cov), steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, NewsPair, VocabMode, Vocabulary};
    use crate::grad::{finite_diff_check, Buf, GradError, ParamStore, Tensor};
    use crate::summarizer::SummarizerDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_all(store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.get_mut(id).value.fill(0.0);
        }
    }

    fn tiny(seed: u64) -> SummarizerParams {
        SummarizerParams::new(SummarizerDims { vocab_size: 12, emb_dim: 4, hidden_dim: 3 }, seed).unwrap()
    }

    fn row(tape: &mut Tape, v: &[f64]) -> NodeId {
        tape.input_buf(Buf { rows: 1, cols: v.len(), data: v.to_vec() })
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
        }
    }

    fn toy_vocab() -> Vocabulary {
        let pair = NewsPair {
            id: "t".into(),
            article: tokenize("a b c d e f g"),
            summary: [tokenize("a"), tokenize("b"), tokenize("c")],
            label: None,
            category: None,
        };
        Vocabulary::build(&[pair], VocabMode::MinCount(1)).unwrap()
    }

    fn toy_example(v: &Vocabulary) -> Example {
        let pair = NewsPair {
            id: "x".into(),
            article: tokenize("a q c d e"),
            summary: [tokenize("q a"), tokenize("c"), tokenize("e")],
            label: None,
            category: None,
        };
        Example::new(v, &pair)
    }

    #[test]
    fn single_position_attention_is_one() {
        let m = tiny(1);
        let mut tape = Tape::new(&m.store);
        let enc = m.encode(&mut tape, &[6]).unwrap();
        let s = tape.constant(3, 1, 0.3);
        let a = attend(&m, &mut tape, &enc, s, None).unwrap();
        assert_eq!(tape.value(a.weights).data, vec![1.0]);
        assert_close(&tape.value(a.context).data, &tape.value(enc.h).data, 0.0);
    }

    #[test]
    fn zero_params_give_uniform_attention_and_vocab() {
        let mut m = tiny(2);
        let mut tape0 = Tape::new(&m.store);
        let enc0 = m.encode(&mut tape0, &[5, 6, 7, 8]).unwrap();
        let h = tape0.value(enc0.h).clone();
        // attention and projection parameters only; the encoder keeps its weights
        for id in m.attention_params().into_iter().chain([m.proj_out.weight, m.proj_out.bias]) {
            m.store.get_mut(id).value.fill(0.0);
        }
        let mut tape = Tape::new(&m.store);
        let enc = m.encode(&mut tape, &[5, 6, 7, 8]).unwrap();
        assert_eq!(tape.value(enc.h).data, h.data);
        let s = tape.constant(3, 1, 0.7);
        let a = attend(&m, &mut tape, &enc, s, None).unwrap();
        assert_close(&tape.value(a.weights).data, &[0.25; 4], 1e-15);
        let mean: Vec<f64> = (0..h.rows).map(|r| (0..4).map(|c| h.data[r * 4 + c]).sum::<f64>() / 4.0).collect();
        assert_close(&tape.value(a.context).data, &mean, 1e-12);
        let pv = vocab_distribution(&m, &mut tape, s, a.context).unwrap();
        assert_close(&tape.value(pv).data, &[1.0 / 12.0; 12], 1e-15);
    }

    #[test]
    fn zero_coverage_leaves_scores_unchanged() {
        let m = tiny(3);
        let mut tape = Tape::new(&m.store);
        let enc = m.encode(&mut tape, &[5, 6, 7]).unwrap();
        let s = tape.constant(3, 1, -0.2);
        let plain = attend(&m, &mut tape, &enc, s, None).unwrap();
        let c = tape.constant(1, 3, 0.0);
        let cov = attend(&m, &mut tape, &enc, s, Some(c)).unwrap();
        assert_eq!(tape.value(plain.scores).data, tape.value(cov.scores).data);
        assert_eq!(tape.value(plain.weights).data, tape.value(cov.weights).data);
    }

    #[test]
    fn coverage_shifts_attention_when_nonzero() {
        let m = tiny(3);
        let mut tape = Tape::new(&m.store);
        let enc = m.encode(&mut tape, &[5, 6, 7]).unwrap();
        let s = tape.constant(3, 1, -0.2);
        let plain = attend(&m, &mut tape, &enc, s, None).unwrap();
        let c = row(&mut tape, &[2.0, 0.0, 0.0]);
        let cov = attend(&m, &mut tape, &enc, s, Some(c)).unwrap();
        assert_ne!(tape.value(plain.scores).data, tape.value(cov.scores).data);
    }

    #[test]
    fn coverage_length_mismatch_is_an_error() {
        let m = tiny(3);
        let mut tape = Tape::new(&m.store);
        let enc = m.encode(&mut tape, &[5, 6, 7]).unwrap();
        let s = tape.constant(3, 1, 0.0);
        let c = tape.constant(1, 2, 0.0);
        assert!(attend(&m, &mut tape, &enc, s, Some(c)).is_err());
    }

    #[test]
    fn zero_pointer_params_give_half() {
        let mut m = tiny(4);
        for id in m.pointer_params() {
            m.store.get_mut(id).value.fill(0.0);
        }
        let mut tape = Tape::new(&m.store);
        let ctx = tape.constant(6, 1, 0.9);
        let s = tape.constant(3, 1, -0.4);
        let x = tape.constant(4, 1, 0.1);
        let p = generation_prob(&m, &mut tape, ctx, s, x).unwrap();
        assert_eq!(tape.scalar(p), 0.5);
    }

    #[test]
    fn pgen_monotone_in_bias_and_in_open_interval() {
        let mut m = tiny(5);
        let mut last = 0.0;
        for b in [-30.0f32, -5.0, 0.0, 5.0, 30.0] {
            m.store.get_mut(m.ptr_b).value.data_mut()[0] = b;
            let mut tape = Tape::new(&m.store);
            let ctx = tape.constant(6, 1, 0.5);
            let s = tape.constant(3, 1, 0.5);
            let x = tape.constant(4, 1, 0.5);
            let p = tape_scalar(&mut tape, &m, ctx, s, x);
            assert!(p > last && p > 0.0 && p <= 1.0);
            last = p;
        }
        assert!(last > 0.999_999);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = tiny(6);
        for _ in 0..200 {
            let mut tape = Tape::new(&m.store);
            let ctx = tape.input(&Tensor::uniform(&[6, 1], 3.0, &mut rng));
            let s = tape.input(&Tensor::uniform(&[3, 1], 1.0, &mut rng));
            let x = tape.input(&Tensor::uniform(&[4, 1], 1.0, &mut rng));
            let p = tape_scalar(&mut tape, &m, ctx, s, x);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    fn tape_scalar(tape: &mut Tape, m: &SummarizerParams, ctx: NodeId, s: NodeId, x: NodeId) -> f64 {
        let p = generation_prob(m, tape, ctx, s, x).unwrap();
        tape.scalar(p)
    }

    #[test]
    fn final_distribution_hand_examples() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        // vocab {a=0, b=1}, source [a, a]
        let pv = row(&mut tape, &[0.5, 0.5]);
        let a = row(&mut tape, &[0.6, 0.4]);
        let p = tape.constant(1, 1, 0.5);
        let d = final_distribution(&mut tape, p, pv, a, 2, &[0, 0]).unwrap();
        assert_close(&tape.value(d).data, &[0.75, 0.25], 1e-12);

        // vocab {a=0, b=1}, source [a, x] with x the first document OOV
        let pv = row(&mut tape, &[0.7, 0.3]);
        let a = row(&mut tape, &[0.2, 0.8]);
        let p = tape.constant(1, 1, 0.4);
        let d = final_distribution(&mut tape, p, pv, a, 3, &[0, 2]).unwrap();
        assert_close(&tape.value(d).data, &[0.40, 0.12, 0.48], 1e-12);
    }

    #[test]
    fn generate_only_pads_vocab_distribution() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let pv = row(&mut tape, &[0.2, 0.3, 0.5]);
        let a = row(&mut tape, &[0.9, 0.1]);
        let p = tape.constant(1, 1, 1.0);
        let d = final_distribution(&mut tape, p, pv, a, 5, &[4, 1]).unwrap();
        assert_eq!(tape.value(d).data, vec![0.2, 0.3, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn final_distribution_rejects_length_mismatch() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let pv = row(&mut tape, &[0.5, 0.5]);
        let a = row(&mut tape, &[0.6, 0.4]);
        let p = tape.constant(1, 1, 0.5);
        assert!(final_distribution(&mut tape, p, pv, a, 3, &[0, 1, 2]).is_err());
    }

    #[test]
    fn coverage_update_examples() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let c0 = tape.constant(1, 2, 0.0);
        let a0 = row(&mut tape, &[0.3, 0.7]);
        let a1 = row(&mut tape, &[0.5, 0.5]);
        let c1 = coverage_update(&mut tape, c0, a0).unwrap();
        assert_eq!(tape.value(c1).data, tape.value(a0).data);
        let c2 = coverage_update(&mut tape, c1, a1).unwrap();
        assert_close(&tape.value(c2).data, &[0.8, 1.2], 1e-15);
        let short = tape.constant(1, 3, 0.0);
        assert!(coverage_update(&mut tape, short, a0).is_err());
    }

    #[test]
    fn step_loss_examples() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let sure = row(&mut tape, &[0.0, 1.0, 0.0]);
        let a = row(&mut tape, &[0.25, 0.75]);
        let zero = tape.constant(1, 2, 0.0);
        let l = step_loss(&mut tape, sure, 1, a, zero, 1.0, false).unwrap();
        assert!(tape.scalar(l.total).abs() < 1e-11);

        let d = row(&mut tape, &[0.1, 0.6, 0.3]);
        let plain = step_loss(&mut tape, d, 2, a, zero, 1.0, false).unwrap();
        let cov = step_loss(&mut tape, d, 2, a, zero, 1.0, true).unwrap();
        assert_eq!(tape.scalar(plain.total), tape.scalar(cov.total));

        let same = step_loss(&mut tape, d, 2, a, a, 2.5, true).unwrap();
        assert_close(&[tape.scalar(same.penalty.unwrap())], &[1.0], 1e-15);
        assert_close(&[tape.scalar(same.total) - tape.scalar(same.nll)], &[2.5], 1e-12);
    }

    #[test]
    fn distributions_normalized_for_random_models() {
        let v = toy_vocab();
        let ex = toy_example(&v);
        for seed in 0..20 {
            let m = SummarizerParams::new(SummarizerDims { vocab_size: v.len(), emb_dim: 4, hidden_dim: 3 }, seed)
                .unwrap();
            let mut tape = Tape::new(&m.store);
            let opts = LossOptions { use_coverage: seed % 2 == 0, ..Default::default() };
            let seq = sequence_loss(&m, &mut tape, &ex, &opts).unwrap();
            for (t, st) in seq.steps.iter().enumerate() {
                for node in [st.attention.weights, st.p_vocab, st.dist] {
                    let sum: f64 = tape.value(node).data.iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-9, "step {t}: {sum}");
                }
                assert_eq!(tape.value(st.dist).cols, ex.ext.size());
                let cov: f64 = tape.value(st.coverage).data.iter().sum();
                assert!((cov - t as f64).abs() <= 1e-12 * (t as f64 + 1.0));
                if let Some(p) = st.loss.penalty {
                    let p = tape.scalar(p);
                    assert!((0.0..=1.0 + 1e-12).contains(&p));
                }
            }
        }
    }

    #[test]
    fn coverage_loss_decomposes() {
        let v = toy_vocab();
        let ex = toy_example(&v);
        let m = SummarizerParams::new(SummarizerDims { vocab_size: v.len(), emb_dim: 4, hidden_dim: 3 }, 9).unwrap();
        let mut tape = Tape::new(&m.store);
        let opts = LossOptions { use_coverage: true, lambda: 0.7, pgen_override: None };
        let seq = sequence_loss(&m, &mut tape, &ex, &opts).unwrap();
        let nll = tape.scalar(seq.nll);
        let cov = tape.scalar(seq.coverage.unwrap());
        assert_eq!(tape.scalar(seq.total), nll + cov * 0.7);
        let steps: f64 = seq.steps.iter().map(|s| tape.scalar(s.loss.nll)).sum::<f64>() / seq.steps.len() as f64;
        assert!((steps - nll).abs() < 1e-12);
    }

    #[test]
    fn sequence_gradient_matches_finite_differences() {
        let v = toy_vocab();
        assert_eq!(v.len(), 12);
        let ex = toy_example(&v);
        assert_eq!(ex.src_ids.len(), 5);
        let mut m =
            SummarizerParams::new(SummarizerDims { vocab_size: 12, emb_dim: 4, hidden_dim: 8 }, 11).unwrap();
        // larger weights make the check sensitive to every path
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ids: Vec<_> = m.store.ids().collect();
        for id in ids {
            m.store.get_mut(id).value.data_mut().iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
        }
        let layout = m.clone();
        let opts = LossOptions { use_coverage: true, lambda: 1.0, pgen_override: None };
        let report = finite_diff_check(&mut m.store, 1e-3, |tape| -> Result<_, GradError> {
            let seq = sequence_loss(&layout, tape, &ex, &opts).map_err(|e| match e {
                ModelError::Grad(g) => g,
                other => panic!("{other}"),
            })?;
            Ok(seq.total)
        })
        .unwrap();
        assert!(report.passes(1e-3), "{report:?}");
    }

    #[test]
    fn zero_model_loss_is_finite() {
        let v = toy_vocab();
        let ex = toy_example(&v);
        let mut m = SummarizerParams::new(SummarizerDims { vocab_size: 12, emb_dim: 4, hidden_dim: 3 }, 1).unwrap();
        zero_all(&mut m.store);
        let mut tape = Tape::new(&m.store);
        let seq = sequence_loss(&m, &mut tape, &ex, &LossOptions::default()).unwrap();
        assert!(tape.scalar(seq.total).is_finite());
    }
}
