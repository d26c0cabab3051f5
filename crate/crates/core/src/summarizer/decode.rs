use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, SB, START, STOP, SUMMARY_SENTENCES};
use crate::grad::{NodeId, Tape};
use crate::nn::{LstmState, ModelError};

use super::step::{decoder_step, Encoded};
use super::train::argmax;
use super::{Example, SummarizerParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub max_decode_len: usize,
    pub use_coverage: bool,
    pub pgen_override: Option<f64>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { mode: DecodeMode::Greedy, max_decode_len: 120, use_coverage: false, pgen_override: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedSummary {
    pub sentences: [Vec<String>; SUMMARY_SENTENCES],
    /// Emitted extended-vocabulary ids, terminator excluded.
    pub ids: Vec<usize>,
    pub log_prob: f64,
    /// Fewer than three sentences were produced; the rest are empty.
    pub padded: bool,
    /// Stopped by `max_decode_len` rather than a terminator.
    pub truncated: bool,
}

impl DecodedSummary {
    pub fn is_degenerate(&self) -> bool {
        self.padded || self.truncated || self.sentences.iter().any(Vec::is_empty)
    }
}

/// Decoder state carried between steps.
#[derive(Clone, Copy, Debug)]
struct DecoderStepState {
    lstm: LstmState,
    coverage: NodeId,
    t: usize,
}

#[derive(Clone, Debug)]
struct Hypothesis {
    ids: Vec<usize>,
    log_prob: f64,
    state: DecoderStepState,
    sentences: usize,
}

impl Hypothesis {
    fn last(&self) -> usize {
        self.ids.last().copied().unwrap_or(START)
    }

    fn score(&self) -> f64 {
        self.log_prob / self.ids.len().max(1) as f64
    }
}

struct Stepper<'a, 'm> {
    model: &'m SummarizerParams,
    ex: &'a Example,
    enc: Encoded,
    cfg: &'a DecodeConfig,
}

impl Stepper<'_, '_> {
    fn advance(
        &self,
        tape: &mut Tape,
        state: DecoderStepState,
        input: usize,
    ) -> Result<(DecoderStepState, Vec<f64>), ModelError> {
        let cov_in = self.cfg.use_coverage.then_some(state.coverage);
        let out = decoder_step(self.model, tape, &self.enc, self.ex, input, state.lstm, cov_in, self.cfg.pgen_override)?;
        let coverage = tape.add(state.coverage, out.attention.weights)?;
        let next = DecoderStepState { lstm: out.state, coverage, t: state.t + 1 };
        Ok((next, tape.value(out.dist).data.clone()))
    }
}

fn ends(token: usize, sentences_before: usize) -> bool {
    token == STOP || (token == SB && sentences_before + 1 == SUMMARY_SENTENCES)
}

/// Decodes a summary for `ex` (built with [`Example::source_only`] or from a
/// full pair; only the source side is used).
pub fn decode(
    model: &SummarizerParams,
    vocab: &Vocabulary,
    ex: &Example,
    cfg: &DecodeConfig,
) -> Result<DecodedSummary, ModelError> {
    if let DecodeMode::Beam(0) = cfg.mode {
        return Err(ModelError::Invalid("beam size must be at least 1".into()));
    }
    let mut tape = Tape::new(&model.store);
    let enc = model.encode(&mut tape, &ex.src_ids)?;
    let coverage = tape.constant(1, enc.len, 0.0);
    let root = DecoderStepState { lstm: enc.init, coverage, t: 0 };
    let stepper = Stepper { model, ex, enc, cfg };
    let (ids, log_prob, truncated) = match cfg.mode {
        DecodeMode::Greedy => greedy(&stepper, &mut tape, root)?,
        DecodeMode::Beam(k) => beam(&stepper, &mut tape, root, k)?,
    };
    Ok(assemble(vocab, ex, ids, log_prob, truncated))
}

fn greedy(s: &Stepper, tape: &mut Tape, root: DecoderStepState) -> Result<(Vec<usize>, f64, bool), ModelError> {
    let mut ids = Vec::new();
    let mut log_prob = 0.0;
    let mut state = root;
    let mut sentences = 0;
    let mut prev = START;
    while ids.len() < s.cfg.max_decode_len {
        let (next, dist) = s.advance(tape, state, prev)?;
        let tok = argmax(&dist);
        log_prob += dist[tok].ln();
        ids.push(tok);
        if ends(tok, sentences) {
            return Ok((ids, log_prob, false));
        }
        sentences += (tok == SB) as usize;
        state = next;
        prev = tok;
    }
    Ok((ids, log_prob, true))
}

/// Token indices with nonzero probability, best first, lowest id on ties.
fn top_k(dist: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).filter(|&i| dist[i] > 0.0).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn beam(
    s: &Stepper,
    tape: &mut Tape,
    root: DecoderStepState,
    width: usize,
) -> Result<(Vec<usize>, f64, bool), ModelError> {
    let mut live = vec![Hypothesis { ids: Vec::new(), log_prob: 0.0, state: root, sentences: 0 }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..s.cfg.max_decode_len {
        let mut candidates = Vec::new();
        for h in &live {
            let (next, dist) = s.advance(tape, h.state, h.last())?;
            for tok in top_k(&dist, 2 * width) {
                let mut ids = h.ids.clone();
                ids.push(tok);
                candidates.push(Hypothesis {
                    ids,
                    log_prob: h.log_prob + dist[tok].ln(),
                    state: next,
                    sentences: h.sentences + (tok == SB) as usize,
                });
            }
        }
        // stable: equal scores keep parent order, then probability order
        candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        let mut next_live = Vec::with_capacity(width);
        for c in candidates {
            let tok = *c.ids.last().expect("candidates extend a hypothesis");
            if ends(tok, c.sentences - (tok == SB) as usize) {
                finished.push(c);
            } else {
                next_live.push(c);
            }
            if next_live.len() == width || finished.len() >= width {
                break;
            }
        }
        live = next_live;
        if finished.len() >= width || live.is_empty() {
            break;
        }
    }
    let (pool, truncated) = if finished.is_empty() { (live, true) } else { (finished, false) };
    let mut best = &pool[0];
    for h in &pool[1..] {
        if h.score() > best.score() {
            best = h;
        }
    }
    Ok((best.ids.clone(), best.log_prob, truncated))
}

fn assemble(vocab: &Vocabulary, ex: &Example, mut ids: Vec<usize>, log_prob: f64, truncated: bool) -> DecodedSummary {
    if !truncated && matches!(ids.last(), Some(&STOP) | Some(&SB)) {
        ids.pop();
    }
    let mut sentences: [Vec<String>; SUMMARY_SENTENCES] = Default::default();
    let mut k = 0;
    for &id in &ids {
        if id == SB {
            k += 1;
            if k == SUMMARY_SENTENCES {
                break;
            }
        } else if id != STOP {
            sentences[k].push(ex.ext.token(vocab, id).to_string());
        }
    }
    DecodedSummary { sentences, ids, log_prob, padded: k + 1 < SUMMARY_SENTENCES, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, SynthConfig, VocabMode};
    use crate::summarizer::SummarizerDims;

    fn setup() -> (Vocabulary, Vec<Example>, SummarizerParams) {
        let pairs = synth_generate(&SynthConfig { seed: 2, n: 30, oov_rate: 0.3, structure_mix: 0.8 });
        let v = Vocabulary::build(&pairs, VocabMode::MinCount(2)).unwrap();
        let ex: Vec<Example> = pairs.iter().map(|p| Example::source_only(&v, &p.article)).collect();
        let m = SummarizerParams::new(SummarizerDims { vocab_size: v.len(), emb_dim: 6, hidden_dim: 5 }, 3).unwrap();
        (v, ex, m)
    }

    #[test]
    fn beam_one_equals_greedy() {
        let (v, ex, m) = setup();
        for e in ex.iter().take(6) {
            for use_coverage in [false, true] {
                let g = DecodeConfig { max_decode_len: 25, use_coverage, ..Default::default() };
                let b = DecodeConfig { mode: DecodeMode::Beam(1), ..g };
                let dg = decode(&m, &v, e, &g).unwrap();
                let db = decode(&m, &v, e, &b).unwrap();
                assert_eq!(dg, db);
            }
        }
    }

    #[test]
    fn copy_only_emits_source_tokens() {
        let (v, ex, m) = setup();
        let cfg = DecodeConfig { max_decode_len: 20, pgen_override: Some(0.0), ..Default::default() };
        for e in ex.iter().take(5) {
            for mode in [DecodeMode::Greedy, DecodeMode::Beam(3)] {
                let d = decode(&m, &v, e, &DecodeConfig { mode, ..cfg }).unwrap();
                assert!(!d.ids.is_empty());
                assert!(d.ids.iter().all(|id| e.src_ext_ids.contains(id)));
                // no terminator can be copied, so the output runs to the limit
                assert!(d.truncated && d.padded);
            }
        }
    }

    #[test]
    fn output_has_three_sentences_and_is_deterministic() {
        let (v, ex, m) = setup();
        let cfg = DecodeConfig { mode: DecodeMode::Beam(3), max_decode_len: 15, ..Default::default() };
        let a = decode(&m, &v, &ex[0], &cfg).unwrap();
        assert_eq!(a, decode(&m, &v, &ex[0], &cfg).unwrap());
        assert_eq!(a.sentences.len(), 3);
        assert!(a.ids.len() <= 15);
    }

    #[test]
    fn zero_beam_rejected() {
        let (v, ex, m) = setup();
        let cfg = DecodeConfig { mode: DecodeMode::Beam(0), ..Default::default() };
        assert!(decode(&m, &v, &ex[0], &cfg).is_err());
    }

    #[test]
    fn assemble_partitions_and_resolves_oovs() {
        let (v, _, _) = setup();
        let article: Vec<String> = ["zorblax", "the"].iter().map(|s| s.to_string()).collect();
        let ex = Example::source_only(&v, &article);
        let oov = ex.ext.id(&v, "zorblax");
        assert!(ex.ext.is_oov(oov));
        let the = v.id("the");
        let d = assemble(&v, &ex, vec![oov, the, SB, the, SB, oov, SB], -1.0, false);
        assert_eq!(d.sentences[0], vec!["zorblax", "the"]);
        assert_eq!(d.sentences[2], vec!["zorblax"]);
        assert!(!d.padded && !d.is_degenerate());
        let d = assemble(&v, &ex, vec![the, STOP], -1.0, false);
        assert!(d.padded && d.sentences[1].is_empty());
    }

    #[test]
    fn top_k_orders_by_probability_then_id() {
        assert_eq!(top_k(&[0.1, 0.3, 0.0, 0.3, 0.3], 2), vec![1, 3]);
        assert_eq!(top_k(&[0.0, 1.0], 5), vec![1]);
    }
}
