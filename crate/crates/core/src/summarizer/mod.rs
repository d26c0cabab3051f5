//! Attention encoder-decoder with a hybrid pointer-generator and coverage.
//!
//! The encoder is a bidirectional LSTM over the article; the decoder is a
//! unidirectional LSTM whose initial state is a tanh bridge of the two
//! encoder final states. Each decoder step attends over encoder states
//! (optionally conditioned on the coverage vector), mixes a vocabulary
//! distribution with a copy distribution through `p_gen`, and scores the
//! target with the negative log-likelihood plus the coverage penalty.

mod decode;
mod step;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{NewsPair, Vocabulary, START, STOP, UNK};
use crate::grad::{ParamId, ParamStore, Tensor};
use crate::nn::{BiLstm, Embedding, Linear, LstmCell, ModelError, INIT_BOUND};

pub use decode::{decode, DecodeConfig, DecodeMode, DecodedSummary};
pub use step::{
    attend, coverage_update, final_distribution, generation_prob, sequence_loss, step_loss, vocab_distribution,
    Attention, Encoded, LossOptions, SequenceLoss, StepLoss, StepTrace,
};
pub use train::{evaluate_loss, teacher_forced_accuracy, train_batch, AccuracyReport, BatchStats, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizerDims {
    pub vocab_size: usize,
    pub emb_dim: usize,
    pub hidden_dim: usize,
}

impl SummarizerDims {
    /// Width of the attention feature space (`W_h h_i`).
    pub fn attn_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

/// Every learnable tensor of the summarizer, owned in one [`ParamStore`].
#[derive(Clone, Debug)]
pub struct SummarizerParams {
    pub store: ParamStore,
    pub dims: SummarizerDims,
    /// Shared by encoder and decoder.
    pub embedding: Embedding,
    pub encoder: BiLstm,
    pub decoder: LstmCell,
    pub bridge_h: Linear,
    pub bridge_c: Linear,
    /// `v` (1×A)
    pub attn_v: ParamId,
    /// `W_h` (A×2H)
    pub attn_wh: ParamId,
    /// `W_s` (A×H)
    pub attn_ws: ParamId,
    /// `b_a` (A×1)
    pub attn_b: ParamId,
    /// `w_c` (A×1)
    pub attn_wc: ParamId,
    /// `V`, `b`
    pub proj_hidden: Linear,
    /// `V'`, `b'`
    pub proj_out: Linear,
    /// `w_{h*}` (1×2H)
    pub ptr_wh: ParamId,
    /// `w_s` (1×H)
    pub ptr_ws: ParamId,
    /// `w_x` (1×E)
    pub ptr_wx: ParamId,
    /// `b_g` (1×1)
    pub ptr_b: ParamId,
}

impl SummarizerParams {
    pub fn new(dims: SummarizerDims, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let SummarizerDims { vocab_size, emb_dim, hidden_dim } = dims;
        let attn = dims.attn_dim();
        let mut store = ParamStore::new();
        let s = &mut store;
        Embedding::new(s, "embedding", vocab_size, emb_dim, rng)?;
        BiLstm::new(s, "encoder", emb_dim, hidden_dim, rng)?;
        LstmCell::new(s, "decoder", emb_dim, hidden_dim, rng)?;
        Linear::new(s, "bridge.h", 2 * hidden_dim, hidden_dim, rng)?;
        Linear::new(s, "bridge.c", 2 * hidden_dim, hidden_dim, rng)?;
        s.add("attention.v", Tensor::uniform(&[1, attn], INIT_BOUND, rng))?;
        s.add("attention.w_h", Tensor::uniform(&[attn, 2 * hidden_dim], INIT_BOUND, rng))?;
        s.add("attention.w_s", Tensor::uniform(&[attn, hidden_dim], INIT_BOUND, rng))?;
        s.add("attention.b", Tensor::zeros(&[attn, 1]))?;
        s.add("attention.w_c", Tensor::uniform(&[attn, 1], INIT_BOUND, rng))?;
        Linear::new(s, "projection.hidden", 3 * hidden_dim, hidden_dim, rng)?;
        Linear::new(s, "projection.out", hidden_dim, vocab_size, rng)?;
        s.add("pointer.w_h", Tensor::uniform(&[1, 2 * hidden_dim], INIT_BOUND, rng))?;
        s.add("pointer.w_s", Tensor::uniform(&[1, hidden_dim], INIT_BOUND, rng))?;
        s.add("pointer.w_x", Tensor::uniform(&[1, emb_dim], INIT_BOUND, rng))?;
        s.add("pointer.b", Tensor::zeros(&[1, 1]))?;
        Self::from_store(store)
    }

    /// Binds a store (for example one read from a checkpoint) to the model
    /// layout, inferring dimensions from tensor shapes.
    pub fn from_store(store: ParamStore) -> Result<Self, ModelError> {
        let embedding = Embedding::from_store(&store, "embedding")?;
        let encoder = BiLstm::from_store(&store, "encoder")?;
        let decoder = LstmCell::from_store(&store, "decoder")?;
        let dims =
            SummarizerDims { vocab_size: embedding.vocab_size, emb_dim: embedding.dim, hidden_dim: decoder.hidden_dim };
        let h = dims.hidden_dim;
        let a = dims.attn_dim();
        let shaped = |name: &str, expect: &[usize]| -> Result<ParamId, ModelError> {
            let id = store.require(name)?;
            let got = store.get(id).value.dims();
            if got != expect {
                return Err(ModelError::ParamShape { name: name.to_string(), dims: got.to_vec() });
            }
            Ok(id)
        };
        let linear = |prefix: &str, in_dim: usize, out_dim: usize| -> Result<Linear, ModelError> {
            let l = Linear::from_store(&store, prefix)?;
            if l.in_dim != in_dim || l.out_dim != out_dim {
                return Err(ModelError::Invalid(format!("{prefix}: expected {out_dim}x{in_dim}")));
            }
            Ok(l)
        };
        if encoder.forward.input_dim != dims.emb_dim || encoder.hidden_dim() != h || decoder.input_dim != dims.emb_dim {
            return Err(ModelError::Invalid("encoder/decoder shapes disagree with embedding".into()));
        }
        let model = SummarizerParams {
            dims,
            bridge_h: linear("bridge.h", 2 * h, h)?,
            bridge_c: linear("bridge.c", 2 * h, h)?,
            attn_v: shaped("attention.v", &[1, a])?,
            attn_wh: shaped("attention.w_h", &[a, 2 * h])?,
            attn_ws: shaped("attention.w_s", &[a, h])?,
            attn_b: shaped("attention.b", &[a, 1])?,
            attn_wc: shaped("attention.w_c", &[a, 1])?,
            proj_hidden: linear("projection.hidden", 3 * h, h)?,
            proj_out: linear("projection.out", h, dims.vocab_size)?,
            ptr_wh: shaped("pointer.w_h", &[1, 2 * h])?,
            ptr_ws: shaped("pointer.w_s", &[1, h])?,
            ptr_wx: shaped("pointer.w_x", &[1, dims.emb_dim])?,
            ptr_b: shaped("pointer.b", &[1, 1])?,
            embedding,
            encoder,
            decoder,
            store,
        };
        Ok(model)
    }

    pub fn attention_params(&self) -> [ParamId; 5] {
        [self.attn_v, self.attn_wh, self.attn_ws, self.attn_b, self.attn_wc]
    }

    pub fn pointer_params(&self) -> [ParamId; 4] {
        [self.ptr_wh, self.ptr_ws, self.ptr_wx, self.ptr_b]
    }
}

/// Base vocabulary plus the out-of-vocabulary words of one source document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedVocab {
    base_size: usize,
    oovs: Vec<String>,
}

impl ExtendedVocab {
    pub fn build<S: AsRef<str>>(vocab: &Vocabulary, source: &[S]) -> Self {
        let mut oovs: Vec<String> = Vec::new();
        for tok in source {
            let tok = tok.as_ref();
            if vocab.get(tok).is_none() && !oovs.iter().any(|o| o == tok) {
                oovs.push(tok.to_string());
            }
        }
        ExtendedVocab { base_size: vocab.len(), oovs }
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn size(&self) -> usize {
        self.base_size + self.oovs.len()
    }

    pub fn oovs(&self) -> &[String] {
        &self.oovs
    }

    /// Extended id of `token`: its base id, its document-OOV id, or UNK.
    pub fn id(&self, vocab: &Vocabulary, token: &str) -> usize {
        vocab
            .get(token)
            .or_else(|| self.oovs.iter().position(|o| o == token).map(|k| self.base_size + k))
            .unwrap_or(UNK)
    }

    pub fn token<'a>(&'a self, vocab: &'a Vocabulary, id: usize) -> &'a str {
        if id < self.base_size {
            vocab.token(id).unwrap_or(crate::corpus::UNK_TOKEN)
        } else {
            self.oovs.get(id - self.base_size).map_or(crate::corpus::UNK_TOKEN, String::as_str)
        }
    }

    pub fn is_oov(&self, id: usize) -> bool {
        id >= self.base_size
    }

    /// Decoder input id for an extended id (document OOVs feed UNK).
    pub fn input_id(&self, id: usize) -> usize {
        if id >= self.base_size {
            UNK
        } else {
            id
        }
    }
}

/// A pair mapped to the ids the model consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    /// Encoder input ids (OOV mapped to UNK).
    pub src_ids: Vec<usize>,
    /// Source ids in the extended vocabulary.
    pub src_ext_ids: Vec<usize>,
    pub ext: ExtendedVocab,
    /// START followed by the target shifted right, in base ids.
    pub dec_inputs: Vec<usize>,
    /// Sentences joined by the boundary token, then STOP, in extended ids.
    pub targets: Vec<usize>,
}

impl Example {
    pub fn new(vocab: &Vocabulary, pair: &NewsPair) -> Self {
        let ext = ExtendedVocab::build(vocab, &pair.article);
        let target_tokens = pair.summary_with_boundaries();
        let mut targets: Vec<usize> = target_tokens.iter().map(|t| ext.id(vocab, t)).collect();
        targets.push(STOP);
        let mut dec_inputs = Vec::with_capacity(targets.len());
        dec_inputs.push(START);
        dec_inputs.extend(targets[..targets.len() - 1].iter().map(|&t| ext.input_id(t)));
        Example {
            src_ids: vocab.ids(&pair.article),
            src_ext_ids: pair.article.iter().map(|t| ext.id(vocab, t)).collect(),
            ext,
            dec_inputs,
            targets,
        }
    }

    /// Source-only example used for decoding.
    pub fn source_only<S: AsRef<str>>(vocab: &Vocabulary, article: &[S]) -> Self {
        let ext = ExtendedVocab::build(vocab, article);
        Example {
            src_ids: article.iter().map(|t| vocab.id(t.as_ref())).collect(),
            src_ext_ids: article.iter().map(|t| ext.id(vocab, t.as_ref())).collect(),
            ext,
            dec_inputs: vec![START],
            targets: Vec::new(),
        }
    }
}
