//! Embedding, affine, LSTM and bidirectional LSTM layers.
//!
//! Vectors are columns (`d×1`); weight matrices are `out×in` so a layer
//! computes `W·x + b`.

use rand::Rng;
use thiserror::Error;

use crate::grad::{Axis, GradError, NodeId, ParamId, ParamStore, Tape, Tensor};

/// Bound of the uniform initializer used for every weight matrix.
pub const INIT_BOUND: f32 = 0.1;
/// Initial value of the LSTM forget-gate bias.
pub const FORGET_BIAS: f32 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("token id {id} at position {position} out of range for vocabulary of {vocab_size}")]
    IdOutOfRange { position: usize, id: usize, vocab_size: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("parameter {name} has unexpected dims {dims:?}")]
    ParamShape { name: String, dims: Vec<usize> },
    #[error("{0}")]
    Invalid(String),
}

fn matrix_dims(store: &ParamStore, id: ParamId) -> Result<(usize, usize), ModelError> {
    let p = store.get(id);
    match p.value.dims() {
        [r, c] => Ok((*r, *c)),
        d => Err(ModelError::ParamShape { name: p.name.clone(), dims: d.to_vec() }),
    }
}

#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab_size: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let table = store.add(name, Tensor::uniform(&[vocab_size, dim], INIT_BOUND, rng))?;
        Ok(Embedding { table, vocab_size, dim })
    }

    pub fn from_store(store: &ParamStore, name: &str) -> Result<Self, ModelError> {
        let table = store.require(name)?;
        let (vocab_size, dim) = matrix_dims(store, table)?;
        Ok(Embedding { table, vocab_size, dim })
    }

    fn check(&self, ids: &[usize]) -> Result<(), ModelError> {
        match ids.iter().position(|&id| id >= self.vocab_size) {
            Some(position) => Err(ModelError::IdOutOfRange { position, id: ids[position], vocab_size: self.vocab_size }),
            None => Ok(()),
        }
    }

    /// Rows of the table for `ids` (`len×dim`).
    pub fn embed(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId, ModelError> {
        self.check(ids)?;
        let t = tape.param(self.table);
        Ok(tape.gather(t, ids)?)
    }

    /// One embedding as a `dim×1` column.
    pub fn column(&self, tape: &mut Tape, id: usize) -> Result<NodeId, ModelError> {
        let row = self.embed(tape, &[id])?;
        Ok(tape.reshape(row, self.dim, 1)?)
    }

    /// Each id as its own column node.
    pub fn columns(&self, tape: &mut Tape, ids: &[usize]) -> Result<Vec<NodeId>, ModelError> {
        self.check(ids)?;
        ids.iter().map(|&id| self.column(tape, id)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let weight = store.add(format!("{prefix}.w"), Tensor::uniform(&[out_dim, in_dim], INIT_BOUND, rng))?;
        let bias = store.add(format!("{prefix}.b"), Tensor::zeros(&[out_dim, 1]))?;
        Ok(Linear { weight, bias, in_dim, out_dim })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self, ModelError> {
        let weight = store.require(&format!("{prefix}.w"))?;
        let bias = store.require(&format!("{prefix}.b"))?;
        let (out_dim, in_dim) = matrix_dims(store, weight)?;
        Ok(Linear { weight, bias, in_dim, out_dim })
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, ModelError> {
        linear(tape, self.weight, self.bias, x)
    }
}

/// `W·x + b`.
pub fn linear(tape: &mut Tape, weight: ParamId, bias: ParamId, x: NodeId) -> Result<NodeId, ModelError> {
    let w = tape.param(weight);
    let b = tape.param(bias);
    let wx = tape.matmul(w, x)?;
    Ok(tape.add_broadcast(wx, b)?)
}

/// Single-layer LSTM cell with separate input, forget, output and candidate
/// gates, each `hidden×(input+hidden)`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub input_gate: Linear,
    pub forget_gate: Linear,
    pub output_gate: Linear,
    pub candidate: Linear,
}

/// Hidden and cell state column nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: NodeId,
    pub c: NodeId,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let cat = input_dim + hidden_dim;
        let input_gate = Linear::new(store, &format!("{prefix}.input"), cat, hidden_dim, rng)?;
        let forget_gate = Linear::new(store, &format!("{prefix}.forget"), cat, hidden_dim, rng)?;
        store.get_mut(forget_gate.bias).value.fill(FORGET_BIAS);
        let output_gate = Linear::new(store, &format!("{prefix}.output"), cat, hidden_dim, rng)?;
        let candidate = Linear::new(store, &format!("{prefix}.candidate"), cat, hidden_dim, rng)?;
        Ok(LstmCell { input_dim, hidden_dim, input_gate, forget_gate, output_gate, candidate })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self, ModelError> {
        let input_gate = Linear::from_store(store, &format!("{prefix}.input"))?;
        let forget_gate = Linear::from_store(store, &format!("{prefix}.forget"))?;
        let output_gate = Linear::from_store(store, &format!("{prefix}.output"))?;
        let candidate = Linear::from_store(store, &format!("{prefix}.candidate"))?;
        let hidden_dim = input_gate.out_dim;
        if input_gate.in_dim <= hidden_dim {
            return Err(ModelError::Invalid(format!("{prefix}: gate input width {} too small", input_gate.in_dim)));
        }
        let input_dim = input_gate.in_dim - hidden_dim;
        for g in [&forget_gate, &output_gate, &candidate] {
            if g.in_dim != input_gate.in_dim || g.out_dim != hidden_dim {
                return Err(ModelError::Invalid(format!("{prefix}: inconsistent gate shapes")));
            }
        }
        Ok(LstmCell { input_dim, hidden_dim, input_gate, forget_gate, output_gate, candidate })
    }

    pub fn params(&self) -> [ParamId; 8] {
        [
            self.input_gate.weight,
            self.input_gate.bias,
            self.forget_gate.weight,
            self.forget_gate.bias,
            self.output_gate.weight,
            self.output_gate.bias,
            self.candidate.weight,
            self.candidate.bias,
        ]
    }

    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        LstmState { h: tape.constant(self.hidden_dim, 1, 0.0), c: tape.constant(self.hidden_dim, 1, 0.0) }
    }

    pub fn step(&self, tape: &mut Tape, x: NodeId, prev: LstmState) -> Result<LstmState, ModelError> {
        let (xr, xc) = tape.value(x).dims();
        if xr != self.input_dim || xc != 1 {
            return Err(GradError::DimMismatch { kernel: "lstm-step", dims: vec![(xr, xc), (self.input_dim, 1)] }.into());
        }
        let xh = tape.concat(Axis::Rows, &[x, prev.h])?;
        let i = self.input_gate.forward(tape, xh)?;
        let i = tape.sigmoid(i)?;
        let f = self.forget_gate.forward(tape, xh)?;
        let f = tape.sigmoid(f)?;
        let o = self.output_gate.forward(tape, xh)?;
        let o = tape.sigmoid(o)?;
        let g = self.candidate.forward(tape, xh)?;
        let g = tape.tanh(g)?;
        let keep = tape.mul(f, prev.c)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        Ok(LstmState { h, c })
    }

    /// Runs the cell over `xs` from a zero state, returning every state.
    pub fn run(&self, tape: &mut Tape, xs: &[NodeId]) -> Result<Vec<LstmState>, ModelError> {
        let mut state = self.zero_state(tape);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.step(tape, x, state)?;
            out.push(state);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Output of [`BiLstm::encode`].
#[derive(Clone, Debug)]
pub struct EncoderStates {
    /// `h_i = [forward_i; backward_i]`, each `2·hidden×1`.
    pub states: Vec<NodeId>,
    /// Forward states indexed by source position.
    pub forward: Vec<LstmState>,
    /// Backward states indexed by source position (position 0 is the last
    /// one the backward cell computed).
    pub backward: Vec<LstmState>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `(h^forward_n, h^backward_1)`.
    pub fn finals(&self) -> (LstmState, LstmState) {
        (*self.forward.last().expect("nonempty"), self.backward[0])
    }

    /// All `h_i` as columns of one `2·hidden×n` matrix.
    pub fn matrix(&self, tape: &mut Tape) -> Result<NodeId, ModelError> {
        Ok(tape.concat(Axis::Cols, &self.states)?)
    }
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let forward = LstmCell::new(store, &format!("{prefix}.fw"), input_dim, hidden_dim, rng)?;
        let backward = LstmCell::new(store, &format!("{prefix}.bw"), input_dim, hidden_dim, rng)?;
        Ok(BiLstm { forward, backward })
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self, ModelError> {
        let forward = LstmCell::from_store(store, &format!("{prefix}.fw"))?;
        let backward = LstmCell::from_store(store, &format!("{prefix}.bw"))?;
        if forward.input_dim != backward.input_dim || forward.hidden_dim != backward.hidden_dim {
            return Err(ModelError::Invalid(format!("{prefix}: forward and backward cells differ in shape")));
        }
        Ok(BiLstm { forward, backward })
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.forward.params().into_iter().chain(self.backward.params()).collect()
    }

    pub fn encode(&self, tape: &mut Tape, xs: &[NodeId]) -> Result<EncoderStates, ModelError> {
        if xs.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let forward = self.forward.run(tape, xs)?;
        let reversed: Vec<NodeId> = xs.iter().rev().copied().collect();
        let mut backward = self.backward.run(tape, &reversed)?;
        backward.reverse();
        let states = forward
            .iter()
            .zip(&backward)
            .map(|(f, b)| tape.concat(Axis::Rows, &[f.h, b.h]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EncoderStates { states, forward, backward })
    }
}
