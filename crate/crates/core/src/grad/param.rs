use std::collections::HashMap;

use super::tape::ParamGrads;
use super::{GradError, Tensor};

/// Adagrad accumulator starting value.
pub const ADAGRAD_INIT_ACC: f32 = 0.1;
/// Adagrad denominator guard.
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }

    pub(crate) fn from_index(i: usize) -> Self {
        ParamId(i)
    }
}

/// A trainable tensor with its gradient and optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub adagrad_acc: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let dims = value.dims().to_vec();
        Parameter {
            name: name.into(),
            grad: Tensor::zeros(&dims),
            adagrad_acc: Tensor::filled(&dims, ADAGRAD_INIT_ACC),
            value,
        }
    }
}

/// Ordered collection of uniquely named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, GradError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(GradError::DuplicateParam(name));
        }
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.params.push(Parameter::new(name, value));
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ParamId, GradError> {
        self.id(name).ok_or_else(|| GradError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Adds `scale · grads` into the stored gradients.
    pub fn accumulate(&mut self, grads: &ParamGrads, scale: f64) {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id.0];
            for (dst, src) in p.grad.data_mut().iter_mut().zip(&g.data) {
                *dst = (*dst as f64 + scale * src) as f32;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad.fill(0.0));
    }

    /// Restores every accumulator to its initial value.
    pub fn reset_optimizer(&mut self) {
        self.params.iter_mut().for_each(|p| p.adagrad_acc.fill(ADAGRAD_INIT_ACC));
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.grad.data().iter())
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the factor applied (1.0 when no clipping was needed).
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        assert!(max_norm > 0.0, "max_norm must be positive");
        let norm = self.grad_norm();
        if norm <= max_norm {
            return 1.0;
        }
        let factor = max_norm / norm;
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = (*g as f64 * factor) as f32);
        }
        factor
    }

    /// One Adagrad update over every parameter, then clears gradients.
    pub fn adagrad_step(&mut self, lr: f64) {
        for p in &mut self.params {
            let Parameter { value, grad, adagrad_acc, .. } = p;
            for ((v, g), acc) in value.data_mut().iter_mut().zip(grad.data_mut()).zip(adagrad_acc.data_mut()) {
                let gv = *g as f64;
                if gv != 0.0 {
                    let new_acc = *acc as f64 + gv * gv;
                    *acc = new_acc as f32;
                    *v = (*v as f64 - lr * gv / (new_acc.sqrt() + ADAGRAD_EPS)) as f32;
                }
                *g = 0.0;
            }
        }
    }
}
