use rand::Rng;

use super::GradError;

/// Dense row-major `f32` array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, GradError> {
        let expected: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) || expected != data.len() {
            return Err(GradError::BadShape { dims, len: data.len() });
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![0.0; n] }
    }

    pub fn filled(dims: &[usize], value: f32) -> Self {
        let n = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![value; n] }
    }

    pub fn uniform<R: Rng>(dims: &[usize], bound: f32, rng: &mut R) -> Self {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Tensor { dims: dims.to_vec(), data }
    }

    pub fn row(data: Vec<f32>) -> Self {
        Tensor { dims: vec![1, data.len()], data }
    }

    pub fn column(data: Vec<f32>) -> Self {
        Tensor { dims: vec![data.len(), 1], data }
    }

    pub fn scalar(v: f32) -> Self {
        Tensor { dims: vec![1], data: vec![v] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rank-1 tensors are treated as a single row.
    pub fn matrix_dims(&self) -> (usize, usize) {
        match self.dims.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            other => (other[0], other[1..].iter().product()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f32) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}
