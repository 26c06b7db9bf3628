//! Named parameter storage and matching gradient buffers.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub(crate) fn add(&mut self, name: String, value: Matrix) -> ParamId {
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub(crate) fn normal<R: Rng + ?Sized>(&mut self, name: String, rows: usize, cols: usize, std: f64, rng: &mut R) -> ParamId {
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        self.add(name, Matrix::from_vec(rows, cols, data))
    }

    pub(crate) fn constant(&mut self, name: String, cols: usize, value: f64) -> ParamId {
        self.add(name, Matrix::from_vec(1, cols, alloc::vec![value; cols]))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total scalar parameter count.
    pub fn numel(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }
}

/// One gradient matrix per parameter, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    values: Vec<Matrix>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self { values: store.values.iter().map(|m| Matrix::zeros(m.rows, m.cols)).collect() }
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn zero(&mut self) {
        for m in &mut self.values {
            m.data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in &mut self.values {
            m.scale(s);
        }
    }

    pub fn norm(&self) -> f64 {
        crate::math::sqrt(self.values.iter().map(Matrix::sq_norm).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Matrix::is_finite)
    }
}
