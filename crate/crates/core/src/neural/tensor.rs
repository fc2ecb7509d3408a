use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};

/// Row-major `batch x steps x width` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub batch: usize,
    pub steps: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, steps: usize, width: usize) -> Self {
        Tensor3 {
            batch,
            steps,
            width,
            data: vec![0.0; batch * steps * width],
        }
    }

    pub fn from_vec(batch: usize, steps: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * steps * width {
            return Err(Error::Shape {
                what: "tensor data",
                expected: batch * steps * width,
                actual: data.len(),
            });
        }
        Ok(Tensor3 {
            batch,
            steps,
            width,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.steps, self.width)
    }

    #[inline]
    pub fn get(&self, b: usize, t: usize, c: usize) -> f64 {
        self.data[(b * self.steps + t) * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, b: usize, t: usize, c: usize, v: f64) {
        self.data[(b * self.steps + t) * self.width + c] = v;
    }

    #[inline]
    pub fn row(&self, b: usize, t: usize) -> &[f64] {
        let start = (b * self.steps + t) * self.width;
        &self.data[start..start + self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, t: usize) -> &mut [f64] {
        let start = (b * self.steps + t) * self.width;
        &mut self.data[start..start + self.width]
    }

    /// All `steps x width` values of sample `b`.
    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.steps * self.width;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.steps * self.width;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn slice_batch(&self, range: Range<usize>) -> Tensor3 {
        let n = self.steps * self.width;
        Tensor3 {
            batch: range.len(),
            steps: self.steps,
            width: self.width,
            data: self.data[range.start * n..range.end * n].to_vec(),
        }
    }

    pub fn gather_batch(&self, indices: &[usize]) -> Tensor3 {
        let mut data = Vec::with_capacity(indices.len() * self.steps * self.width);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Tensor3 {
            batch: indices.len(),
            steps: self.steps,
            width: self.width,
            data,
        }
    }

    /// Stacks single samples (`steps x width` each) into a batch.
    pub fn stack(steps: usize, width: usize, samples: &[&[f64]]) -> Result<Tensor3> {
        let mut data = Vec::with_capacity(samples.len() * steps * width);
        for s in samples {
            if s.len() != steps * width {
                return Err(Error::Shape {
                    what: "sample length",
                    expected: steps * width,
                    actual: s.len(),
                });
            }
            data.extend_from_slice(s);
        }
        Tensor3::from_vec(samples.len(), steps, width, data)
    }
}
