//! Dense row-major `f64` tensors and a tape-based reverse-mode autodiff graph.
//!
//! [`Tensor`] is a plain value type. Differentiable computation happens on a
//! [`Graph`]: leaves are registered with [`Graph::param`] (tracked) or
//! [`Graph::constant`] (untracked), every operation appends a node, and
//! [`Graph::backward`] walks the tape once in reverse.
//!
//! ```
//! use seizureformer::tensor::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.param(Tensor::new([2], vec![1.0, 2.0]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum(sq).unwrap();
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0]);
//! ```

mod graph;
pub mod gradcheck;
mod kernels;
mod ops;

pub use graph::{Graph, Var};
pub use ops::{patch_count, Padding};

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting empty/zero extents, length mismatches and
    /// non-finite values.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} holds {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value {} at index {i}", data[i])));
        }
        Ok(Self { shape, data })
    }

    /// Caller guarantees the shape/length invariant; finiteness is checked
    /// by the graph when the tensor is recorded.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        check_shape(&shape).expect("invalid shape");
        let n = shape.iter().product();
        Self { shape, data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: vec![1], data: vec![value] }
    }

    /// Uniform samples in `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(shape: impl Into<Vec<usize>>, bound: f64, rng: &mut R) -> Self {
        let shape = shape.into();
        check_shape(&shape).expect("invalid shape");
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 })
            .collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// First stored value; the value of a scalar tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        let mut flat = 0;
        for (i, (&ix, &ext)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < ext, "index {ix} out of bounds for axis {i} of extent {ext}");
            flat = flat * ext + ix;
        }
        self.data[flat]
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        check_shape(&shape)?;
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {:?}", self.shape, shape)));
        }
        Ok(Self { shape, data: self.data })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Shape(format!("extents must be positive, got {shape:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_checks_length_and_finiteness() {
        let t = Tensor::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(&[1, 0]), 3.0);
        let z = Tensor::new([3], vec![0.0; 3]).unwrap();
        assert_eq!(z, Tensor::zeros([3]));
        assert!(matches!(Tensor::new([2], vec![1.0, 2.0, 3.0]), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new([1], vec![f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(Tensor::new([0], vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn reshape_preserves_values() {
        let t = Tensor::new([2, 3], (0..6).map(f64::from).collect()).unwrap();
        let r = t.clone().reshape([3, 2]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape([4]).is_err());
    }
}
