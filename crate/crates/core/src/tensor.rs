//! Dense multi-way arrays.
//!
//! A [`DenseTensor`] stores 1 to 4 modes of `f64` values in row-major order:
//! the last mode varies fastest. Video data uses the layout
//! `(height, width, channel, frame)`, so the values of one pixel-channel
//! across all frames are contiguous.
//!
//! Modes are numbered from 1 in [`DenseTensor::unfold`] and
//! [`DenseTensor::fold`], matching the usual "mode-n unfolding" vocabulary.
//! Everything else uses 0-based indices.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

/// Chunk length for data-parallel elementwise work. Fixed so that results
/// never depend on the size of the thread pool.
pub(crate) const PAR_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub frobenius: f64,
    pub max_abs: f64,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_ORDER {
        return Err(Error::invalid(format!(
            "tensor order must be between 1 and {MAX_ORDER}, got {}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::invalid(format!("zero extent in shape {shape:?}")));
    }
    Ok(shape.iter().product())
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for m in (0..shape.len().saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * shape[m + 1];
    }
    strides
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![value; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for m in (0..shape.len()).rev() {
                idx[m] += 1;
                if idx[m] < shape[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (m, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[m]);
            off = off * self.shape[m] + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let mut data = self.data.clone();
        data.par_chunks_mut(PAR_CHUNK)
            .for_each(|chunk| chunk.iter_mut().for_each(|v| *v = f(*v)));
        Self {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mode-`mode` unfolding (1-based). Rows follow the chosen mode; columns
    /// run over the remaining modes in increasing mode order, row-major.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        if mode == 0 || mode > self.order() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range for order-{} tensor",
                self.order()
            )));
        }
        let m = mode - 1;
        let rows = self.shape[m];
        let cols = self.len() / rows;
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; self.order()];
        for &v in &self.data {
            let mut col = 0;
            for (k, &i) in idx.iter().enumerate() {
                if k != m {
                    col = col * self.shape[k] + i;
                }
            }
            out[idx[m] * cols + col] = v;
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < self.shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Matrix {
            rows,
            cols,
            data: out,
        })
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(matrix: &Matrix, mode: usize, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if mode == 0 || mode > shape.len() {
            return Err(Error::invalid(format!(
                "mode {mode} out of range for order-{} tensor",
                shape.len()
            )));
        }
        let m = mode - 1;
        if matrix.rows != shape[m] || matrix.rows * matrix.cols != len {
            return Err(Error::invalid(format!(
                "{}x{} matrix is not a mode-{mode} unfolding of {shape:?}",
                matrix.rows, matrix.cols
            )));
        }
        let mut data = vec![0.0; len];
        let mut idx = vec![0usize; shape.len()];
        for slot in data.iter_mut() {
            let mut col = 0;
            for (k, &i) in idx.iter().enumerate() {
                if k != m {
                    col = col * shape[k] + i;
                }
            }
            *slot = matrix.data[idx[m] * matrix.cols + col];
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Contracts `x` and `y` over their first `shared_modes` modes.
    ///
    /// The result holds the remaining modes of `x` followed by the remaining
    /// modes of `y`. A full contraction yields a one-element tensor of shape
    /// `[1]`; `shared_modes == 0` is the outer product.
    pub fn contract(x: &Self, y: &Self, shared_modes: usize) -> Result<Self> {
        if shared_modes > x.order() || shared_modes > y.order() {
            return Err(Error::invalid(format!(
                "cannot contract {shared_modes} modes of shapes {:?} and {:?}",
                x.shape, y.shape
            )));
        }
        if x.shape[..shared_modes] != y.shape[..shared_modes] {
            return Err(Error::invalid(format!(
                "leading extents differ: {:?} vs {:?}",
                &x.shape[..shared_modes],
                &y.shape[..shared_modes]
            )));
        }
        let k: usize = x.shape[..shared_modes].iter().product();
        let xr: usize = x.shape[shared_modes..].iter().product();
        let yr: usize = y.shape[shared_modes..].iter().product();
        let mut shape: Vec<usize> = x.shape[shared_modes..]
            .iter()
            .chain(&y.shape[shared_modes..])
            .copied()
            .collect();
        if shape.is_empty() {
            shape.push(1);
        }
        if shape.len() > MAX_ORDER {
            return Err(Error::invalid(format!(
                "contraction result would have order {}",
                shape.len()
            )));
        }
        // x viewed as k × xr, y as k × yr; out = xᵀ y.
        let mut data = vec![0.0; xr * yr];
        data.par_chunks_mut(yr).enumerate().for_each(|(i, row)| {
            for s in 0..k {
                let a = x.data[s * xr + i];
                if a == 0.0 {
                    continue;
                }
                let yrow = &y.data[s * yr..(s + 1) * yr];
                for (o, &b) in row.iter_mut().zip(yrow) {
                    *o += a * b;
                }
            }
        });
        Self::new(shape, data)
    }

    /// Elementwise `max(s − tau, 0) + min(s + tau, 0)`, the proximal map of
    /// `tau · ‖·‖₁`.
    pub fn soft_threshold(&self, tau: f64) -> Result<Self> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::invalid(format!(
                "threshold must be non-negative, got {tau}"
            )));
        }
        Ok(self.map(|s| shrink(s, tau)))
    }

    pub fn norms(&self) -> Norms {
        let mut l1 = 0.0;
        let mut sq = 0.0;
        let mut max_abs: f64 = 0.0;
        for &v in &self.data {
            let a = v.abs();
            l1 += a;
            sq += v * v;
            max_abs = max_abs.max(a);
        }
        Norms {
            l1,
            frobenius: sq.sqrt(),
            max_abs,
        }
    }
}

/// Scalar soft-threshold.
#[inline]
pub fn shrink(s: f64, tau: f64) -> f64 {
    (s - tau).max(0.0) + (s + tau).min(0.0)
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(shape: Vec<usize>) -> DenseTensor {
        let mut k = 0.0;
        DenseTensor::from_fn(shape, |_| {
            k += 1.0;
            k
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseTensor::zeros(vec![]).is_err());
        assert!(DenseTensor::zeros(vec![2, 0]).is_err());
        assert!(DenseTensor::zeros(vec![1, 1, 1, 1, 1]).is_err());
        assert!(DenseTensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn matrix_mode_one_unfolding_is_identity() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = t.unfold(1).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.data(), t.data());
    }

    #[test]
    fn unfold_shape_arithmetic() {
        let t = iota(vec![2, 3, 4]);
        let m = t.unfold(3).unwrap();
        assert_eq!((m.rows(), m.cols()), (4, 6));
        // row k holds t[i, j, k] with (i, j) row-major
        assert_eq!(m.get(1, 0), t.get(&[0, 0, 1]));
        assert_eq!(m.get(1, 4), t.get(&[1, 1, 1]));
        let m2 = t.unfold(2).unwrap();
        assert_eq!(m2.get(2, 7), t.get(&[1, 2, 3]));
    }

    #[test]
    fn unfold_mode_out_of_range() {
        let t = iota(vec![2, 3]);
        assert!(t.unfold(0).is_err());
        assert!(t.unfold(3).is_err());
    }

    #[test]
    fn fold_inverts_unfold() {
        let t = iota(vec![2, 3, 4, 2]);
        for mode in 1..=4 {
            let back = DenseTensor::fold(&t.unfold(mode).unwrap(), mode, t.shape()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn contract_dot_product() {
        let x = DenseTensor::new(vec![2], vec![1.0, 0.0]).unwrap();
        let y = DenseTensor::new(vec![2], vec![3.0, 5.0]).unwrap();
        let z = DenseTensor::contract(&x, &y, 1).unwrap();
        assert_eq!(z.shape(), &[1]);
        assert_eq!(z.data(), &[3.0]);
    }

    #[test]
    fn contract_broadcasts_frame_over_ones() {
        let b = iota(vec![2, 3, 3]);
        let ones = DenseTensor::filled(vec![4], 1.0).unwrap();
        let bz = DenseTensor::contract(&b, &ones, 0).unwrap();
        assert_eq!(bz.shape(), &[2, 3, 3, 4]);
        for (i, v) in bz.data().iter().enumerate() {
            assert_eq!(*v, b.data()[i / 4]);
        }
    }

    #[test]
    fn contract_extent_mismatch() {
        let x = iota(vec![2, 3]);
        let y = iota(vec![3, 3]);
        assert!(DenseTensor::contract(&x, &y, 1).is_err());
        assert!(DenseTensor::contract(&x, &y, 3).is_err());
    }

    #[test]
    fn soft_threshold_scalars() {
        assert_eq!(shrink(2.0, 1.0), 1.0);
        assert_eq!(shrink(0.0, 0.7), 0.0);
        assert_eq!(shrink(-0.5, 1.0), 0.0);
        assert_eq!(shrink(-3.0, 1.0), -2.0);
        let t = iota(vec![3]);
        assert!(t.soft_threshold(-1.0).is_err());
        assert!(t.soft_threshold(f64::NAN).is_err());
        assert_eq!(t.soft_threshold(0.0).unwrap(), t);
    }

    #[test]
    fn norms_basic() {
        let z = DenseTensor::zeros(vec![3, 2]).unwrap();
        let n = z.norms();
        assert_eq!((n.l1, n.frobenius, n.max_abs), (0.0, 0.0, 0.0));
        let t = DenseTensor::new(vec![2], vec![3.0, -4.0]).unwrap();
        let n = t.norms();
        assert_eq!((n.l1, n.frobenius, n.max_abs), (7.0, 5.0, 4.0));
    }
}
