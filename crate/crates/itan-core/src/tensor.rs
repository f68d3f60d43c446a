//! Dense row-major tensors generic over the working precision.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::{Debug, Display};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Scalar precision selector used by file formats and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn byte_width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    /// Flag byte stored in binary headers.
    pub fn flag(self) -> u8 {
        self.byte_width() as u8
    }

    pub fn from_flag(flag: u8) -> Result<Self> {
        match flag {
            4 => Ok(Precision::F32),
            8 => Ok(Precision::F64),
            other => Err(Error::BadPrecisionFlag(other)),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::F32 => write!(f, "f32"),
            Precision::F64 => write!(f, "f64"),
        }
    }
}

/// Floating-point scalar the numeric stack is generic over (f32 or f64).
pub trait Real:
    Copy
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    const PRECISION: Precision;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn maximum(self, other: Self) -> Self;
    fn is_finite(self) -> bool;
    fn write_le(self, out: &mut Vec<u8>);
    /// Reads one scalar from exactly `PRECISION.byte_width()` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

macro_rules! impl_real {
    ($t:ty, $prec:expr) => {
        impl Real for $t {
            const ZERO: Self = 0.0;
            const ONE: Self = 1.0;
            const PRECISION: Precision = $prec;

            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn exp(self) -> Self {
                self.exp()
            }
            fn ln(self) -> Self {
                self.ln()
            }
            fn sqrt(self) -> Self {
                self.sqrt()
            }
            fn abs(self) -> Self {
                self.abs()
            }
            fn maximum(self, other: Self) -> Self {
                self.max(other)
            }
            fn is_finite(self) -> bool {
                self.is_finite()
            }
            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
            fn read_le(bytes: &[u8]) -> Self {
                <$t>::from_le_bytes(bytes.try_into().expect("scalar byte width"))
            }
        }
    };
}

impl_real!(f32, Precision::F32);
impl_real!(f64, Precision::F64);

/// Dense row-major n-dimensional array.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray<R> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> NdArray<R> {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        NdArray {
            shape: shape.to_vec(),
            data: vec![R::ZERO; n],
        }
    }

    pub fn full(shape: &[usize], value: R) -> Self {
        let n = shape.iter().product();
        NdArray {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: R) -> Self {
        NdArray {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<R>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "zero-sized dimension in {shape:?}"
            )));
        }
        if n != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(NdArray {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> R) -> Self {
        let n: usize = shape.iter().product();
        NdArray {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    /// Row-major strides of the current shape.
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> R {
        self.data[self.flat_index(index)]
    }

    pub fn set(&mut self, index: &[usize], value: R) {
        let i = self.flat_index(index);
        self.data[i] = value;
    }

    fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (d, (&i, &s)) in index.iter().zip(&self.shape).enumerate() {
            debug_assert!(i < s, "index {i} out of bound {s} in axis {d}");
            flat = flat * s + i;
        }
        flat
    }

    /// Contiguous row `i` of a rank-2 array.
    pub fn row(&self, i: usize) -> &[R] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &mut self.data[i * cols..(i + 1) * cols]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::DimensionMismatch {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(NdArray {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combine; shapes must match exactly.
    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(R, R) -> R) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(NdArray {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place `self += other` (shapes must match).
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch {
                op: "add_assign",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: R) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Casts element by element through f64 (exact when widening).
    pub fn cast<T: Real>(&self) -> NdArray<T> {
        NdArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| T::from_f64(x.to_f64())).collect(),
        }
    }

    /// Largest absolute elementwise difference, for test assertions.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// Row-major strides for a shape.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

/// A single video's backbone features: shape `(n_t, h_f, w_f, n_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<R> {
    values: NdArray<R>,
}

impl<R: Real> FeatureMap<R> {
    pub fn new(values: NdArray<R>) -> Result<Self> {
        if values.rank() != 4 {
            return Err(Error::InvalidShape(format!(
                "feature map must have rank 4 (n_t, h_f, w_f, n_c), got {:?}",
                values.shape()
            )));
        }
        Ok(FeatureMap { values })
    }

    pub fn values(&self) -> &NdArray<R> {
        &self.values
    }

    pub fn into_values(self) -> NdArray<R> {
        self.values
    }

    pub fn n_t(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn h_f(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn w_f(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn n_c(&self) -> usize {
        self.values.shape()[3]
    }

    /// Spatial cell count per frame.
    pub fn n_f(&self) -> usize {
        self.h_f() * self.w_f()
    }
}

/// A per-frame embedding sequence: shape `(n_t, n_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<R> {
    values: NdArray<R>,
}

impl<R: Real> FrameSequence<R> {
    pub fn new(values: NdArray<R>) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::InvalidShape(format!(
                "frame sequence must have rank 2 (n_t, n_c), got {:?}",
                values.shape()
            )));
        }
        Ok(FrameSequence { values })
    }

    pub fn values(&self) -> &NdArray<R> {
        &self.values
    }

    pub fn n_t(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_c(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn frame(&self, t: usize) -> &[R] {
        self.values.row(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_validates_product() {
        assert!(NdArray::<f64>::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(NdArray::<f64>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(NdArray::<f64>::from_vec(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let a = NdArray::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        assert_eq!(a.get(&[0, 0]), 0.0);
        assert_eq!(a.get(&[0, 2]), 2.0);
        assert_eq!(a.get(&[1, 0]), 3.0);
        assert_eq!(a.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(a.strides(), vec![3, 1]);
    }

    #[test]
    fn reshape_preserves_data_checks_product() {
        let a = NdArray::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        let b = a.reshape(&[3, 2]).unwrap();
        assert_eq!(b.data(), a.data());
        assert!(a.reshape(&[4, 2]).is_err());
    }

    #[test]
    fn cast_f64_to_f32_and_back() {
        let a = NdArray::from_vec(&[3], vec![1.5f64, -2.25, 0.125]).unwrap();
        let b: NdArray<f32> = a.cast();
        let c: NdArray<f64> = b.cast();
        assert_eq!(a, c); // all values exactly representable in f32
    }

    #[test]
    fn feature_map_accessors() {
        let fm = FeatureMap::new(NdArray::<f64>::zeros(&[3, 2, 2, 8])).unwrap();
        assert_eq!(
            (fm.n_t(), fm.h_f(), fm.w_f(), fm.n_c(), fm.n_f()),
            (3, 2, 2, 8, 4)
        );
        assert!(FeatureMap::new(NdArray::<f64>::zeros(&[3, 2, 8])).is_err());
    }

    #[test]
    fn frame_sequence_rows() {
        let fs = FrameSequence::new(
            NdArray::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(fs.frame(0), &[1.0, 2.0, 3.0]);
        assert_eq!(fs.frame(1), &[4.0, 5.0, 6.0]);
    }
}
