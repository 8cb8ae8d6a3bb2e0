//! Dense row-major tensors of rank 1 to 4.
//!
//! Image batches are NHWC. There is no general broadcasting: binary ops take
//! equal shapes or a tensor and a scalar.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

/// Element type of a tensor. Production tensors are `f32`; gradient
/// checks re-run the same code in `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static
{
    /// `c = a * b + beta * c` for row/column-strided matrices
    /// `a: m x k`, `b: k x n`, `c: m x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("float conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float conversion")
    }
}

fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    assert!(rs >= 0 && cs >= 0, "negative strides are not supported");
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                beta: Self,
                c: (&mut [Self], isize, isize),
            ) {
                assert!(span(m, k, a.1, a.2) <= a.0.len(), "gemm: lhs out of bounds");
                assert!(span(k, n, b.1, b.2) <= b.0.len(), "gemm: rhs out of bounds");
                assert!(span(m, n, c.1, c.2) <= c.0.len(), "gemm: output out of bounds");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index the kernel touches lies inside the
                // spans checked above, and `c` is uniquely borrowed.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.0.as_ptr(),
                        a.1,
                        a.2,
                        b.0.as_ptr(),
                        b.1,
                        b.2,
                        beta,
                        c.0.as_mut_ptr(),
                        c.1,
                        c.2,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

#[derive(Clone, PartialEq)]
pub struct Tensor<T: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let preview: Vec<_> = self.data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &preview)
            .finish()
    }
}

/// Below this many rows `matmul` skips the packed GEMM path.
const SKINNY_ROWS: usize = 4;

pub fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::InvalidShape(shape.to_vec(), "rank must be between 1 and 4"));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec(), "dims must be positive"));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len = check_shape(shape)?;
        if data.len() != len {
            return Err(Error::mismatch("Tensor::new", len, data.len()));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        })
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(&[n, n], |i| if i / n == i % n { T::one() } else { T::zero() })
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Size of the last axis.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().expect("rank >= 1")
    }

    /// Number of rows when viewed as `(len / last_dim, last_dim)`.
    pub fn rows(&self) -> usize {
        self.data.len() / self.last_dim()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.last_dim();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::mismatch("reshape", self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.as_f64()))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::mismatch(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        self.map(|v| v + s)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Index of the largest entry of each last-axis row; ties resolve to
    /// the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows()).map(|r| argmax(self.row(r))).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn as_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [m, n] => Ok((m, n)),
            _ => Err(Error::mismatch(op, "rank-2 tensor", &self.shape)),
        }
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.as_matrix("matmul")?;
        let (k2, n) = rhs.as_matrix("matmul")?;
        if k != k2 {
            return Err(Error::mismatch("matmul", (m, k), (k2, n)));
        }
        let mut out = Self::zeros(&[m, n])?;
        if m <= SKINNY_ROWS {
            // a few rows against a wide matrix: stream `rhs` once per row
            // and skip zero inputs (common after ReLU)
            for (x, y) in self.data.chunks_exact(k).zip(out.data.chunks_exact_mut(n)) {
                for (&a, b) in x.iter().zip(rhs.data.chunks_exact(n)) {
                    if a != T::zero() {
                        y.iter_mut().zip(b).for_each(|(y, &b)| *y += a * b);
                    }
                }
            }
            return Ok(out);
        }
        T::gemm(
            m,
            k,
            n,
            (&self.data, k as isize, 1),
            (&rhs.data, n as isize, 1),
            T::zero(),
            (&mut out.data, n as isize, 1),
        );
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn matmul_tn(&self, rhs: &Self) -> Result<Self> {
        let (k, m) = self.as_matrix("matmul_tn")?;
        let (k2, n) = rhs.as_matrix("matmul_tn")?;
        if k != k2 {
            return Err(Error::mismatch("matmul_tn", (k, m), (k2, n)));
        }
        let mut out = Self::zeros(&[m, n])?;
        T::gemm(
            m,
            k,
            n,
            (&self.data, 1, m as isize),
            (&rhs.data, n as isize, 1),
            T::zero(),
            (&mut out.data, n as isize, 1),
        );
        Ok(out)
    }

    /// `self · rhsᵀ`.
    pub fn matmul_nt(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = self.as_matrix("matmul_nt")?;
        let (n, k2) = rhs.as_matrix("matmul_nt")?;
        if k != k2 {
            return Err(Error::mismatch("matmul_nt", (m, k), (n, k2)));
        }
        let mut out = Self::zeros(&[m, n])?;
        T::gemm(
            m,
            k,
            n,
            (&self.data, k as isize, 1),
            (&rhs.data, 1, k as isize),
            T::zero(),
            (&mut out.data, n as isize, 1),
        );
        Ok(out)
    }
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
