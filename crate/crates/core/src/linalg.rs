//! Vector kernels and the few dense routines needed on `m × m` matrices,
//! where `m` is the number of stored correction pairs (at most a few dozen).

use faer::{Mat, Side};

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `a - b`
pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `‖a - b‖²` without allocating.
pub fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub fn all_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Dense square matrix, row-major. Only used for `m × m` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SmallMat<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SmallMat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], v))
            .collect()
    }

    /// Principal trailing block `[from.., from..]`.
    pub fn trailing(&self, from: usize) -> Self {
        let d = self.dim - from;
        Self::from_fn(d, |i, j| self[(i + from, j + from)])
    }

    /// Drop the first row and column, append a zero row and column at the end.
    pub(crate) fn shift_out_first(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.data[i * d + j] = if i + 1 < d && j + 1 < d {
                    self.data[(i + 1) * d + j + 1]
                } else {
                    T::zero()
                };
            }
        }
    }

    /// Grow by one row and column filled with zeros.
    pub(crate) fn grow(&mut self) {
        let old = self.dim;
        let new = old + 1;
        let mut data = vec![T::zero(); new * new];
        for i in 0..old {
            data[i * new..i * new + old].copy_from_slice(&self.data[i * old..(i + 1) * old]);
        }
        self.dim = new;
        self.data = data;
    }

    /// Shrink to the leading `dim × dim` block.
    pub(crate) fn truncate(&mut self, dim: usize) {
        if dim >= self.dim {
            return;
        }
        *self = Self::from_fn(dim, |i, j| self[(i, j)]);
    }
}

impl<T> std::ops::Index<(usize, usize)> for SmallMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SmallMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Solve `R x = b` for upper-triangular `R`.
pub fn solve_upper<T: Scalar>(r: &SmallMat<T>, b: &[T]) -> Vec<T> {
    let m = r.dim();
    let mut x = b.to_vec();
    for i in (0..m).rev() {
        let mut acc = x[i];
        for j in i + 1..m {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Solve `Rᵀ x = b` for upper-triangular `R`.
pub fn solve_upper_transposed<T: Scalar>(r: &SmallMat<T>, b: &[T]) -> Vec<T> {
    let m = r.dim();
    let mut x = b.to_vec();
    for i in 0..m {
        let mut acc = x[i];
        for j in 0..i {
            acc -= r[(j, i)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Spectral decomposition `A = Q diag(values) Qᵀ` of a symmetric matrix.
///
/// Columns of `vectors` are the eigenvectors.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: SmallMat<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Symmetric eigendecomposition via `faer`, carried out in double
    /// precision so the single-precision instantiation gets the same factor
    /// quality.
    pub fn new(a: &SmallMat<T>) -> Self {
        let n = a.dim();
        let m = Mat::<f64>::from_fn(n, n, |i, j| (a[(i, j)].as_f64() + a[(j, i)].as_f64()) * 0.5);
        let eig = m.selfadjoint_eigendecomposition(Side::Lower);
        let values = eig.s().column_vector();
        let vectors = eig.u();
        Self {
            values: (0..n).map(|k| T::of(values.read(k))).collect(),
            vectors: SmallMat::from_fn(n, |i, j| T::of(vectors.read(i, j))),
        }
    }

    pub fn min_abs(&self) -> T {
        self.values.iter().fold(T::infinity(), |acc, v| acc.min(v.abs()))
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `f(A) = Q diag(f(values)) Qᵀ`.
    pub fn map(&self, f: impl Fn(T) -> T) -> SmallMat<T> {
        let n = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        SmallMat::from_fn(n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| {
                acc + self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)]
            })
        })
    }

    /// `A⁻¹ b`; caller guarantees no zero eigenvalue.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.values.len();
        let mut coeffs = vec![T::zero(); n];
        for k in 0..n {
            let mut proj = T::zero();
            for i in 0..n {
                proj += self.vectors[(i, k)] * b[i];
            }
            coeffs[k] = proj / self.values[k];
        }
        (0..n)
            .map(|i| (0..n).fold(T::zero(), |acc, k| acc + self.vectors[(i, k)] * coeffs[k]))
            .collect()
    }
}
