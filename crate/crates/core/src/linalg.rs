//! Small dense linear algebra: the matrices in this crate are at most a few
//! dozen rows wide, so everything here is plain row-major storage with
//! textbook algorithms (partial-pivot LU, one-sided Jacobi SVD).

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from rows; fails on an empty or ragged grid.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::MalformedGrid);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "vec_mul dimension mismatch");
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| v[i] * self[(i, j)]).sum())
            .collect()
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(
            T::zero(),
            |acc, &x| if x.abs() > acc { x.abs() } else { acc },
        )
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        assert_eq!(a.rows(), a.cols(), "LU of a non-square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = a.max_abs();
        if scale == T::zero() {
            return Err(Error::Singular);
        }
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n);
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold(
                        (k, T::zero()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pmax <= tiny {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solves `xᵀ A = bᵀ`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, then x = Pᵀ w.
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] = z[i] - self.lu[(k, i)] * z[k];
            }
            z[i] /= self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] = z[i] - self.lu[(k, i)] * z[k];
            }
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    pub fn determinant(&self) -> T {
        (0..self.lu.rows()).fold(self.sign, |acc, i| acc * self.lu[(i, i)])
    }
}

pub fn inverse<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(Lu::new(a)?.inverse())
}

/// Singular values and right singular vectors.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// Sorted in decreasing order; `min(rows, cols)` of them are meaningful,
    /// the rest are (numerically) zero.
    pub singular_values: Vec<T>,
    /// `cols × cols` orthogonal matrix whose columns are right singular
    /// vectors, ordered like `singular_values`.
    pub v: Matrix<T>,
}

/// One-sided Jacobi SVD. Works for any shape; for a wide matrix the trailing
/// columns of `v` span the null space.
pub fn svd<T: Real>(a: &Matrix<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::c(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the original column order among equal norms.
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        v: v.select_columns(&order),
    }
}

pub fn largest_singular_value<T: Real>(a: &Matrix<T>) -> T {
    svd(a)
        .singular_values
        .first()
        .copied()
        .unwrap_or_else(T::zero)
}

/// Ratio of extreme singular values of a square matrix (infinite when singular).
pub fn condition_number<T: Real>(a: &Matrix<T>) -> T {
    let s = svd(a).singular_values;
    let k = a.rows().min(a.cols());
    let smax = s[0];
    let smin = s[k - 1];
    if smin == T::zero() {
        T::infinity()
    } else {
        smax / smin
    }
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn rank<T: Real>(a: &Matrix<T>, rel_tol: T) -> usize {
    let s = svd(a).singular_values;
    let smax = s.first().copied().unwrap_or_else(T::zero);
    if smax == T::zero() {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Orthonormal basis of the span of `vectors` (modified Gram-Schmidt with
/// one re-orthogonalization pass). Vectors whose residual norm falls below
/// `tol` times their original norm are dropped.
pub fn orthonormal_basis<T: Real>(vectors: &[Vec<T>], tol: T) -> Vec<Vec<T>> {
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let norm0 = dot(v, v).sqrt();
        if norm0 == T::zero() {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let proj = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, &y)| *x -= proj * y);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm > tol * norm0 {
            r.iter_mut().for_each(|x| *x /= norm);
            basis.push(r);
        }
    }
    basis
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn lu_solves_and_inverts() {
        let a = m(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-14);
        }
        let y = lu.solve_transpose(&[1.0, 2.0, 3.0]);
        let back = a.vec_mul(&y);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-14);
        }
        let prod = a.matmul(&lu.inverse());
        assert!(prod.sub(&Matrix::identity(3)).max_abs() < 1e-14);
        assert!((lu.determinant() - (-5.0)).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(Lu::new(&a).unwrap_err(), Error::Singular);
    }

    #[test]
    fn svd_of_wide_matrix() {
        let a = m(&[&[3.0, 0.0, 0.0], &[0.0, 0.0, 4.0]]);
        let s = svd(&a);
        assert!((s.singular_values[0] - 4.0).abs() < 1e-14);
        assert!((s.singular_values[1] - 3.0).abs() < 1e-14);
        assert!(s.singular_values[2].abs() < 1e-14);
        let vtv = s.v.transpose().matmul(&s.v);
        assert!(vtv.sub(&Matrix::identity(3)).max_abs() < 1e-14);
        // A V = U Σ has orthogonal columns with the sorted norms.
        let av = a.matmul(&s.v);
        for j in 0..3 {
            let n: f64 = av.col(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - s.singular_values[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn condition_and_rank() {
        let a = m(&[&[1.0, 0.0], &[0.0, 1e-3]]);
        assert!((condition_number(&a) - 1e3).abs() < 1e-9);
        let b = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        assert_eq!(rank(&b, 1e-12), 1);
    }

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let basis = orthonormal_basis::<f64>(
            &[
                vec![1.0, 1.0, 0.0],
                vec![2.0, 2.0, 0.0],
                vec![0.0, 1.0, 1.0],
            ],
            1e-10,
        );
        assert_eq!(basis.len(), 2);
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-15);
    }
}
