//! Dense row-major `f64` matrices, the value type carried by every tape node.
//!
//! A batch of `n` points with `k` features is an `n x k` matrix; scalars are
//! `1 x 1`. Binary elementwise operations broadcast any axis of length one.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match shape {rows}x{cols}",
            data.len()
        );
        Self { rows, cols, data }
    }

    /// A single column built from `values`.
    pub fn column(values: Vec<f64>) -> Self {
        let rows = values.len();
        Self::from_vec(rows, 1, values)
    }

    /// A single row built from `values`.
    pub fn row(values: Vec<f64>) -> Self {
        let cols = values.len();
        Self::from_vec(1, cols, values)
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

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    /// Value of a `1 x 1` matrix. Panics otherwise.
    pub fn item(&self) -> f64 {
        assert!(
            self.is_scalar(),
            "item() on a {}x{} matrix",
            self.rows,
            self.cols
        );
        self.data[0]
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_vec(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// In-place `self += other` for equal shapes.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// `self * other^T` for `self: n x k`, `other: m x k`, giving `n x m`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.cols,
            "matmul_t inner dimension mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(n, m);
        // other^T viewed through strides: element (p, j) lives at other[j * k + p].
        gemm(
            n,
            k,
            m,
            &self.data,
            (k as isize, 1),
            &other.data,
            (1, k as isize),
            &mut out.data,
        );
        out
    }

    /// `self * other` for `self: n x k`, `other: k x m`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(n, m);
        gemm(
            n,
            k,
            m,
            &self.data,
            (k as isize, 1),
            &other.data,
            (m as isize, 1),
            &mut out.data,
        );
        out
    }

    /// `self^T * other` for `self: k x n`, `other: k x m`, giving `n x m`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul inner dimension mismatch");
        let (n, k, m) = (self.cols, self.rows, other.cols);
        let mut out = Matrix::zeros(n, m);
        gemm(
            n,
            k,
            m,
            &self.data,
            (1, n as isize),
            &other.data,
            (m as isize, 1),
            &mut out.data,
        );
        out
    }

    /// Sums `self` down to `shape`, undoing a broadcast.
    pub fn reduce_to(&self, shape: (usize, usize)) -> Matrix {
        if self.shape() == shape {
            return self.clone();
        }
        let (rows, cols) = shape;
        assert!(
            (rows == self.rows || rows == 1) && (cols == self.cols || cols == 1),
            "cannot reduce {}x{} to {rows}x{cols}",
            self.rows,
            self.cols
        );
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..self.rows {
            let ro = if rows == 1 { 0 } else { r };
            for c in 0..self.cols {
                let co = if cols == 1 { 0 } else { c };
                out.data[ro * cols + co] += self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// Result shape of broadcasting `a` against `b`, or `None` when incompatible.
pub fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    fn axis(x: usize, y: usize) -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    }
    Some((axis(a.0, b.0)?, axis(a.1, b.1)?))
}

/// Elementwise `f(a, b)` with broadcasting. Panics on incompatible shapes.
pub fn zip_broadcast(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    if a.shape() == b.shape() {
        return Matrix {
            rows: a.rows,
            cols: a.cols,
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        };
    }
    let (rows, cols) = broadcast_shape(a.shape(), b.shape()).unwrap_or_else(|| {
        panic!(
            "cannot broadcast {}x{} against {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )
    });
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let ra = if a.rows == 1 { 0 } else { r };
        let rb = if b.rows == 1 { 0 } else { r };
        for c in 0..cols {
            let ca = if a.cols == 1 { 0 } else { c };
            let cb = if b.cols == 1 { 0 } else { c };
            data.push(f(a.data[ra * a.cols + ca], b.data[rb * b.cols + cb]));
        }
    }
    Matrix { rows, cols, data }
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    n: usize,
    k: usize,
    m: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
) {
    if n == 0 || m == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // SAFETY: the strides above address only elements inside `a` (n x k),
    // `b` (k x m) and `c` (n x m), whose lengths are checked by the callers'
    // shape assertions.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|p| a.get(i, p) * b.get(p, j)).sum()
        })
    }

    fn transpose(a: &Matrix) -> Matrix {
        Matrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
    }

    #[test]
    fn products_agree_with_naive_loops() {
        // Small integers keep every product and sum exact.
        let a = Matrix::from_fn(5, 3, |i, j| i as f64 - 2.0 * j as f64 + 1.0);
        let b = Matrix::from_fn(3, 4, |i, j| (i * j) as f64 - 1.0);
        let want = naive(&a, &b);
        assert_eq!(a.matmul(&b), want);
        assert_eq!(a.matmul_t(&transpose(&b)), want);
        assert_eq!(transpose(&a).t_matmul(&b), want);
    }

    #[test]
    fn broadcasting_and_reduction() {
        let a = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let row = Matrix::row(vec![10.0, 20.0]);
        let sum = zip_broadcast(&a, &row, |x, y| x + y);
        assert_eq!(sum.row_slice(2), &[14.0, 25.0]);
        assert_eq!(a.reduce_to((1, 2)).as_slice(), &[6.0, 9.0]);
        assert_eq!(a.reduce_to((3, 1)).as_slice(), &[1.0, 5.0, 9.0]);
        assert_eq!(a.reduce_to((1, 1)).item(), 15.0);
        assert!(broadcast_shape((3, 2), (2, 2)).is_none());
    }
}
