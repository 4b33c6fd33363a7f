//! Dense row-major `f64` matrices and vectors.
//!
//! One sample per row, one feature per column. Apart from
//! [`Matrix::add_row_broadcast`] there is no implicit broadcasting: every
//! other shape mismatch is a [`ShapeError`].

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shape mismatch in {op}: {lhs} vs {rhs}")]
pub struct ShapeError {
    pub op: &'static str,
    pub lhs: String,
    pub rhs: String,
}

impl ShapeError {
    pub(crate) fn new(op: &'static str, lhs: impl fmt::Display, rhs: impl fmt::Display) -> Self {
        ShapeError {
            op,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(ShapeError::new(
                "Matrix::new",
                Shape(rows, cols),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from nested rows. Panics on ragged or empty input; intended for
    /// literals in tests and fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, data).expect("non-empty rows")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> Shape {
        Shape(self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Gather the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix, ShapeError> {
        if indices.is_empty() {
            return Err(ShapeError::new("select_rows", self.shape(), "0 rows"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(ShapeError::new("select_rows", self.shape(), format!("row {i}")));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    /// `self · rhs`, backed by a blocked GEMM kernel.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, ShapeError> {
        if self.cols != rhs.rows {
            return Err(ShapeError::new("matmul", self.shape(), rhs.shape()));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        // SAFETY: the pointers cover m*k, k*n and m*n contiguous row-major
        // elements with the strides given, and `out` does not alias the inputs.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(Matrix {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix, ShapeError> {
        if self.rows != rhs.rows {
            return Err(ShapeError::new("t_matmul", self.shape(), rhs.shape()));
        }
        let (m, k, n) = (self.cols, self.rows, rhs.cols);
        let mut out = vec![0.0; m * n];
        // SAFETY: as in `matmul`; the lhs is read through swapped strides.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                rhs.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(Matrix {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix, ShapeError> {
        if self.cols != rhs.cols {
            return Err(ShapeError::new("matmul_t", self.shape(), rhs.shape()));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.rows);
        let mut out = vec![0.0; m * n];
        // SAFETY: as in `matmul`; the rhs is read through swapped strides.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                1,
                rhs.cols as isize,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(Matrix {
            rows: m,
            cols: n,
            data: out,
        })
    }

    /// Add `v` to every row.
    pub fn add_row_broadcast(&self, v: &Vector) -> Result<Matrix, ShapeError> {
        let mut out = self.clone();
        out.add_row_broadcast_in_place(v)?;
        Ok(out)
    }

    pub fn add_row_broadcast_in_place(&mut self, v: &Vector) -> Result<(), ShapeError> {
        if v.len() != self.cols {
            return Err(ShapeError::new("add_row_broadcast", self.shape(), v.len()));
        }
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(v.as_slice()) {
                *x += b;
            }
        }
        Ok(())
    }

    pub fn elementwise(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn map_in_place(&mut self, f: impl Fn(f64) -> f64) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    /// Elementwise product.
    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix, ShapeError> {
        if self.shape() != rhs.shape() {
            return Err(ShapeError::new("hadamard", self.shape(), rhs.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Sum over rows, giving one entry per column.
    pub fn column_sums(&self) -> Vector {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        Vector::from(sums)
    }

    /// The single column of an `n×1` matrix as a vector.
    pub fn column_vector(&self) -> Result<Vector, ShapeError> {
        if self.cols != 1 {
            return Err(ShapeError::new("column_vector", self.shape(), "n x 1"));
        }
        Ok(Vector::from(self.data.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn select(&self, indices: &[usize]) -> Vector {
        Vector {
            data: indices.iter().map(|&i| self.data[i]).collect(),
        }
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector {
            data: iter.into_iter().collect(),
        }
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}
