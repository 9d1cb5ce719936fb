//! Compressed sparse row storage.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<R> {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<R>,
}

impl<R: Real> CsrMatrix<R> {
    /// Builds a matrix from triplets, summing duplicates. Duplicates are added
    /// in their input order, so the result is reproducible bit for bit.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, R)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<R> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < nrows && j < ncols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, R)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => R::zero(),
        }
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[R], y: &mut [R]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = R::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[R]) -> Vec<R> {
        let mut y = vec![R::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec_into(&self, x: &[R], y: &mut [R]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = R::zero());
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[R], y: &[R]) -> R {
        let mut s = R::zero();
        for (i, &xi) in x.iter().enumerate() {
            let mut row = R::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            s += xi * row;
        }
        s
    }

    /// Sub-matrix with the given rows and columns (index maps into `self`).
    pub fn select(&self, rows: &[usize], cols_map: &[Option<usize>], ncols: usize) -> Self {
        let mut triplets = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if let Some(new_j) = cols_map[j] {
                    triplets.push((new_i, new_j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, triplets)
    }

    /// `alpha * self + beta * other`, both with identical dimensions.
    pub fn linear_combination(&self, alpha: R, other: &Self, beta: R) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn row_sums(&self) -> Vec<R> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<R>> {
        let mut d = vec![vec![R::zero(); self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Square symmetric sparse matrix. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<R>(CsrMatrix<R>);

impl<R: Real> SparseSymMatrix<R> {
    /// Wraps `m`, checking exact symmetry of the stored pattern and values.
    pub fn new(m: CsrMatrix<R>) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::DimensionMismatch { expected: m.nrows, got: m.ncols });
        }
        for i in 0..m.nrows {
            for (j, v) in m.row(i) {
                if m.get(j, i) != v {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not mirrored")));
                }
            }
        }
        Ok(SparseSymMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows
    }

    pub fn csr(&self) -> &CsrMatrix<R> {
        &self.0
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[R]) -> R {
        self.0.bilinear(x, x)
    }

    pub fn restrict(&self, indices: &[usize], map: &[Option<usize>]) -> Self {
        SparseSymMatrix(self.0.select(indices, map, indices.len()))
    }

    pub fn linear_combination(&self, alpha: R, other: &Self, beta: R) -> Self {
        SparseSymMatrix(self.0.linear_combination(alpha, &other.0, beta))
    }
}

impl<R> std::ops::Deref for SparseSymMatrix<R> {
    type Target = CsrMatrix<R>;
    fn deref(&self) -> &CsrMatrix<R> {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5), (0, 1, 3.0)]);
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![4.5, 2.0]);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn transpose_product_matches_dense() {
        let m = CsrMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]);
        let mut y = vec![0.0; 3];
        m.mul_transpose_vec_into(&[2.0, 3.0], &mut y);
        assert_eq!(y, vec![2.0, -3.0, 4.0]);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]);
        assert!(SparseSymMatrix::new(m).is_err());
    }
}
