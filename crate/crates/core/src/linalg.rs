//! SPD linear solvers: envelope (profile) Cholesky and Jacobi-preconditioned CG.

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Real};
use crate::sparse::SparseSymMatrix;

/// Cholesky factor `A = L Lᵀ` stored row by row over the lower envelope.
///
/// Row `i` stores `L[i][first[i]..=i]` contiguously. On lexicographically
/// ordered uniform meshes the envelope is a band of width `n_div`, so the
/// fill-in is exactly the band.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky<R> {
    n: usize,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> EnvelopeCholesky<R> {
    /// Number of stored factor entries `a` would need.
    pub fn envelope_size(a: &SparseSymMatrix<R>) -> usize {
        (0..a.dim())
            .map(|i| i + 1 - a.row(i).map(|(j, _)| j).min().unwrap_or(i).min(i))
            .sum()
    }

    pub fn factor(a: &SparseSymMatrix<R>) -> Result<Self> {
        let n = a.dim();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        let mut len = 0usize;
        for i in 0..n {
            let f = a.row(i).map(|(j, _)| j).min().unwrap_or(i).min(i);
            first.push(f);
            start.push(len);
            len += i + 1 - f;
        }
        start.push(len);
        let mut data = vec![R::zero(); len];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                if k0 < j {
                    let ri = &data[start[i] + k0 - fi..start[i] + j - fi];
                    let rj = &data[start[j] + k0 - fj..start[j] + j - fj];
                    s -= dot(ri, rj);
                }
                if j < i {
                    let djj = data[start[j + 1] - 1];
                    data[start[i] + j - fi] = s / djj;
                } else {
                    if !(s > R::zero()) || !s.is_finite() {
                        return Err(Error::SingularSystem(format!(
                            "non-positive pivot {s} at row {i} of {n}"
                        )));
                    }
                    data[start[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { n, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [R]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s = x[i] - dot(&row[..i - fi], &x[fi..i]);
            x[i] = s / row[i - fi];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let xi = x[i] / row[i - fi];
            x[i] = xi;
            axpy(-xi, &row[..i - fi], &mut x[fi..i]);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions<R> {
    pub rel_tol: R,
    pub max_iter: usize,
}

impl<R: Real> Default for CgOptions<R> {
    fn default() -> Self {
        CgOptions { rel_tol: R::lit(1e-12), max_iter: 10_000 }
    }
}

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry. Returns the iteration count.
pub fn conjugate_gradient<R: Real>(
    a: &SparseSymMatrix<R>,
    b: &[R],
    x: &mut [R],
    opts: CgOptions<R>,
) -> Result<usize> {
    let n = a.dim();
    let diag: Vec<R> = (0..n).map(|i| a.get(i, i)).collect();
    if diag.iter().any(|&d| !(d > R::zero())) {
        return Err(Error::SingularSystem("non-positive diagonal in CG".into()));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == R::zero() {
        x.iter_mut().for_each(|v| *v = R::zero());
        return Ok(0);
    }
    let mut r = a.mul_vec(x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z: Vec<R> = r.iter().zip(&diag).map(|(&ri, &d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![R::zero(); n];
    for it in 0..opts.max_iter {
        if dot(&r, &r).sqrt() <= opts.rel_tol * bnorm {
            return Ok(it);
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > R::zero()) {
            return Err(Error::SingularSystem(format!("CG breakdown, pᵀAp = {pap}")));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        for ((zi, &ri), &d) in z.iter_mut().zip(&r).zip(&diag) {
            *zi = ri / d;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    if dot(&r, &r).sqrt() <= opts.rel_tol * bnorm {
        Ok(opts.max_iter)
    } else {
        Err(Error::SingularSystem(format!("CG did not converge in {} iterations", opts.max_iter)))
    }
}

/// Default cap on stored Cholesky entries before switching to CG (2 GiB of f64).
pub const DEFAULT_FACTOR_CAP: usize = 1 << 28;

/// Direct solver when the factor fits under the memory cap, CG otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver<R> {
    Cholesky(EnvelopeCholesky<R>),
    Iterative { matrix: SparseSymMatrix<R>, opts: CgOptions<R> },
}

impl<R: Real> SpdSolver<R> {
    pub fn new(a: SparseSymMatrix<R>, factor_cap: usize) -> Result<Self> {
        if EnvelopeCholesky::envelope_size(&a) <= factor_cap {
            Ok(SpdSolver::Cholesky(EnvelopeCholesky::factor(&a)?))
        } else {
            Ok(SpdSolver::Iterative { matrix: a, opts: CgOptions::default() })
        }
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve_in_place(&self, b: &mut [R]) -> Result<()> {
        match self {
            SpdSolver::Cholesky(f) => {
                f.solve_in_place(b);
                Ok(())
            }
            SpdSolver::Iterative { matrix, opts } => {
                let rhs = b.to_vec();
                b.iter_mut().for_each(|v| *v = R::zero());
                conjugate_gradient(matrix, &rhs, b, *opts).map(|_| ())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use approx::assert_relative_eq;

    fn laplace_1d(n: usize) -> SparseSymMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSymMatrix::new(CsrMatrix::from_triplets(n, n, t)).unwrap()
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplace_1d(10);
        let f = EnvelopeCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul_vec(&x_true);
        f.solve_in_place(&mut b);
        for (x, y) in b.iter().zip(&x_true) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        assert_eq!(EnvelopeCholesky::envelope_size(&a), 19);
    }

    #[test]
    fn cg_matches_cholesky() {
        let a = laplace_1d(30);
        let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.1).collect();
        let mut x1 = b.clone();
        SpdSolver::new(a.clone(), usize::MAX).unwrap().solve_in_place(&mut x1).unwrap();
        let mut x2 = b.clone();
        SpdSolver::new(a, 0).unwrap().solve_in_place(&mut x2).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert_relative_eq!(p, q, epsilon = 1e-9, max_relative = 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_is_singular() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        let a = SparseSymMatrix::new(m).unwrap();
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::SingularSystem(_))));
    }
}
