//! Sparse symmetric positive definite solves.
//!
//! [`SparseSpd`] stores the full symmetric matrix in compressed rows (which,
//! by symmetry, is also its compressed-column form). Direct solves go through
//! a supernodal Cholesky factorization with an AMD ordering; the iterative
//! path is Jacobi-preconditioned conjugate gradients.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside a {n}x{n} matrix");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            // stable sort keeps the summation order of duplicates fixed
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseSpd { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to stored values; the sparsity pattern is fixed.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Storage slot of entry (i, j), if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// max |a_ij - a_ji| relative to max |a_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut defect: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                defect = defect.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            defect / scale
        } else {
            0.0
        }
    }

    fn faer_ref(&self) -> SparseColMatRef<'_, usize, f64> {
        // Full symmetric storage: the CSR arrays double as CSC arrays.
        let symbolic = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx);
        SparseColMatRef::new(symbolic, &self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectCholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub cg_rel_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { method: SolveMethod::DirectCholesky, cg_rel_tol: 1e-10, cg_max_iter: 20_000 }
    }
}

impl SolveOptions {
    pub fn cg(rel_tol: f64, max_iter: usize) -> Self {
        SolveOptions { method: SolveMethod::ConjugateGradient, cg_rel_tol: rel_tol, cg_max_iter: max_iter }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cg_rel_tol > 0.0 && self.cg_rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("cg_rel_tol {} not in (0, 1)", self.cg_rel_tol)));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::InvalidArgument("cg_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn solve_spd(a: &SparseSpd, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    if a.dim() != b.len() {
        return Err(Error::SizeMismatch { expected: a.dim(), got: b.len() });
    }
    opts.validate()?;
    let x = match opts.method {
        SolveMethod::DirectCholesky => Cholesky::factor(a)?.solve(b),
        SolveMethod::ConjugateGradient => conjugate_gradient(a, b, None, opts.cg_rel_tol, opts.cg_max_iter)?.x,
    };
    debug_assert!({
        let r = residual_norm(a, &x, b);
        let bn = norm2(b);
        let tol = match opts.method {
            SolveMethod::DirectCholesky => 1e-6,
            SolveMethod::ConjugateGradient => 1.0001 * opts.cg_rel_tol,
        };
        r <= tol * bn.max(f64::MIN_POSITIVE)
    });
    Ok(x)
}

/// Sparse Cholesky factor. The symbolic analysis is kept so matrices with the
/// same pattern can be refactored cheaply.
#[derive(Debug, Clone)]
pub struct Cholesky {
    symbolic: SymbolicLlt<usize>,
    llt: Llt<usize, f64>,
    n: usize,
}

impl Cholesky {
    pub fn factor(a: &SparseSpd) -> Result<Self> {
        let symbolic = SymbolicLlt::try_new(a.faer_ref().symbolic(), Side::Lower)
            .map_err(|e| Error::Numerical(format!("symbolic Cholesky failed: {e:?}")))?;
        let llt = numeric_llt(symbolic.clone(), a)?;
        Ok(Cholesky { symbolic, llt, n: a.dim() })
    }

    /// Refactor a matrix sharing the pattern of the one passed to [`Cholesky::factor`].
    pub fn refactor(&mut self, a: &SparseSpd) -> Result<()> {
        if a.dim() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, got: a.dim() });
        }
        self.llt = numeric_llt(self.symbolic.clone(), a)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut x = b.to_vec();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }
}

fn numeric_llt(symbolic: SymbolicLlt<usize>, a: &SparseSpd) -> Result<Llt<usize, f64>> {
    Llt::try_new_with_symbolic(symbolic, a.faer_ref(), Side::Lower)
        .map_err(|e| Error::Numerical(format!("matrix is not positive definite ({e:?})")))
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final ‖b − A x‖₂ / ‖b‖₂.
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(
    a: &SparseSpd,
    b: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::Numerical(format!("non-positive diagonal entry {d:e} in row {i}")))
            }
        })
        .collect::<Result<_>>()?;
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, rel_residual: 0.0 });
    }
    let mut r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rnorm = norm2(&r);
    let mut it = 0;
    while rnorm > rel_tol * bnorm {
        if it == max_iter {
            return Err(Error::LinearConvergence { iterations: it, residual: rnorm / bnorm });
        }
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Numerical(format!("non-positive curvature {curvature:e} in CG")));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = norm2(&r);
        it += 1;
    }
    Ok(CgOutcome { x, iterations: it, rel_residual: rnorm / bnorm })
}

pub fn residual_norm(a: &SparseSpd, x: &[f64], b: &[f64]) -> f64 {
    norm2(&a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect::<Vec<_>>())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> SparseSpd {
        SparseSpd::from_triplets(2, [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)])
    }

    fn laplacian_1d(n: usize) -> SparseSpd {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseSpd::from_triplets(n, t)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = [1.5, -2.0, 3.25];
        for opts in [SolveOptions::default(), SolveOptions::cg(1e-12, 10)] {
            let x = solve_spd(&SparseSpd::identity(3), &b, &opts).unwrap();
            for (xi, bi) in x.iter().zip(b) {
                assert!((xi - bi).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hand_checked_two_by_two() {
        for opts in [SolveOptions::default(), SolveOptions::cg(1e-12, 10)] {
            let x = solve_spd(&two_by_two(), &[3.0, 3.0], &opts).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let a = SparseSpd::from_triplets(2, [(0, 0, 1.0), (0, 0, 1.0), (1, 1, 3.0), (0, 1, 0.5), (1, 0, 0.5)]);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = SparseSpd::from_triplets(2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(Cholesky::factor(&a), Err(Error::Numerical(_))));
        assert!(matches!(solve_spd(&a, &[1.0, -1.0], &SolveOptions::cg(1e-12, 50)), Err(Error::Numerical(_))));
    }

    #[test]
    fn cg_iteration_cap_reports_residual() {
        let a = laplacian_1d(200);
        let b = vec![1.0; 200];
        match solve_spd(&a, &b, &SolveOptions::cg(1e-12, 3)) {
            Err(Error::LinearConvergence { iterations: 3, residual }) => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn direct_and_cg_agree_and_are_deterministic() {
        let a = laplacian_1d(300);
        let b: Vec<f64> = (0..300).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x1 = solve_spd(&a, &b, &SolveOptions::default()).unwrap();
        let x2 = solve_spd(&a, &b, &SolveOptions::cg(1e-13, 2000)).unwrap();
        let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-8 * scale);
        }
        let again = solve_spd(&a, &b, &SolveOptions::default()).unwrap();
        assert_eq!(x1, again);
        assert!(residual_norm(&a, &x1, &b) < 1e-10 * norm2(&b));
    }

    #[test]
    fn refactor_reuses_pattern() {
        let mut a = laplacian_1d(50);
        let mut chol = Cholesky::factor(&a).unwrap();
        for v in a.values_mut() {
            *v *= 2.0;
        }
        chol.refactor(&a).unwrap();
        let b = vec![1.0; 50];
        let x = chol.solve(&b);
        assert!(residual_norm(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(matches!(
            solve_spd(&SparseSpd::identity(3), &[1.0], &SolveOptions::default()),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
