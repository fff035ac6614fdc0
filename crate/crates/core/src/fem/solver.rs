//! Linear solvers for the symmetric positive definite systems produced by
//! assembly: Jacobi-preconditioned conjugate gradients, and a sparse
//! Cholesky factorization whose symbolic analysis is reused across solves
//! that share a sparsity pattern.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;

pub const DEFAULT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned CG from a zero initial guess. Stops once
/// `|b - A x| <= rel_tol |b|`.
pub fn solve_spd(a: &CsrMatrix, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    pcg(a, rhs, None, rel_tol, max_iter).map(|(x, _)| x)
}

/// Jacobi-preconditioned CG with an optional initial guess.
pub fn pcg(
    a: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = a.dim();
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgReport { iterations: 0, residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = rhs.to_vec();
    if x0.is_some() {
        let ax = a.apply(&x);
        r.iter_mut().zip(&ax).for_each(|(ri, axi)| *ri -= axi);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut residual = norm(&r) / b_norm;

    for it in 0..max_iter {
        if residual <= rel_tol {
            return Ok((x, CgReport { iterations: it, residual }));
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged { iterations: it, residual });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = norm(&r) / b_norm;
    }
    if residual <= rel_tol {
        Ok((x, CgReport { iterations: max_iter, residual }))
    } else {
        Err(Error::NotConverged { iterations: max_iter, residual })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sparse Cholesky bound to one sparsity pattern. The fill-reducing
/// ordering and symbolic structure are computed once in [`Self::analyze`].
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    symbolic: SymbolicLlt<usize>,
    structure: SymbolicSparseColMat<usize>,
}

static SEQUENTIAL: Once = Once::new();

impl SparseCholesky {
    /// Analyzes the pattern of a symmetric matrix stored with both triangles.
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        // Keep factorizations bitwise reproducible regardless of pool size.
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(Par::Seq));
        let n = a.dim();
        // A symmetric CSR matrix is its own CSC transpose.
        let structure = SymbolicSparseColMat::new_checked(n, n, a.row_ptr().to_vec(), None, a.col_idx().to_vec());
        let symbolic = SymbolicLlt::try_new(structure.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { symbolic, structure })
    }

    /// Factorizes `a` (which must share the analyzed pattern) and solves.
    pub fn solve(&self, a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        if a.row_ptr() != self.structure.col_ptr() || a.col_idx() != self.structure.row_idx() {
            return Err(Error::Factorization("matrix pattern differs from the analyzed one".into()));
        }
        let mat = SparseColMat::new(self.structure.clone(), a.values().to_vec());
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e}")))?;
        let mut x = rhs.to_vec();
        let n = x.len();
        llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        Ok(x)
    }
}

/// Which backend solves the displacement systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Sparse Cholesky with a cached symbolic analysis.
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
}

impl std::str::FromStr for LinearSolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cholesky" => Ok(Self::Cholesky),
            "pcg" | "cg" => Ok(Self::Pcg),
            other => Err(Error::Config(format!("unknown linear solver '{other}'"))),
        }
    }
}
