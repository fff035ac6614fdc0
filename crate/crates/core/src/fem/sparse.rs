//! Compressed sparse row storage with a fixed, element-derived pattern.

use crate::par;

/// Square matrix in CSR form. Symmetric matrices store both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_parts(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(col_idx.len(), values.len());
        Self { n, row_ptr, col_idx, values }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, values }
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_indexed(y, |r, out| {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            *out = self.col_idx[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum();
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric elimination of the dofs flagged in `fixed` with prescribed
    /// `values`: free rows receive `-A_ij u_j`, fixed rows and columns become
    /// identity rows and the rhs carries `u_j`.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], fixed: &[bool], values: &[f64]) {
        for r in 0..self.n {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            for k in span {
                let c = self.col_idx[k];
                if fixed[r] {
                    self.values[k] = if c == r { 1.0 } else { 0.0 };
                } else if fixed[c] {
                    rhs[r] -= self.values[k] * values[c];
                    self.values[k] = 0.0;
                }
            }
        }
        for r in 0..self.n {
            if fixed[r] {
                rhs[r] = values[r];
            }
        }
    }
}

/// Sparsity pattern of a finite-element space together with, for every
/// element, the CSR slot of each local `(row, col)` pair.
#[derive(Debug, Clone)]
pub struct ElementPattern {
    n: usize,
    local_dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    element_dofs: Vec<Vec<usize>>,
    slots: Vec<Vec<usize>>,
}

impl ElementPattern {
    /// `element_dofs[e]` lists the global dofs of element `e` in local order.
    pub fn new(n: usize, element_dofs: Vec<Vec<usize>>) -> Self {
        let local_dim = element_dofs.first().map_or(0, Vec::len);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in &element_dofs {
            for &r in dofs {
                rows[r].extend_from_slice(dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let slots = element_dofs
            .iter()
            .map(|dofs| {
                let mut s = Vec::with_capacity(dofs.len() * dofs.len());
                for &r in dofs {
                    let span = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                    for &c in dofs {
                        s.push(row_ptr[r] + span.binary_search(&c).expect("column in pattern"));
                    }
                }
                s
            })
            .collect();
        Self { n, local_dim, row_ptr, col_idx, element_dofs, slots }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_elements(&self) -> usize {
        self.element_dofs.len()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.element_dofs[e]
    }

    /// Sums element matrices (row-major, `local_dim^2` entries each) into a
    /// matrix with this pattern. The merge runs in element order, so the
    /// result does not depend on how the element matrices were computed.
    pub fn assemble<M: AsRef<[f64]>>(&self, element_matrices: &[M]) -> CsrMatrix {
        let mut values = vec![0.0; self.col_idx.len()];
        for (slots, ke) in self.slots.iter().zip(element_matrices) {
            let ke = ke.as_ref();
            debug_assert_eq!(ke.len(), self.local_dim * self.local_dim);
            for (&s, &v) in slots.iter().zip(ke) {
                values[s] += v;
            }
        }
        CsrMatrix::from_parts(self.n, self.row_ptr.clone(), self.col_idx.clone(), values)
    }

    /// Sums element vectors into a global vector.
    pub fn assemble_vector<V: AsRef<[f64]>>(&self, element_vectors: &[V]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (dofs, fe) in self.element_dofs.iter().zip(element_vectors) {
            for (&d, &v) in dofs.iter().zip(fe.as_ref()) {
                out[d] += v;
            }
        }
        out
    }
}
