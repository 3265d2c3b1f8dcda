use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::operators::IndexSet;

/// Compressed sparse row matrix with 4-byte offsets and column ids.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<u32>,
        col_idx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<CsrMatrix> {
        if row_ptr.len() != nrows + 1 || col_idx.len() != values.len() || row_ptr[nrows] as usize != values.len() {
            return Err(Error::InvalidArgument("inconsistent CSR arrays".into()));
        }
        for i in 0..nrows {
            let (s, e) = (row_ptr[i] as usize, row_ptr[i + 1] as usize);
            if s > e {
                return Err(Error::InvalidArgument(format!("row offsets decrease at row {i}")));
            }
            let row = &col_idx[s..e];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c as usize >= ncols) {
                return Err(Error::InvalidArgument(format!("row {i} has unsorted or out-of-range columns")));
            }
        }
        Ok(CsrMatrix { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Sum duplicate triplets into a CSR matrix.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidArgument(format!("triplet ({i},{j}) outside {nrows}x{ncols}")));
            }
            rows[i].push((j as u32, v));
        }
        let mut row_ptr = vec![0u32];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len() as u32);
        }
        CsrMatrix::new(nrows, ncols, row_ptr, col_idx, values)
    }

    /// Build from a sorted per-row sparsity pattern with zero values.
    pub fn from_pattern(ncols: usize, pattern: Vec<Vec<u32>>) -> CsrMatrix {
        let nrows = pattern.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0u32);
        let nnz: usize = pattern.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        for row in pattern {
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len() as u32);
        }
        let values = vec![0.0; col_idx.len()];
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n as u32).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[u32] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Position of entry `(i, j)` in the value array.
    #[inline]
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i] as usize, self.row_ptr[i + 1] as usize);
        self.col_idx[s..e].binary_search(&(j as u32)).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c as usize];
            }
            *yi = s;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, xi) in x.iter().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c as usize] += v * xi;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0u32; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let k = next[*c as usize] as usize;
                col_idx[k] = i as u32;
                values[k] = *v;
                next[*c as usize] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Copy of the block with the given (sorted) rows and columns.
    pub fn submatrix(&self, rows: &IndexSet, cols: &IndexSet) -> CsrMatrix {
        let mut col_map = vec![u32::MAX; self.ncols];
        for (k, &c) in cols.indices().iter().enumerate() {
            col_map[c] = k as u32;
        }
        let mut row_ptr = vec![0u32];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &i in rows.indices() {
            let (cs, vs) = self.row(i);
            for (c, v) in cs.iter().zip(vs) {
                let m = col_map[*c as usize];
                if m != u32::MAX {
                    col_idx.push(m);
                    values.push(*v);
                }
            }
            row_ptr.push(col_idx.len() as u32);
        }
        CsrMatrix { nrows: rows.len(), ncols: cols.len(), row_ptr, col_idx, values }
    }

    /// Exact storage of the three CSR arrays in bytes.
    pub fn memory_footprint(&self) -> usize {
        8 * self.values.len() + 4 * self.col_idx.len() + 4 * self.row_ptr.len()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if (v - self.get(*c as usize, i)).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c as usize)] = *v;
            }
        }
        m
    }

    /// MatrixMarket coordinate format (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let _ = writeln!(out, "{} {} {:.16e}", i + 1, c + 1, v);
            }
        }
        out
    }
}
