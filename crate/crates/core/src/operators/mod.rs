//! Linear operators behind one interface: matrix-free operators that carry
//! their PDE-level description, and assembled CSR matrices.

mod assembled;
mod implicit;
mod index_set;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, CsrMatrix};

pub use assembled::AssembledOperator;
pub use implicit::ImplicitOperator;
pub use index_set::{match_fields, IndexSet};

pub type OperatorRef = Arc<dyn LinearOperator>;

pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;

    fn apply_transpose(&self, _x: &[f64], _y: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(format!("transpose of {}", self.describe())))
    }

    /// Field index sets of the row space, in local numbering.
    fn row_fields(&self) -> Option<Vec<IndexSet>> {
        None
    }

    fn col_fields(&self) -> Option<Vec<IndexSet>> {
        self.row_fields()
    }

    /// Sub-operator on the given rows and columns, each a concatenation of fields.
    fn extract_sub(&self, _rows: &IndexSet, _cols: &IndexSet) -> Result<OperatorRef> {
        Err(Error::Unsupported(format!("submatrix extraction from {}", self.describe())))
    }

    fn as_implicit(&self) -> Option<&ImplicitOperator> {
        None
    }

    fn as_csr(&self) -> Option<&CsrMatrix> {
        None
    }

    fn nullspace(&self) -> Option<&NullSpace> {
        None
    }

    fn memory_footprint(&self) -> usize;

    fn flops_per_apply(&self) -> u64;

    fn describe(&self) -> String;
}

pub(crate) fn check_shape(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    Ok(())
}

/// Orthonormal basis of a (right) nullspace.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSpace {
    vectors: Vec<Vec<f64>>,
}

impl NullSpace {
    /// Orthonormalises `vectors` (modified Gram–Schmidt), dropping dependent ones.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<NullSpace> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in vectors {
            let scale = dot(&v, &v).sqrt();
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = dot(&v, &v).sqrt();
            if n > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            }
        }
        if basis.is_empty() {
            return Err(Error::InvalidArgument("nullspace spanned by zero vectors".into()));
        }
        let n = basis[0].len();
        if basis.iter().any(|b| b.len() != n) {
            return Err(Error::InvalidArgument("nullspace vectors differ in length".into()));
        }
        Ok(NullSpace { vectors: basis })
    }

    /// Constants on `set`, zero elsewhere.
    pub fn constant_on(n: usize, set: &IndexSet) -> Result<NullSpace> {
        let mut v = vec![0.0; n];
        for &i in set.indices() {
            v[i] = 1.0;
        }
        NullSpace::new(vec![v])
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Number of basis vectors.
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Length of each basis vector.
    pub fn vector_len(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn project(&self, v: &mut [f64]) {
        for b in &self.vectors {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }

    /// The part of the nullspace supported on `set`, if any survives.
    pub fn restrict(&self, set: &IndexSet) -> Option<NullSpace> {
        let parts: Vec<Vec<f64>> = self.vectors.iter().map(|v| set.gather(v)).collect();
        NullSpace::new(parts).ok()
    }
}

/// A diagonal scaling `y = d .* x`, mostly handy in tests.
#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    pub diag: Vec<f64>,
}

impl LinearOperator for DiagonalOperator {
    fn nrows(&self) -> usize {
        self.diag.len()
    }

    fn ncols(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_shape(self.diag.len(), x.len())?;
        check_shape(self.diag.len(), y.len())?;
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.diag) {
            *yi = d * xi;
        }
        Ok(())
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.apply(x, y)
    }

    fn memory_footprint(&self) -> usize {
        8 * self.diag.len()
    }

    fn flops_per_apply(&self) -> u64 {
        self.diag.len() as u64
    }

    fn describe(&self) -> String {
        format!("diagonal({})", self.diag.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_removes_constant() {
        let ns = NullSpace::constant_on(4, &IndexSet::range(0, 4)).unwrap();
        let mut v = vec![1.0; 4];
        ns.project(&mut v);
        assert!(v.iter().all(|x| x.abs() < 1e-15));
        let mut w = vec![1.0, -1.0, 2.0, -2.0];
        let before = w.clone();
        ns.project(&mut w);
        for (a, b) in w.iter().zip(&before) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_drops_vanishing_parts() {
        let ns = NullSpace::constant_on(6, &IndexSet::range(4, 6)).unwrap();
        assert!(ns.restrict(&IndexSet::range(0, 4)).is_none());
        let r = ns.restrict(&IndexSet::range(3, 6)).unwrap();
        assert_eq!((r.dim(), r.vector_len()), (1, 3));
    }
}
