use std::sync::Arc;

use super::{check_shape, match_fields, IndexSet, LinearOperator, NullSpace, OperatorRef};
use crate::error::Result;
use crate::linalg::CsrMatrix;

/// A CSR matrix, optionally annotated with field index sets and a nullspace.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    csr: CsrMatrix,
    row_fields: Option<Vec<IndexSet>>,
    col_fields: Option<Vec<IndexSet>>,
    nullspace: Option<NullSpace>,
    label: String,
}

impl AssembledOperator {
    pub fn new(csr: CsrMatrix) -> AssembledOperator {
        let label = format!("csr {}x{} nnz {}", csr.nrows(), csr.ncols(), csr.nnz());
        AssembledOperator { csr, row_fields: None, col_fields: None, nullspace: None, label }
    }

    pub fn with_fields(mut self, rows: Vec<IndexSet>, cols: Vec<IndexSet>) -> Self {
        self.row_fields = Some(rows);
        self.col_fields = Some(cols);
        self
    }

    pub fn with_nullspace(mut self, ns: NullSpace) -> Self {
        self.nullspace = Some(ns);
        self
    }

    pub fn with_label(mut self, label: String) -> Self {
        self.label = label;
        self
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.csr
    }

    fn local_sets(fields: &[IndexSet], picked: &[usize]) -> Vec<IndexSet> {
        let mut base = 0;
        picked
            .iter()
            .map(|&f| {
                let n = fields[f].len();
                base += n;
                IndexSet::range(base - n, base)
            })
            .collect()
    }
}

impl LinearOperator for AssembledOperator {
    fn nrows(&self) -> usize {
        self.csr.nrows()
    }

    fn ncols(&self) -> usize {
        self.csr.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_shape(self.ncols(), x.len())?;
        check_shape(self.nrows(), y.len())?;
        self.csr.matvec(x, y);
        Ok(())
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_shape(self.nrows(), x.len())?;
        check_shape(self.ncols(), y.len())?;
        self.csr.matvec_transpose(x, y);
        Ok(())
    }

    fn row_fields(&self) -> Option<Vec<IndexSet>> {
        self.row_fields.clone()
    }

    fn col_fields(&self) -> Option<Vec<IndexSet>> {
        self.col_fields.clone()
    }

    /// With field annotations, both index sets must be field concatenations;
    /// without, any sorted index sets are accepted.
    fn extract_sub(&self, rows: &IndexSet, cols: &IndexSet) -> Result<OperatorRef> {
        let mut sub = AssembledOperator::new(self.csr.submatrix(rows, cols));
        if let (Some(rf), Some(cf)) = (&self.row_fields, &self.col_fields) {
            let r = match_fields(rows, rf)?;
            let c = match_fields(cols, cf)?;
            let same = r == c && rf == cf;
            sub = sub.with_fields(Self::local_sets(rf, &r), Self::local_sets(cf, &c));
            if same {
                if let Some(ns) = self.nullspace.as_ref().and_then(|ns| ns.restrict(cols)) {
                    sub = sub.with_nullspace(ns);
                }
            }
        }
        Ok(Arc::new(sub))
    }

    fn as_csr(&self) -> Option<&CsrMatrix> {
        Some(&self.csr)
    }

    fn nullspace(&self) -> Option<&NullSpace> {
        self.nullspace.as_ref()
    }

    fn memory_footprint(&self) -> usize {
        self.csr.memory_footprint()
    }

    fn flops_per_apply(&self) -> u64 {
        2 * self.csr.nnz() as u64
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}
