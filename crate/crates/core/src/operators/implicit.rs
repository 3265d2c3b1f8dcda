use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use super::{check_shape, match_fields, AssembledOperator, IndexSet, LinearOperator, NullSpace, OperatorRef};
use crate::error::Result;
use crate::fem::{BcSet, MixedSpace};
use crate::forms::{self, BlockLayout, Form, ProblemContext};
use crate::linalg::CsrMatrix;

/// Matrix-free operator that keeps the bilinear form, boundary conditions
/// and field selection it was built from.
pub struct ImplicitOperator {
    form: Arc<Form>,
    bcs: Arc<BcSet>,
    rows: BlockLayout,
    cols: BlockLayout,
    nullspace: Option<NullSpace>,
    flops: u64,
    matches: Mutex<HashMap<IndexSet, Vec<usize>>>,
}

impl fmt::Debug for ImplicitOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitOperator")
            .field("form", &self.form)
            .field("rows", &self.rows.fields())
            .field("cols", &self.cols.fields())
            .finish()
    }
}

impl ImplicitOperator {
    /// Operator on all fields of the form's space.
    pub fn new(form: Arc<Form>, bcs: Arc<BcSet>) -> Result<ImplicitOperator> {
        let all: Vec<usize> = (0..form.space().num_fields()).collect();
        ImplicitOperator::block(form, bcs, &all, &all)
    }

    pub fn block(form: Arc<Form>, bcs: Arc<BcSet>, rows: &[usize], cols: &[usize]) -> Result<ImplicitOperator> {
        let rows = BlockLayout::new(form.space(), rows)?;
        let cols = BlockLayout::new(form.space(), cols)?;
        let flops = forms::action_flops(&form, rows.fields(), cols.fields())?;
        Ok(ImplicitOperator { form, bcs, rows, cols, nullspace: None, flops, matches: Mutex::new(HashMap::new()) })
    }

    pub fn with_nullspace(mut self, ns: NullSpace) -> Self {
        self.nullspace = Some(ns);
        self
    }

    pub fn form(&self) -> &Arc<Form> {
        &self.form
    }

    pub fn bcs(&self) -> &Arc<BcSet> {
        &self.bcs
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        self.form.space()
    }

    pub fn context(&self) -> &Arc<ProblemContext> {
        self.form.context()
    }

    /// Global field ids selected for rows.
    pub fn row_field_ids(&self) -> &[usize] {
        self.rows.fields()
    }

    pub fn col_field_ids(&self) -> &[usize] {
        self.cols.fields()
    }

    pub fn is_diagonal_block(&self) -> bool {
        self.rows == self.cols
    }

    /// Assemble into CSR, keeping fields and nullspace.
    pub fn assemble(&self) -> Result<AssembledOperator> {
        let csr = self.assemble_csr()?;
        let mut op = AssembledOperator::new(csr)
            .with_fields(layout_sets(&self.rows), layout_sets(&self.cols))
            .with_label(format!("assembled {}", self.describe()));
        if let Some(ns) = &self.nullspace {
            op = op.with_nullspace(ns.clone());
        }
        Ok(op)
    }

    pub fn assemble_csr(&self) -> Result<CsrMatrix> {
        forms::assemble_matrix(&self.form, self.rows.fields(), self.cols.fields(), &self.bcs)
    }

    /// Cached field matching against this operator's row (or column) sets.
    fn matched(&self, query: &IndexSet, rows: bool) -> Result<Vec<usize>> {
        let layout = if rows { &self.rows } else { &self.cols };
        let mut cache = self.matches.lock().expect("match cache poisoned");
        let key = {
            // rows and columns may coincide; tag the lookup
            let mut k = query.indices().to_vec();
            k.push(usize::MAX - usize::from(rows));
            IndexSet::new(k)
        };
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
        let local = match_fields(query, &layout_sets(layout))?;
        let global: Vec<usize> = local.iter().map(|&p| layout.fields()[p]).collect();
        cache.insert(key, global.clone());
        Ok(global)
    }
}

fn layout_sets(layout: &BlockLayout) -> Vec<IndexSet> {
    (0..layout.fields().len()).map(|p| IndexSet::range(layout.offset(p), layout.offset(p + 1))).collect()
}

impl LinearOperator for ImplicitOperator {
    fn nrows(&self) -> usize {
        self.rows.size()
    }

    fn ncols(&self) -> usize {
        self.cols.size()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_shape(self.ncols(), x.len())?;
        check_shape(self.nrows(), y.len())?;
        forms::apply_action(&self.form, self.rows.fields(), self.cols.fields(), &self.bcs, x, y)
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_shape(self.nrows(), x.len())?;
        check_shape(self.ncols(), y.len())?;
        forms::apply_action_transpose(&self.form, self.rows.fields(), self.cols.fields(), &self.bcs, x, y)
    }

    fn row_fields(&self) -> Option<Vec<IndexSet>> {
        Some(layout_sets(&self.rows))
    }

    fn col_fields(&self) -> Option<Vec<IndexSet>> {
        Some(layout_sets(&self.cols))
    }

    fn extract_sub(&self, rows: &IndexSet, cols: &IndexSet) -> Result<OperatorRef> {
        let rf = self.matched(rows, true)?;
        let cf = self.matched(cols, false)?;
        let mut sub = ImplicitOperator::block(self.form.clone(), self.bcs.clone(), &rf, &cf)?;
        if rf == cf && self.is_diagonal_block() {
            if let Some(ns) = self.nullspace.as_ref().and_then(|ns| ns.restrict(cols)) {
                sub = sub.with_nullspace(ns);
            }
        }
        Ok(Arc::new(sub))
    }

    fn as_implicit(&self) -> Option<&ImplicitOperator> {
        Some(self)
    }

    fn nullspace(&self) -> Option<&NullSpace> {
        self.nullspace.as_ref()
    }

    /// Coordinates, cell-to-node maps of the fields involved, coefficient
    /// values and boundary data: what the element loop reads.
    fn memory_footprint(&self) -> usize {
        let space = self.space();
        let mesh = space.mesh();
        let mut bytes = 8 * mesh.dim() * mesh.num_vertices();
        let mut fields: Vec<usize> = self.rows.fields().iter().chain(self.cols.fields()).copied().collect();
        fields.sort_unstable();
        fields.dedup();
        for f in fields {
            bytes += 4 * mesh.num_cells() * space.field(f).element().num_nodes();
        }
        for &name in self.form.kind().required_coefficients() {
            if let Some(func) = self.context().function(name) {
                bytes += 8 * func.storage_len() + 4 * mesh.num_cells() * func.space.element().num_nodes();
            }
        }
        bytes + 16 * self.bcs.len()
    }

    fn flops_per_apply(&self) -> u64 {
        self.flops
    }

    fn describe(&self) -> String {
        let all = self.rows.fields().len() == self.space().num_fields() && self.is_diagonal_block();
        if all {
            format!("implicit {}", self.form.kind().name())
        } else {
            format!("implicit {}{:?}x{:?}", self.form.kind().name(), self.rows.fields(), self.cols.fields())
        }
    }
}
