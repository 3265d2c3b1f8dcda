use std::sync::Arc;

use indexmap::IndexMap;

use super::{pc_header, Preconditioner, Viewer};
use crate::error::{Error, Result};
use crate::krylov::{KspStats, SharedKsp};
use crate::operators::OperatorRef;

/// Assembles the implicit preconditioning operator and hands the sparse
/// matrix to an inner (usually algebraic) preconditioner.
#[derive(Debug)]
pub struct AssembledPc {
    prefix: String,
    inner: Box<dyn Preconditioner>,
    assembled: Option<OperatorRef>,
}

impl AssembledPc {
    pub fn new(prefix: &str, inner: Box<dyn Preconditioner>) -> AssembledPc {
        AssembledPc { prefix: prefix.to_string(), inner, assembled: None }
    }

    pub fn assembled(&self) -> Option<&OperatorRef> {
        self.assembled.as_ref()
    }
}

impl Preconditioner for AssembledPc {
    fn type_name(&self) -> &'static str {
        "assembled"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let implicit = pmat.as_implicit().ok_or_else(|| Error::MissingContext {
            pc: "assembled".into(),
            what: format!("an implicit operator with a bilinear form, got {}", pmat.describe()),
        })?;
        let op: OperatorRef = Arc::new(implicit.assemble()?);
        self.inner.set_up(&op, &op)?;
        self.assembled = Some(op);
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if self.assembled.is_none() {
            return Err(Error::NotSetUp("assembled".into()));
        }
        self.inner.apply(r, z)
    }

    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if self.assembled.is_none() {
            return Err(Error::NotSetUp("assembled".into()));
        }
        self.inner.apply_transpose(r, z)
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "assembled");
        if let Some(op) = &self.assembled {
            v.line(&format!("assembled matrix: {} rows, {} bytes", op.nrows(), op.memory_footprint()));
        }
        self.inner.view(v);
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        self.inner.collect_stats(out);
    }
}

/// A preconditioner that runs a whole inner KSP. Serves `-pc_type ksp` and
/// `-pc_type telescope` (which, without process reduction, is the same thing).
#[derive(Debug)]
pub struct KspPc {
    prefix: String,
    kind: &'static str,
    inner: SharedKsp,
}

impl KspPc {
    pub fn new(prefix: &str, kind: &'static str, inner: SharedKsp) -> KspPc {
        KspPc { prefix: prefix.to_string(), kind, inner }
    }

    pub fn inner(&self) -> &SharedKsp {
        &self.inner
    }
}

impl Preconditioner for KspPc {
    fn type_name(&self) -> &'static str {
        self.kind
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        self.inner.lock().expect("inner ksp poisoned").set_operators(pmat.clone(), pmat.clone());
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.inner.lock().expect("inner ksp poisoned").solve(r, z)?;
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, self.kind);
        if self.kind == "telescope" {
            v.line("reduction factor ignored (single process)");
        }
        self.inner.lock().expect("inner ksp poisoned").view(v);
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        self.inner.lock().expect("inner ksp poisoned").collect_stats(out);
    }
}
