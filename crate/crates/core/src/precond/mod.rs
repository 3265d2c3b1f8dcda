//! Preconditioners. Each one is set up from the system operator and a
//! (possibly different) preconditioning operator, and afterwards maps
//! residuals to approximate errors.

mod basic;
mod fieldsplit;
mod pcd;
mod schwarz;
mod wrappers;

use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::krylov::KspStats;
use crate::linalg::CsrMatrix;
use crate::operators::{LinearOperator, OperatorRef};

pub use basic::{Ilu0Pc, JacobiPc, LuPc, SorPc};
pub use fieldsplit::{FieldSplitPc, SchurComplement, SchurFactType, SplitKind};
pub use pcd::{MassPc, PcdBcVariant, PcdPc};
pub use schwarz::{prolongation, SchwarzPc};
pub use wrappers::{AssembledPc, KspPc};

pub trait Preconditioner: Send + Sync + fmt::Debug {
    fn type_name(&self) -> &'static str;

    /// Build whatever `apply` needs from `a` (system) and `pmat`.
    fn set_up(&mut self, a: &OperatorRef, pmat: &OperatorRef) -> Result<()>;

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()>;

    fn apply_transpose(&self, _r: &[f64], _z: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(format!("transpose application of pc {}", self.type_name())))
    }

    fn view(&self, v: &mut Viewer);

    /// Statistics of KSPs nested inside this preconditioner.
    fn collect_stats(&self, _out: &mut IndexMap<String, KspStats>) {}
}

/// Indented text sink for solver-tree views.
#[derive(Debug, Default)]
pub struct Viewer {
    out: String,
    depth: usize,
}

impl Viewer {
    pub fn new() -> Viewer {
        Viewer::default()
    }

    pub fn line(&mut self, text: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    pub fn push(&mut self) {
        self.depth += 1;
    }

    pub fn pop(&mut self) {
        self.depth = self.depth.saturating_sub(1);
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub(crate) fn pc_header(v: &mut Viewer, prefix: &str, type_name: &str) {
    v.line(&format!("PC Object: ({prefix})"));
    v.push();
    v.line(&format!("type: {type_name}"));
}

/// The identity.
#[derive(Debug, Default, Clone)]
pub struct NonePc {
    pub prefix: String,
}

impl Preconditioner for NonePc {
    fn type_name(&self) -> &'static str {
        "none"
    }

    fn set_up(&mut self, _a: &OperatorRef, _pmat: &OperatorRef) -> Result<()> {
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }

    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.apply(r, z)
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "none");
        v.pop();
    }
}

/// The CSR behind `pmat`, or an error telling the user how to get one.
pub(crate) fn require_csr<'a>(pc: &str, pmat: &'a dyn LinearOperator) -> Result<&'a CsrMatrix> {
    pmat.as_csr().ok_or_else(|| {
        Error::Unsupported(format!(
            "pc {pc} needs an assembled matrix but got {}; use -pmat_type aij or wrap it in -pc_type assembled",
            pmat.describe()
        ))
    })
}
