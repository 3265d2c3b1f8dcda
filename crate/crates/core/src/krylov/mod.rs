//! Krylov and stationary solvers with a preconditioner slot.
//!
//! Convergence is declared when the monitored norm drops below
//! `max(rtol * r0, atol)`. Left-preconditioned methods (cg, gmres, richardson)
//! monitor the preconditioned residual; right-preconditioned and flexible
//! gmres monitor the true residual.

mod methods;

use std::fmt;
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::operators::{LinearOperator, NullSpace, OperatorRef};
use crate::precond::{NonePc, Preconditioner, Viewer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KspType {
    Cg,
    Gmres,
    Fgmres,
    Richardson,
    Preonly,
}

impl KspType {
    pub const NAMES: [&'static str; 5] = ["cg", "gmres", "fgmres", "richardson", "preonly"];

    pub fn parse(name: &str) -> Result<KspType> {
        Ok(match name {
            "cg" => KspType::Cg,
            "gmres" => KspType::Gmres,
            "fgmres" => KspType::Fgmres,
            "richardson" => KspType::Richardson,
            "preonly" => KspType::Preonly,
            _ => return Err(Error::UnknownType { kind: "KSP", name: name.to_string(), known: Self::NAMES.to_vec() }),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            KspType::Cg => "cg",
            KspType::Gmres => "gmres",
            KspType::Fgmres => "fgmres",
            KspType::Richardson => "richardson",
            KspType::Preonly => "preonly",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthogonalization {
    Classical,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergedReason {
    RelativeTolerance,
    AbsoluteTolerance,
    /// preonly: one application of the preconditioner
    Iterations,
    /// Ran out of iterations. Not an error unless requested.
    DivergedMaxIts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub reason: ConvergedReason,
    pub iterations: usize,
    /// Final value of the monitored norm.
    pub residual_norm: f64,
    /// `|b - A x|`, computed for outermost solves.
    pub true_residual_norm: Option<f64>,
    pub history: Vec<f64>,
}

/// Where monitor lines go.
#[derive(Debug, Clone)]
pub enum MonitorSink {
    Stdout,
    Buffer(Arc<Mutex<String>>),
}

impl MonitorSink {
    pub fn buffer() -> (MonitorSink, Arc<Mutex<String>>) {
        let buf = Arc::new(Mutex::new(String::new()));
        (MonitorSink::Buffer(buf.clone()), buf)
    }

    pub fn line(&self, text: &str) {
        match self {
            MonitorSink::Stdout => println!("{text}"),
            MonitorSink::Buffer(buf) => {
                let mut b = buf.lock().expect("monitor buffer poisoned");
                b.push_str(text);
                b.push('\n');
            }
        }
    }
}

/// `1.234567890123e+00`, the exponent style of PETSc monitors.
pub fn format_norm(v: f64) -> String {
    let s = format!("{v:.12e}");
    match s.split_once('e') {
        Some((mant, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mant}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KspStats {
    pub solves: usize,
    pub iterations: usize,
}

pub type SharedKsp = Arc<Mutex<Ksp>>;

pub struct Ksp {
    prefix: String,
    ksp_type: KspType,
    pub rtol: f64,
    pub atol: f64,
    pub max_it: usize,
    pub restart: usize,
    pub orthogonalization: Orthogonalization,
    pub side: Side,
    pub richardson_scale: f64,
    pub error_if_not_converged: bool,
    pub initial_guess_nonzero: bool,
    pub compute_true_residual: bool,
    monitor: Option<MonitorSink>,
    depth: usize,
    pc: Box<dyn Preconditioner>,
    a: Option<OperatorRef>,
    pmat: Option<OperatorRef>,
    pc_ready: bool,
    stats: KspStats,
}

impl fmt::Debug for Ksp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ksp").field("prefix", &self.prefix).field("type", &self.ksp_type).field("pc", &self.pc).finish()
    }
}

impl Ksp {
    pub fn new(ksp_type: KspType) -> Ksp {
        Ksp {
            prefix: String::new(),
            ksp_type,
            rtol: 1e-5,
            atol: 1e-50,
            max_it: 10_000,
            restart: 30,
            orthogonalization: Orthogonalization::Classical,
            side: if ksp_type == KspType::Fgmres { Side::Right } else { Side::Left },
            richardson_scale: 1.0,
            error_if_not_converged: false,
            initial_guess_nonzero: false,
            compute_true_residual: false,
            monitor: None,
            depth: 0,
            pc: Box::new(NonePc::default()),
            a: None,
            pmat: None,
            pc_ready: false,
            stats: KspStats::default(),
        }
    }

    pub fn with_pc(mut self, pc: Box<dyn Preconditioner>) -> Self {
        self.pc = pc;
        self.pc_ready = false;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64, max_it: usize) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self.max_it = max_it;
        self
    }

    pub fn with_prefix(mut self, prefix: &str) -> Self {
        self.prefix = prefix.to_string();
        self
    }

    pub fn with_monitor(mut self, sink: MonitorSink) -> Self {
        self.monitor = Some(sink);
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn into_shared(self) -> SharedKsp {
        Arc::new(Mutex::new(self))
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn ksp_type(&self) -> KspType {
        self.ksp_type
    }

    pub fn pc(&self) -> &dyn Preconditioner {
        self.pc.as_ref()
    }

    pub fn stats(&self) -> KspStats {
        self.stats
    }

    pub fn operator(&self) -> Option<&OperatorRef> {
        self.a.as_ref()
    }

    /// Set the system operator and the matrix the preconditioner is built
    /// from. The preconditioner is (re)built on the next solve.
    pub fn set_operators(&mut self, a: OperatorRef, pmat: OperatorRef) {
        self.a = Some(a);
        self.pmat = Some(pmat);
        self.pc_ready = false;
    }

    pub fn set_up(&mut self) -> Result<()> {
        if self.pc_ready {
            return Ok(());
        }
        let (a, p) = match (&self.a, &self.pmat) {
            (Some(a), Some(p)) => (a.clone(), p.clone()),
            _ => return Err(Error::NotSetUp(format!("KSP {} has no operators", self.label()))),
        };
        self.pc.set_up(&a, &p).map_err(|e| self.wrap(e))?;
        self.pc_ready = true;
        Ok(())
    }

    /// Errors from a nested solver carry its prefix; the outermost one
    /// passes them through unchanged.
    fn wrap(&self, e: Error) -> Error {
        if self.prefix.is_empty() {
            e
        } else {
            Error::inner(&self.prefix, e)
        }
    }

    fn label(&self) -> String {
        if self.prefix.is_empty() {
            "(outer)".to_string()
        } else {
            self.prefix.clone()
        }
    }

    /// Monitored accumulation of solves and iterations in this KSP and all
    /// KSPs nested in its preconditioner, keyed by prefix.
    pub fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        out.insert(self.prefix.clone(), self.stats);
        self.pc.collect_stats(out);
    }

    pub fn reset_stats(&mut self) {
        self.stats = KspStats::default();
    }

    pub fn view(&self, v: &mut Viewer) {
        v.line(&format!("KSP Object: ({})", self.prefix));
        v.push();
        v.line(&format!("type: {}", self.ksp_type.name()));
        match self.ksp_type {
            KspType::Gmres | KspType::Fgmres => {
                let orth = match self.orthogonalization {
                    Orthogonalization::Classical => "classical",
                    Orthogonalization::Modified => "modified",
                };
                v.line(&format!("restart={}, orthogonalization: {orth} Gram-Schmidt", self.restart));
            }
            KspType::Richardson => v.line(&format!("damping factor={}", self.richardson_scale)),
            _ => {}
        }
        if self.ksp_type != KspType::Preonly {
            v.line(&format!("tolerances: rtol={:e}, atol={:e}, max_it={}", self.rtol, self.atol, self.max_it));
            let side = match self.side {
                Side::Left => "left",
                Side::Right => "right",
            };
            v.line(&format!("preconditioning side: {side}"));
        }
        self.pc.view(v);
        v.pop();
    }

    pub fn view_string(&self) -> String {
        let mut v = Viewer::new();
        self.view(&mut v);
        v.finish()
    }

    fn monitor(&self, it: usize, norm: f64) {
        if let Some(sink) = &self.monitor {
            let indent = "  ".repeat(self.depth);
            sink.line(&format!("{indent}{it:3} KSP Residual norm {}", format_norm(norm)));
        }
    }

    /// Solve `A x = b`. Unless `initial_guess_nonzero`, `x` is zeroed first.
    pub fn solve(&mut self, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
        self.set_up()?;
        let a = self.a.clone().expect("set up");
        if b.len() != a.nrows() || x.len() != a.ncols() {
            return Err(Error::ShapeMismatch { expected: a.nrows(), got: b.len() });
        }
        if !self.initial_guess_nonzero {
            x.iter_mut().for_each(|v| *v = 0.0);
        }
        if let (Some(sink), false) = (&self.monitor, self.prefix.is_empty()) {
            sink.line(&format!("{}Residual norms for {} solve.", "  ".repeat(self.depth), self.prefix));
        }
        let ns = a.nullspace().cloned();
        let mut rhs = b.to_vec();
        if let Some(ns) = &ns {
            ns.project(&mut rhs);
        }
        let ctx = SolveCtx { ksp: self, a: a.as_ref(), ns: ns.as_ref() };
        let result = match self.ksp_type {
            KspType::Cg => methods::cg(&ctx, &rhs, x),
            KspType::Gmres => methods::gmres(&ctx, &rhs, x, self.side == Side::Right, false),
            KspType::Fgmres => methods::gmres(&ctx, &rhs, x, true, true),
            KspType::Richardson => methods::richardson(&ctx, &rhs, x),
            KspType::Preonly => methods::preonly(&ctx, &rhs, x),
        };
        let mut report = result.map_err(|e| match e {
            e @ Error::InnerSolveFailed { .. } => e,
            e => self.wrap(e),
        })?;
        if let Some(ns) = &ns {
            ns.project(x);
        }
        self.stats.solves += 1;
        self.stats.iterations += report.iterations;
        if self.compute_true_residual {
            let mut r = vec![0.0; b.len()];
            a.apply(x, &mut r)?;
            r.iter_mut().zip(&rhs).for_each(|(ri, bi)| *ri = bi - *ri);
            report.true_residual_norm = Some(norm2(&r));
        }
        if !report.converged && self.error_if_not_converged {
            return Err(self.wrap(Error::DivergedMaxIts { max_it: self.max_it }));
        }
        Ok(report)
    }

    /// Solve with the transposed operator and preconditioner (preonly/richardson/gmres).
    pub fn solve_transpose(&mut self, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
        self.set_up()?;
        let a = self.a.clone().expect("set up");
        x.iter_mut().for_each(|v| *v = 0.0);
        match self.ksp_type {
            KspType::Preonly => {
                self.pc.apply_transpose(b, x)?;
                self.stats.solves += 1;
                self.stats.iterations += 1;
                Ok(SolveReport {
                    converged: true,
                    reason: ConvergedReason::Iterations,
                    iterations: 1,
                    residual_norm: f64::NAN,
                    true_residual_norm: None,
                    history: Vec::new(),
                })
            }
            _ => {
                let t = TransposeView { a: a.as_ref() };
                let pc = |r: &[f64], z: &mut [f64]| self.pc.apply_transpose(r, z);
                let ctx = SolveCtx { ksp: self, a: &t, ns: None };
                let report = methods::gmres_with(&ctx, &pc, b, x, false, false)?;
                self.stats.solves += 1;
                self.stats.iterations += report.iterations;
                Ok(report)
            }
        }
    }
}

/// Borrowed state of one solve.
pub(crate) struct SolveCtx<'a> {
    pub ksp: &'a Ksp,
    pub a: &'a dyn LinearOperator,
    pub ns: Option<&'a NullSpace>,
}

impl SolveCtx<'_> {
    pub fn tolerance(&self, r0: f64) -> f64 {
        (self.ksp.rtol * r0).max(self.ksp.atol)
    }

    pub fn monitor(&self, it: usize, norm: f64) {
        self.ksp.monitor(it, norm);
    }
}

#[derive(Debug)]
struct TransposeView<'a> {
    a: &'a dyn LinearOperator,
}

impl LinearOperator for TransposeView<'_> {
    fn nrows(&self) -> usize {
        self.a.ncols()
    }
    fn ncols(&self) -> usize {
        self.a.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.a.apply_transpose(x, y)
    }
    fn memory_footprint(&self) -> usize {
        0
    }
    fn flops_per_apply(&self) -> u64 {
        self.a.flops_per_apply()
    }
    fn describe(&self) -> String {
        format!("transpose of {}", self.a.describe())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_format_matches_petsc_style() {
        assert_eq!(format_norm(1.0), "1.000000000000e+00");
        assert_eq!(format_norm(0.000123), "1.230000000000e-04");
        assert_eq!(format_norm(12345.0), "1.234500000000e+04");
    }
}
