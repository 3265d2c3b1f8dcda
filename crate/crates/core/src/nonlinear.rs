//! Newton's method with full steps, configured from the options database.

use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::fem::BcSet;
use crate::forms::{assemble_residual, ProblemContext, ResidualForm};
use crate::krylov::{format_norm, Ksp, KspStats, MonitorSink, SolveReport};
use crate::linalg::norm2;
use crate::operators::{ImplicitOperator, NullSpace, OperatorRef};
use crate::options::{build_ksp, BuildCtx, OptionsDb};

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Sum of outer Krylov iterations over all steps.
    pub linear_iterations: usize,
    /// `|F|` before each step and after the last.
    pub residual_norms: Vec<f64>,
    pub linear_reports: Vec<SolveReport>,
}

pub struct NewtonSolver {
    residual: ResidualForm,
    bcs: Arc<BcSet>,
    homogeneous: Arc<BcSet>,
    context: ProblemContext,
    nullspace: Option<NullSpace>,
    ksp: Ksp,
    pub rtol: f64,
    pub atol: f64,
    pub max_it: usize,
    mat_matfree: bool,
    pmat_matfree: bool,
    monitor: Option<MonitorSink>,
}

impl std::fmt::Debug for NewtonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NewtonSolver")
            .field("residual", self.residual.kind())
            .field("rtol", &self.rtol)
            .field("max_it", &self.max_it)
            .finish()
    }
}

/// `-mat_type` and `-pmat_type` (which defaults to the former), as matfree flags.
pub fn matrix_types(db: &OptionsDb) -> Result<(bool, bool)> {
    let mat = db.get_enum("", "mat_type", &["aij", "matfree"], "aij")?;
    let pmat = db.get_enum("", "pmat_type", &["aij", "matfree"], &mat)?;
    Ok((mat == "matfree", pmat == "matfree"))
}

/// The operator and preconditioning matrix for one linear solve: the
/// implicit operator itself, or its assembly, as the flags ask.
pub fn operator_pair(
    imp: ImplicitOperator,
    mat_matfree: bool,
    pmat_matfree: bool,
) -> Result<(OperatorRef, OperatorRef)> {
    let imp: OperatorRef = Arc::new(imp);
    let assembled: Option<OperatorRef> = if !mat_matfree || !pmat_matfree {
        Some(Arc::new(imp.as_implicit().expect("implicit").assemble()?))
    } else {
        None
    };
    let pick = |matfree: bool| match (&assembled, matfree) {
        (Some(a), false) => a.clone(),
        _ => imp.clone(),
    };
    Ok((pick(mat_matfree), pick(pmat_matfree)))
}

/// The nonlinear-level settings: `-snes_*`, `-mat_type`, `-pmat_type`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_it: usize,
    pub monitor: bool,
    pub mat_matfree: bool,
    pub pmat_matfree: bool,
}

impl NewtonOptions {
    pub fn from_options(db: &OptionsDb) -> Result<NewtonOptions> {
        db.get_enum("", "snes_type", &["newtonls"], "newtonls")?;
        db.get_enum("", "snes_linesearch_type", &["basic"], "basic")?;
        let (mat_matfree, pmat_matfree) = matrix_types(db)?;
        Ok(NewtonOptions {
            rtol: db.get_real("", "snes_rtol", 1e-8)?,
            atol: db.get_real("", "snes_atol", 1e-50)?,
            max_it: db.get_int("", "snes_max_it", 50)?,
            monitor: db.get_bool("", "snes_monitor", false)?,
            mat_matfree,
            pmat_matfree,
        })
    }
}

impl NewtonSolver {
    /// `bcs` carries the (possibly inhomogeneous) boundary values; the
    /// linear solver is built from the unprefixed options in `db`.
    pub fn from_options(
        residual: ResidualForm,
        bcs: BcSet,
        context: ProblemContext,
        nullspace: Option<NullSpace>,
        db: &OptionsDb,
        ctx: &BuildCtx,
    ) -> Result<NewtonSolver> {
        let o = NewtonOptions::from_options(db)?;
        let ksp = build_ksp(db, "", Some(residual.space().num_fields()), ctx)?;
        let homogeneous = Arc::new(bcs.homogenized());
        Ok(NewtonSolver {
            residual,
            bcs: Arc::new(bcs),
            homogeneous,
            context,
            nullspace,
            ksp,
            rtol: o.rtol,
            atol: o.atol,
            max_it: o.max_it,
            mat_matfree: o.mat_matfree,
            pmat_matfree: o.pmat_matfree,
            monitor: o.monitor.then(|| ctx.monitor.clone()),
        })
    }

    pub fn ksp(&self) -> &Ksp {
        &self.ksp
    }

    /// Iteration counts of every KSP in the tree, keyed by prefix.
    pub fn ksp_stats(&self) -> IndexMap<String, KspStats> {
        let mut out = IndexMap::new();
        self.ksp.collect_stats(&mut out);
        out
    }

    fn operators(&self, state: &[f64]) -> Result<(OperatorRef, OperatorRef)> {
        let form = Arc::new(self.residual.jacobian(Arc::new(state.to_vec()), &self.context)?);
        let mut imp = ImplicitOperator::new(form, self.homogeneous.clone())?;
        if let Some(ns) = &self.nullspace {
            imp = imp.with_nullspace(ns.clone());
        }
        operator_pair(imp, self.mat_matfree, self.pmat_matfree)
    }

    fn monitor(&self, it: usize, norm: f64) {
        if let Some(m) = &self.monitor {
            m.line(&format!("{it:3} SNES Function norm {}", format_norm(norm)));
        }
    }

    /// Solve `F(x) = 0` starting from `x`, which is overwritten. Boundary
    /// values are imposed on the initial guess; corrections vanish there.
    pub fn solve(&mut self, x: &mut [f64]) -> Result<NewtonReport> {
        let n = self.residual.space().num_dofs();
        if x.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: x.len() });
        }
        self.bcs.apply_values(x);
        if let Some(ns) = &self.nullspace {
            ns.project(x);
        }
        let mut f = assemble_residual(&self.residual, x, &self.bcs)?;
        let mut norm = norm2(&f);
        let tol = (self.rtol * norm).max(self.atol);
        let mut report = NewtonReport {
            iterations: 0,
            linear_iterations: 0,
            residual_norms: vec![norm],
            linear_reports: Vec::new(),
        };
        self.monitor(0, norm);
        let mut delta = vec![0.0; n];
        while norm > tol {
            if !norm.is_finite() {
                return Err(Error::DivergedNaN { iteration: report.iterations });
            }
            if report.iterations == self.max_it {
                return Err(Error::NewtonDivergedMaxIts { max_it: self.max_it, norm });
            }
            let (a, p) = self.operators(x)?;
            self.ksp.set_operators(a, p);
            f.iter_mut().for_each(|v| *v = -*v);
            delta.iter_mut().for_each(|v| *v = 0.0);
            let lin = self.ksp.solve(&f, &mut delta)?;
            report.iterations += 1;
            report.linear_iterations += lin.iterations;
            if !lin.converged {
                return Err(Error::LinearSolveFailed { step: report.iterations, report: Box::new(lin) });
            }
            report.linear_reports.push(lin);
            x.iter_mut().zip(&delta).for_each(|(xi, d)| *xi += d);
            if let Some(ns) = &self.nullspace {
                ns.project(x);
            }
            f = assemble_residual(&self.residual, x, &self.bcs)?;
            norm = norm2(&f);
            report.residual_norms.push(norm);
            self.monitor(report.iterations, norm);
        }
        Ok(report)
    }
}
