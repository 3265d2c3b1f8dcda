use super::{pressure_nullspace, taylor_hood, unit_mesh, NonlinearRun, Stopwatch};
use crate::error::Result;
use crate::fem::{BcSet, DirichletBC};
use crate::forms::{ProblemContext, ResidualForm, ResidualKind};
use crate::mesh::{MARKER_X0, MARKER_X1, MARKER_Y0, MARKER_Y1};
use crate::nonlinear::NewtonSolver;
use crate::options::{BuildCtx, OptionsDb};

/// Steady lid-driven cavity on the unit square: `u = (1, 0)` on `y = 1`,
/// no slip elsewhere. The side walls take the corner nodes of the lid.
#[derive(Debug, Clone, Copy)]
pub struct CavityProblem {
    pub n: usize,
    pub re: f64,
}

impl Default for CavityProblem {
    fn default() -> Self {
        CavityProblem { n: 8, re: 10.0 }
    }
}

pub fn solve_cavity(p: &CavityProblem, db: &OptionsDb, ctx: &BuildCtx) -> Result<NonlinearRun> {
    let mesh = unit_mesh(2, p.n)?;
    let space = taylor_hood(&mesh, 0)?;
    let bcs = BcSet::resolve(
        &space,
        &[
            DirichletBC::new(0, &[MARKER_Y1], |_, out| {
                out[0] = 1.0;
                out[1] = 0.0;
            }),
            DirichletBC::homogeneous(0, &[MARKER_X0, MARKER_X1, MARKER_Y0]),
        ],
    )?;
    let residual = ResidualForm::new(ResidualKind::NavierStokes { re: p.re }, space.clone())?;
    let context = ProblemContext::new().with_constant("Re", p.re);
    let ns = pressure_nullspace(&space)?;
    let clock = Stopwatch::start();
    let mut solver = NewtonSolver::from_options(residual, bcs, context, Some(ns), db, ctx)?;
    let mut x = vec![0.0; space.num_dofs()];
    let newton = solver.solve(&mut x)?;
    Ok(NonlinearRun {
        dofs: space.num_dofs(),
        newton,
        ksp_stats: solver.ksp_stats(),
        solution: x,
        space,
        seconds: clock.seconds(),
    })
}
