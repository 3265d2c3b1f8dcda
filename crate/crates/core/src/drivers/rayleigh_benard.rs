use super::{all_walls, pressure_nullspace, taylor_hood, unit_mesh, NonlinearRun, Stopwatch};
use crate::error::Result;
use crate::fem::{BcSet, DirichletBC};
use crate::forms::{ProblemContext, ResidualForm, ResidualKind};
use crate::mesh::{MARKER_X0, MARKER_X1};
use crate::nonlinear::NewtonSolver;
use crate::options::{BuildCtx, OptionsDb};

/// Boussinesq convection in the unit box: no slip everywhere, `T = 1` on
/// `x = 0`, `T = 0` on `x = 1`, insulated elsewhere. Fields are ordered
/// velocity (P2), pressure (P1), temperature (P1).
#[derive(Debug, Clone, Copy)]
pub struct RbProblem {
    pub n: usize,
    pub dim: usize,
    pub ra: f64,
    pub pr: f64,
}

impl Default for RbProblem {
    fn default() -> Self {
        RbProblem { n: 8, dim: 2, ra: 200.0, pr: 6.18 }
    }
}

pub fn solve_rayleigh_benard(p: &RbProblem, db: &OptionsDb, ctx: &BuildCtx) -> Result<NonlinearRun> {
    let mesh = unit_mesh(p.dim, p.n)?;
    let space = taylor_hood(&mesh, 1)?;
    let bcs = BcSet::resolve(
        &space,
        &[
            DirichletBC::homogeneous(0, &all_walls(p.dim)),
            DirichletBC::new(2, &[MARKER_X0], |_, out| out[0] = 1.0),
            DirichletBC::homogeneous(2, &[MARKER_X1]),
        ],
    )?;
    let residual = ResidualForm::new(ResidualKind::RayleighBenard { ra: p.ra, pr: p.pr }, space.clone())?;
    // the momentum equation is scaled to unit viscosity, so the Schur
    // approximations see Re = 1
    let context = ProblemContext::new().with_constant("Re", 1.0).with_constant("Ra", p.ra).with_constant("Pr", p.pr);
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
