use std::f64::consts::PI;
use std::sync::Arc;

use super::{all_walls, unit_mesh, Stopwatch};
use crate::error::Result;
use crate::fem::{BcSet, DirichletBC, FunctionSpace, MixedSpace};
use crate::forms::{assemble_residual, l2_error, Forcing, ProblemContext, ResidualForm, ResidualKind};
use crate::krylov::SolveReport;
use crate::nonlinear::{matrix_types, operator_pair};
use crate::operators::ImplicitOperator;
use crate::options::{build_ksp, BuildCtx, OptionsDb};

#[derive(Debug, Clone, Copy)]
pub struct PoissonProblem {
    pub n: usize,
    pub dim: usize,
    pub degree: usize,
    pub kappa: f64,
    /// Manufactured solution `prod sin(pi x_i)` instead of unit forcing.
    pub mms: bool,
}

impl Default for PoissonProblem {
    fn default() -> Self {
        PoissonProblem { n: 8, dim: 2, degree: 1, kappa: 1.0, mms: false }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonRun {
    pub dofs: usize,
    pub report: SolveReport,
    pub l2_error: Option<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub solution: Vec<f64>,
    pub space: Arc<FunctionSpace>,
    /// Rendered solver tree after setup.
    pub view: String,
}

fn exact(x: &[f64]) -> f64 {
    x.iter().map(|&xi| (PI * xi).sin()).product()
}

/// `-kappa Δu = f` on the unit box with `u = 0` on the boundary.
pub fn solve_poisson(p: &PoissonProblem, db: &OptionsDb, ctx: &BuildCtx) -> Result<PoissonRun> {
    let mesh = unit_mesh(p.dim, p.n)?;
    let fs = FunctionSpace::lagrange(&mesh, p.degree)?;
    let space = MixedSpace::single(fs.clone());
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &all_walls(p.dim))])?;
    let forcing: Forcing = if p.mms {
        let scale = p.kappa * p.dim as f64 * PI * PI;
        Arc::new(move |x: &[f64]| scale * exact(x))
    } else {
        Arc::new(|_: &[f64]| 1.0)
    };
    let residual = ResidualForm::new(ResidualKind::Poisson { kappa: p.kappa, forcing }, space.clone())?;
    let n = space.num_dofs();

    let clock = Stopwatch::start();
    let base = ProblemContext::new();
    let form = Arc::new(residual.jacobian(Arc::new(vec![0.0; n]), &base)?);
    let (mat_matfree, pmat_matfree) = matrix_types(db)?;
    let (a, pmat) = operator_pair(ImplicitOperator::new(form, Arc::new(bcs.clone()))?, mat_matfree, pmat_matfree)?;
    let mut ksp = build_ksp(db, "", Some(1), ctx)?;
    ksp.set_operators(a, pmat);
    ksp.set_up()?;
    let setup_seconds = clock.seconds();

    // u = 0 is the lifting, so b = -F(0)
    let clock = Stopwatch::start();
    let b: Vec<f64> = assemble_residual(&residual, &vec![0.0; n], &bcs)?.iter().map(|v| -v).collect();
    let mut x = vec![0.0; n];
    let report = ksp.solve(&b, &mut x)?;
    let solve_seconds = clock.seconds();

    let l2_error = if p.mms { Some(l2_error(&fs, &x, |pt, out| out[0] = exact(pt))?) } else { None };
    Ok(PoissonRun {
        dofs: n,
        report,
        l2_error,
        setup_seconds,
        solve_seconds,
        solution: x,
        space: fs,
        view: ksp.view_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_jacobi_converges_and_matches_direct() {
        let p = PoissonProblem { n: 6, degree: 2, ..Default::default() };
        let it = solve_poisson(
            &p,
            &OptionsDb::parse_args(["-ksp_type", "cg", "-pc_type", "jacobi", "-ksp_rtol", "1e-12"]).unwrap(),
            &BuildCtx::default(),
        )
        .unwrap();
        let direct = solve_poisson(
            &p,
            &OptionsDb::parse_args(["-ksp_type", "preonly", "-pc_type", "lu"]).unwrap(),
            &BuildCtx::default(),
        )
        .unwrap();
        assert!(it.report.converged);
        let gap = it.solution.iter().zip(&direct.solution).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "{gap}");
        // the discrete max of u for unit forcing sits near 0.0737
        let peak = direct.solution.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.0737).abs() < 2e-3, "{peak}");
    }
}
