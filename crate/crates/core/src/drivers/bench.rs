use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{all_walls, unit_mesh};
use crate::error::{Error, Result};
use crate::fem::{BcSet, DirichletBC, FunctionSpace, MixedSpace};
use crate::forms::{Form, FormKind, ProblemContext, ResidualForm, ResidualKind};
use crate::operators::{ImplicitOperator, LinearOperator};

pub const BENCH_HEADER: &str = "problem,dim,degree,dofs,mode,dofs_per_sec,bytes_per_dof,flops_per_apply";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchProblem {
    /// Scalar Laplacian on P_k.
    Poisson,
    /// Rayleigh–Bénard Jacobian on P_{k+1}/P_k/P_k at a random state.
    RayleighBenard,
}

impl BenchProblem {
    pub fn parse(s: &str) -> Result<BenchProblem> {
        match s {
            "poisson" => Ok(BenchProblem::Poisson),
            "rb" => Ok(BenchProblem::RayleighBenard),
            _ => {
                Err(Error::UnknownType { kind: "benchmark problem", name: s.to_string(), known: vec!["poisson", "rb"] })
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchProblem::Poisson => "poisson",
            BenchProblem::RayleighBenard => "rb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub problem: &'static str,
    pub dim: usize,
    pub degree: usize,
    pub dofs: usize,
    pub mode: &'static str,
    pub dofs_per_sec: f64,
    pub bytes_per_dof: f64,
    pub flops_per_apply: u64,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6e},{:.3},{}",
            self.problem,
            self.dim,
            self.degree,
            self.dofs,
            self.mode,
            self.dofs_per_sec,
            self.bytes_per_dof,
            self.flops_per_apply
        )
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn time_reps(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64().max(1e-12));
    }
    Ok(median(times))
}

/// The operator the benchmark applies.
pub fn bench_operator(problem: BenchProblem, dim: usize, degree: usize, n: usize) -> Result<ImplicitOperator> {
    let mesh = unit_mesh(dim, n)?;
    match problem {
        BenchProblem::Poisson => {
            let space = MixedSpace::single(FunctionSpace::lagrange(&mesh, degree)?);
            let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &all_walls(dim))])?;
            let form = Form::new(FormKind::Stiffness { kappa: 1.0 }, space, Arc::new(ProblemContext::new()))?;
            ImplicitOperator::new(Arc::new(form), Arc::new(bcs))
        }
        BenchProblem::RayleighBenard => {
            let space = MixedSpace::new(vec![
                FunctionSpace::vector_lagrange(&mesh, degree + 1)?,
                FunctionSpace::lagrange(&mesh, degree)?,
                FunctionSpace::lagrange(&mesh, degree)?,
            ])?;
            let bcs = BcSet::resolve(
                &space,
                &[DirichletBC::homogeneous(0, &all_walls(dim)), DirichletBC::homogeneous(2, &[1, 2])],
            )?;
            let res = ResidualForm::new(ResidualKind::RayleighBenard { ra: 200.0, pr: 6.18 }, space.clone())?;
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let state: Vec<f64> = (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let form = res.jacobian(Arc::new(state), &ProblemContext::new())?;
            ImplicitOperator::new(Arc::new(form), Arc::new(bcs))
        }
    }
}

/// Throughput of matrix-free application, CSR matvec and assembly, `reps`
/// timings each (median reported). No rows for `reps == 0`.
pub fn bench_matvec(problem: BenchProblem, dim: usize, degree: usize, n: usize, reps: usize) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Ok(Vec::new());
    }
    let imp = bench_operator(problem, dim, degree, n)?;
    let dofs = imp.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; dofs];

    let t_assembly = time_reps(reps, || imp.assemble_csr().map(|_| ()))?;
    let asm = imp.assemble()?;
    let t_matfree = time_reps(reps, || imp.apply(&x, &mut y))?;
    let t_csr = time_reps(reps, || asm.apply(&x, &mut y))?;

    let row = |mode, secs: f64, bytes: usize, flops| BenchRow {
        problem: problem.name(),
        dim,
        degree,
        dofs,
        mode,
        dofs_per_sec: dofs as f64 / secs,
        bytes_per_dof: bytes as f64 / dofs as f64,
        flops_per_apply: flops,
    };
    Ok(vec![
        row("assembled", t_csr, asm.memory_footprint(), asm.flops_per_apply()),
        row("matfree", t_matfree, imp.memory_footprint(), imp.flops_per_apply()),
        row("assembly", t_assembly, asm.memory_footprint(), 0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reps_gives_no_rows() {
        assert!(bench_matvec(BenchProblem::Poisson, 2, 2, 4, 0).unwrap().is_empty());
    }

    #[test]
    fn rows_are_well_formed() {
        let rows = bench_matvec(BenchProblem::RayleighBenard, 2, 1, 3, 2).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.csv().split(',').count(), BENCH_HEADER.split(',').count());
            assert!(r.dofs_per_sec > 0.0 && r.bytes_per_dof > 0.0);
        }
    }
}
