//! The experiments: a Poisson solve, a lid-driven cavity, Rayleigh–Bénard
//! convection and the operator-application benchmark. Drivers set up
//! meshes, spaces and boundary conditions; every solver choice comes from
//! the options database.

pub mod bench;
pub mod navier_stokes;
pub mod poisson;
pub mod rayleigh_benard;

use std::sync::Arc;
use std::time::Instant;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::fem::{FunctionSpace, MixedSpace};
use crate::krylov::KspStats;
use crate::mesh::Mesh;
use crate::nonlinear::NewtonReport;
use crate::operators::NullSpace;

pub use bench::{bench_matvec, BenchProblem, BenchRow, BENCH_HEADER};
pub use navier_stokes::{solve_cavity, CavityProblem};
pub use poisson::{solve_poisson, PoissonProblem, PoissonRun};
pub use rayleigh_benard::{solve_rayleigh_benard, RbProblem};

pub(crate) fn unit_mesh(dim: usize, n: usize) -> Result<Arc<Mesh>> {
    Ok(Arc::new(match dim {
        2 => Mesh::unit_square(n)?,
        3 => Mesh::unit_cube(n)?,
        _ => return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}"))),
    }))
}

/// All six (or four) markers of the unit box.
pub(crate) fn all_walls(dim: usize) -> Vec<u32> {
    (1..=2 * dim as u32).collect()
}

/// Taylor–Hood velocity and pressure, plus any extra scalar P1 fields.
pub(crate) fn taylor_hood(mesh: &Arc<Mesh>, extra: usize) -> Result<Arc<MixedSpace>> {
    let mut fields = vec![FunctionSpace::vector_lagrange(mesh, 2)?, FunctionSpace::lagrange(mesh, 1)?];
    for _ in 0..extra {
        fields.push(FunctionSpace::lagrange(mesh, 1)?);
    }
    MixedSpace::new(fields)
}

/// Constants on the pressure field (field 1).
pub(crate) fn pressure_nullspace(space: &MixedSpace) -> Result<NullSpace> {
    NullSpace::constant_on(space.num_dofs(), &space.field_index_set(1))
}

/// Outcome of a Newton-driven PDE solve.
#[derive(Debug, Clone)]
pub struct NonlinearRun {
    pub dofs: usize,
    pub newton: NewtonReport,
    /// Accumulated solves and iterations of every KSP in the tree, by prefix.
    pub ksp_stats: IndexMap<String, KspStats>,
    pub solution: Vec<f64>,
    pub space: Arc<MixedSpace>,
    pub seconds: f64,
}

impl NonlinearRun {
    /// Totals and per-solve average for the KSP at `prefix`.
    pub fn inner(&self, prefix: &str) -> Option<(usize, f64)> {
        self.ksp_stats.get(prefix).map(|s| (s.iterations, s.iterations as f64 / s.solves.max(1) as f64))
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "dofs {}  newton iterations {}  krylov iterations {}  time {:.3}s\n",
            self.dofs, self.newton.iterations, self.newton.linear_iterations, self.seconds
        );
        for (prefix, st) in &self.ksp_stats {
            if prefix.is_empty() {
                continue;
            }
            s.push_str(&format!(
                "  {prefix:<28} solves {:>5}  iterations {:>6}  ({:.1} per solve)\n",
                st.solves,
                st.iterations,
                st.iterations as f64 / st.solves.max(1) as f64
            ));
        }
        s
    }
}

/// Wall clock; reads zero on `wasm32-unknown-unknown`, which has no `Instant`.
pub(crate) struct Stopwatch(Option<Instant>);

impl Stopwatch {
    pub fn start() -> Stopwatch {
        Stopwatch(if cfg!(all(target_arch = "wasm32", target_os = "unknown")) { None } else { Some(Instant::now()) })
    }

    pub fn seconds(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}
