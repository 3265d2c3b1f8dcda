use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use compfem::drivers::{
    bench_matvec, solve_cavity, solve_poisson, solve_rayleigh_benard, BenchProblem, CavityProblem, NonlinearRun,
    PoissonProblem, RbProblem, BENCH_HEADER,
};
use compfem::krylov::format_norm;
use compfem::options::{help_text, BuildCtx, OptionsDb};
use compfem::Result;

/// Finite element experiments with runtime-configured solvers.
///
/// Solver options follow `--` (or come from `-o FILE`), e.g.
/// `compfem poisson --n 16 -- -ksp_type cg -pc_type jacobi`.
#[derive(Parser, Debug)]
#[command(name = "compfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// Options file(s), read in order before the command-line options.
    #[arg(short = 'o', long = "options-file")]
    options_file: Vec<PathBuf>,

    /// Solver options, PETSc style.
    #[arg(last = true, allow_hyphen_values = true)]
    options: Vec<String>,
}

impl SolverArgs {
    fn database(&self) -> Result<OptionsDb> {
        let mut db = OptionsDb::new();
        for path in &self.options_file {
            db.merge(&OptionsDb::parse_file(path)?);
        }
        db.extend_args(&self.options)?;
        Ok(db)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// -kappa Δu = f on the unit square or cube, u = 0 on the boundary.
    Poisson {
        /// Cells per side; a comma separated list runs each in turn.
        #[arg(long, value_delimiter = ',', default_value = "8")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Manufactured solution; reports the L2 error.
        #[arg(long)]
        mms: bool,
        /// One CSV row per mesh instead of a report.
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Steady lid-driven cavity, Taylor–Hood P2/P1, Newton.
    NavierStokes {
        #[arg(long, value_delimiter = ',', default_value = "8")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10.0)]
        re: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Boussinesq convection heated from the side, P2/P1/P1, Newton.
    RayleighBenard {
        #[arg(long, value_delimiter = ',', default_value = "8")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 200.0)]
        ra: f64,
        #[arg(long, default_value_t = 6.18)]
        pr: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Operator application throughput and memory, as CSV.
    BenchMatvec {
        /// poisson | rb
        #[arg(long, default_value = "poisson")]
        problem: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Comma separated degrees (for rb: the pressure degree).
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        degree: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Build the solver tree from the options and print it.
    View {
        /// Number of fields of the operator the tree will solve.
        #[arg(long)]
        fields: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// List the recognised solver options.
    OptionsHelp,
}

fn warn_unused(db: &OptionsDb) {
    let unused = db.unused();
    if !unused.is_empty() {
        eprintln!("WARNING! options set but never used:");
        for k in unused {
            eprintln!("  -{k}");
        }
    }
}

fn report_nonlinear(n: usize, run: &NonlinearRun) {
    println!("n = {n}");
    print!("{}", run.summary());
    let norms: Vec<String> = run.newton.residual_norms.iter().map(|&v| format_norm(v)).collect();
    println!("  residual norms: {}", norms.join(" "));
}

fn run(cli: Cli) -> Result<bool> {
    let ctx = BuildCtx::default();
    let mut converged = true;
    match cli.command {
        Command::Poisson { n, dim, degree, kappa, mms, table, solver } => {
            let db = solver.database()?;
            if db.contains("help") {
                print!("{}", help_text());
                return Ok(true);
            }
            if table {
                println!("n,dofs,iterations,converged,l2_error,setup_s,solve_s");
            }
            for &n in &n {
                let p = PoissonProblem { n, dim, degree, kappa, mms };
                let r = solve_poisson(&p, &db, &ctx)?;
                converged &= r.report.converged;
                let err = r.l2_error.map_or(String::from(""), |e| format!("{e:.6e}"));
                if table {
                    println!(
                        "{n},{},{},{},{err},{:.6},{:.6}",
                        r.dofs, r.report.iterations, r.report.converged, r.setup_seconds, r.solve_seconds
                    );
                } else {
                    if db.contains("ksp_view") {
                        print!("{}", r.view);
                    }
                    println!(
                        "n = {n}  dofs {}  iterations {}  reason {:?}  residual {}",
                        r.dofs,
                        r.report.iterations,
                        r.report.reason,
                        format_norm(r.report.true_residual_norm.unwrap_or(r.report.residual_norm))
                    );
                    if !err.is_empty() {
                        println!("  L2 error {err}");
                    }
                }
            }
            warn_unused(&db);
        }
        Command::NavierStokes { n, re, solver } => {
            let db = solver.database()?;
            for &n in &n {
                let r = solve_cavity(&CavityProblem { n, re }, &db, &ctx)?;
                report_nonlinear(n, &r);
            }
            warn_unused(&db);
        }
        Command::RayleighBenard { n, dim, ra, pr, solver } => {
            let db = solver.database()?;
            for &n in &n {
                let r = solve_rayleigh_benard(&RbProblem { n, dim, ra, pr }, &db, &ctx)?;
                report_nonlinear(n, &r);
            }
            warn_unused(&db);
        }
        Command::BenchMatvec { problem, dim, degree, n, reps } => {
            let problem = BenchProblem::parse(&problem)?;
            println!("{BENCH_HEADER}");
            for k in degree {
                for row in bench_matvec(problem, dim, k, n, reps)? {
                    println!("{}", row.csv());
                }
            }
        }
        Command::View { fields, solver } => {
            let db = solver.database()?;
            compfem::nonlinear::NewtonOptions::from_options(&db)?;
            let ksp = compfem::options::build_ksp(&db, "", fields, &ctx)?;
            print!("{}", ksp.view_string());
            warn_unused(&db);
        }
        Command::OptionsHelp => print!("{}", help_text()),
    }
    Ok(converged)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("linear solve did not converge");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
