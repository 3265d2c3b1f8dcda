//! Browser front end. Every entry point takes plain numbers plus an options
//! listing and returns a JSON string; the page does the drawing.

use std::sync::Arc;

use compfem::drivers::{solve_poisson, solve_rayleigh_benard, PoissonProblem, RbProblem};
use compfem::fem::{BcSet, DirichletBC, FunctionSpace, MixedSpace};
use compfem::forms::{Form, FormKind, ProblemContext};
use compfem::krylov::{Ksp, KspType, MonitorSink};
use compfem::mesh::Mesh;
use compfem::operators::{ImplicitOperator, NullSpace, OperatorRef};
use compfem::options::{BuildCtx, OptionsDb};
use compfem::precond::{FieldSplitPc, LuPc, SchurFactType, SplitKind};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const CORPUS: &[(&str, &str)] = &[
    ("poisson_sor", include_str!("../../core/options/poisson_sor.opts")),
    ("poisson_schwarz", include_str!("../../core/options/poisson_schwarz.opts")),
    ("poisson_hypre", include_str!("../../core/options/poisson_hypre.opts")),
    ("rb_direct", include_str!("../../core/options/rb_direct.opts")),
    ("rb_iterative", include_str!("../../core/options/rb_iterative.opts")),
];

type Out = Result<String, String>;

fn parse(options: &str) -> Result<(OptionsDb, BuildCtx, Arc<std::sync::Mutex<String>>), String> {
    let db = OptionsDb::parse_str(options).map_err(|e| e.to_string())?;
    let (monitor, log) = MonitorSink::buffer();
    Ok((db, BuildCtx { monitor }, log))
}

pub fn corpus_text(name: &str) -> Option<&'static str> {
    CORPUS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// -Δu = 1 on the unit square; values at the (n+1)^2 vertices, row by row.
pub fn poisson_json(n: usize, degree: usize, options: &str) -> Out {
    let (db, ctx, log) = parse(options)?;
    let run =
        solve_poisson(&PoissonProblem { n, degree, ..Default::default() }, &db, &ctx).map_err(|e| e.to_string())?;
    let field = run.space.vertex_values(&run.solution, 0);
    let log = log.lock().unwrap().clone();
    Ok(json!({
        "dofs": run.dofs,
        "iterations": run.report.iterations,
        "converged": run.report.converged,
        "history": run.report.history,
        "grid": n + 1,
        "field": field,
        "view": run.view,
        "unused": db.unused(),
        "log": log,
    })
    .to_string())
}

/// Convection cell heated on the left wall: temperature and speed at the vertices.
pub fn rayleigh_benard_json(n: usize, ra: f64, options: &str) -> Out {
    let (db, ctx, log) = parse(options)?;
    let run =
        solve_rayleigh_benard(&RbProblem { n, ra, ..Default::default() }, &db, &ctx).map_err(|e| e.to_string())?;
    let space = &run.space;
    let values = |i: usize| &run.solution[space.offset(i)..space.offset(i) + space.field(i).num_dofs()];
    let temperature = space.field(2).vertex_values(values(2), 0);
    let (ux, uy) = (space.field(0).vertex_values(values(0), 0), space.field(0).vertex_values(values(0), 1));
    let speed: Vec<f64> = ux.iter().zip(&uy).map(|(a, b)| a.hypot(*b)).collect();
    let inner: Vec<Value> = ["fieldsplit_0_", "fieldsplit_1_"]
        .iter()
        .filter_map(|p| run.inner(p).map(|(total, avg)| json!({"prefix": p, "total": total, "average": avg})))
        .collect();
    let log = log.lock().unwrap().clone();
    Ok(json!({
        "dofs": run.dofs,
        "newton_iterations": run.newton.iterations,
        "linear_iterations": run.newton.linear_iterations,
        "residual_norms": run.newton.residual_norms,
        "inner": inner,
        "grid": n + 1,
        "temperature": temperature,
        "speed": speed,
        "unused": db.unused(),
        "log": log,
    })
    .to_string())
}

/// GMRES iterations on Stokes with each exact Schur factorisation:
/// the inner F and S solves are exact, so only the block structure counts.
pub fn schur_compare_json(n: usize) -> Out {
    let err = |e: compfem::error::Error| e.to_string();
    let mesh = Arc::new(Mesh::unit_square(n).map_err(err)?);
    let space = MixedSpace::new(vec![
        FunctionSpace::vector_lagrange(&mesh, 2).map_err(err)?,
        FunctionSpace::lagrange(&mesh, 1).map_err(err)?,
    ])
    .map_err(err)?;
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).map_err(err)?;
    let form = Form::new(FormKind::Stokes { re: 1.0 }, space.clone(), Arc::new(ProblemContext::new())).map_err(err)?;
    let ns = NullSpace::constant_on(space.num_dofs(), &space.field_index_set(1)).map_err(err)?;
    let op = ImplicitOperator::new(Arc::new(form), Arc::new(bcs)).map_err(err)?.with_nullspace(ns);
    let a: OperatorRef = Arc::new(op.assemble().map_err(err)?);
    // a right-hand side in the range: b = A x for a smooth x
    let x: Vec<f64> = (0..a.ncols()).map(|i| (0.37 * i as f64).sin()).collect();
    let mut b = vec![0.0; a.nrows()];
    a.apply(&x, &mut b).map_err(err)?;

    let mut rows = Vec::new();
    for (name, fact) in [
        ("diag", SchurFactType::Diag),
        ("lower", SchurFactType::Lower),
        ("upper", SchurFactType::Upper),
        ("full", SchurFactType::Full),
    ] {
        let f = Ksp::new(KspType::Preonly).with_pc(Box::new(LuPc::new(""))).into_shared();
        let s = Ksp::new(KspType::Gmres).with_tolerances(1e-12, 0.0, 1000).into_shared();
        s.lock().unwrap().restart = 500;
        let pc = FieldSplitPc::new("", SplitKind::Schur(fact), None, vec![f, s], None).map_err(err)?;
        let mut ksp = Ksp::new(KspType::Gmres).with_pc(Box::new(pc)).with_tolerances(1e-8, 0.0, 50);
        ksp.set_operators(a.clone(), a.clone());
        let rep = ksp.solve(&b, &mut vec![0.0; b.len()]).map_err(err)?;
        rows.push(json!({"fact": name, "iterations": rep.iterations, "history": rep.history}));
    }
    Ok(json!({"dofs": a.nrows(), "runs": rows}).to_string())
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn corpus(name: &str) -> Option<String> {
    corpus_text(name).map(str::to_owned)
}

#[wasm_bindgen]
pub fn poisson(n: usize, degree: usize, options: &str) -> Result<String, JsValue> {
    js(poisson_json(n, degree, options))
}

#[wasm_bindgen]
pub fn rayleigh_benard(n: usize, ra: f64, options: &str) -> Result<String, JsValue> {
    js(rayleigh_benard_json(n, ra, options))
}

#[wasm_bindgen]
pub fn schur_compare(n: usize) -> Result<String, JsValue> {
    js(schur_compare_json(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parsed(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn schwarz_beats_sor() {
        let sor = parsed(&poisson_json(8, 3, corpus_text("poisson_sor").unwrap()).unwrap());
        let sch = parsed(&poisson_json(8, 3, corpus_text("poisson_schwarz").unwrap()).unwrap());
        assert!(sch["iterations"].as_u64() < sor["iterations"].as_u64());
        assert_eq!(sch["field"].as_array().unwrap().len(), 81);
        assert!(sch["unused"].as_array().unwrap().is_empty());
        // the maximum of -Δu = 1 sits in the middle, near 0.0737
        let mid = sch["field"][40].as_f64().unwrap();
        assert!((mid - 0.0737).abs() < 1e-3, "{mid}");
    }

    #[test]
    fn convection_cell_solves() {
        let r = parsed(&rayleigh_benard_json(6, 200.0, corpus_text("rb_iterative").unwrap()).unwrap());
        assert!(r["newton_iterations"].as_u64().unwrap() <= 5);
        let t = r["temperature"].as_array().unwrap();
        assert_eq!(t.len(), 49);
        assert!((t[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r["inner"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn schur_counts_follow_the_factorisation() {
        let r = parsed(&schur_compare_json(3).unwrap());
        let its: Vec<u64> = r["runs"].as_array().unwrap().iter().map(|x| x["iterations"].as_u64().unwrap()).collect();
        assert!(its[0] <= 3 && its[1] <= 2 && its[2] <= 2 && its[3] <= 1, "{its:?}");
    }

    #[test]
    fn bad_options_are_reported() {
        let e = poisson_json(4, 1, "-pc_type frobnicate").unwrap_err();
        assert!(e.contains("frobnicate"), "{e}");
    }
}
