#![allow(dead_code)]

use std::sync::Arc;

use compfem::fem::{BcSet, DirichletBC, FunctionSpace, MixedSpace};
use compfem::forms::{Form, FormKind, ProblemContext};
use compfem::linalg::{norm2, CsrMatrix};
use compfem::mesh::Mesh;
use compfem::operators::{AssembledOperator, ImplicitOperator, NullSpace, OperatorRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(1e-300)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn dense(rows: &[&[f64]]) -> OperatorRef {
    let mut t = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            if v != 0.0 {
                t.push((i, j, v));
            }
        }
    }
    Arc::new(AssembledOperator::new(CsrMatrix::from_triplets(rows.len(), rows[0].len(), &t).unwrap()))
}

pub fn square(n: usize) -> Arc<Mesh> {
    Arc::new(Mesh::unit_square(n).unwrap())
}

pub fn taylor_hood(mesh: &Arc<Mesh>) -> Arc<MixedSpace> {
    MixedSpace::new(vec![FunctionSpace::vector_lagrange(mesh, 2).unwrap(), FunctionSpace::lagrange(mesh, 1).unwrap()])
        .unwrap()
}

/// Implicit Stokes operator (unit Reynolds number) with no-slip walls and
/// the constant-pressure nullspace attached.
pub fn stokes(n: usize) -> (Arc<ImplicitOperator>, Arc<MixedSpace>) {
    let mesh = square(n);
    let space = taylor_hood(&mesh);
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let ctx = Arc::new(ProblemContext::new().with_constant("Re", 1.0));
    let form = Form::new(FormKind::Stokes { re: 1.0 }, space.clone(), ctx).unwrap();
    let ns = NullSpace::constant_on(space.num_dofs(), &space.field_index_set(1)).unwrap();
    let op = ImplicitOperator::new(Arc::new(form), Arc::new(bcs)).unwrap().with_nullspace(ns);
    (Arc::new(op), space)
}

/// A right-hand side consistent with the pressure nullspace.
pub fn consistent_rhs(op: &ImplicitOperator, seed: u64) -> Vec<f64> {
    use compfem::operators::LinearOperator;
    let mut r = rng(seed);
    let x = random_vec(&mut r, op.ncols());
    let mut b = vec![0.0; op.nrows()];
    op.apply(&x, &mut b).unwrap();
    b
}
