mod common;

use std::sync::Arc;

use common::*;
use compfem::error::Error;
use compfem::fem::{BcSet, DirichletBC, FunctionSpace, MixedSpace};
use compfem::forms::{
    assemble_matrix, assemble_residual, jacobian_check, Form, FormKind, ProblemContext, ResidualForm, ResidualKind,
};
use compfem::linalg::{dot, norm2, CsrMatrix};
use compfem::mesh::Mesh;
use compfem::operators::{match_fields, AssembledOperator, ImplicitOperator, IndexSet, LinearOperator};

fn rb_space(mesh: &Arc<Mesh>) -> Arc<MixedSpace> {
    MixedSpace::new(vec![
        FunctionSpace::vector_lagrange(mesh, 2).unwrap(),
        FunctionSpace::lagrange(mesh, 1).unwrap(),
        FunctionSpace::lagrange(mesh, 1).unwrap(),
    ])
    .unwrap()
}

fn apply(op: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; op.nrows()];
    op.apply(x, &mut y).unwrap();
    y
}

#[test]
fn rb_velocity_pressure_block_is_the_ns_jacobian() {
    let mesh = square(3);
    let rb = rb_space(&mesh);
    let ns = taylor_hood(&mesh);
    let mut r = rng(21);
    let state = random_vec(&mut r, rb.num_dofs());

    let rb_bcs =
        BcSet::resolve(&rb, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4]), DirichletBC::homogeneous(2, &[1, 2])])
            .unwrap();
    let rb_res = ResidualForm::new(ResidualKind::RayleighBenard { ra: 200.0, pr: 6.18 }, rb.clone()).unwrap();
    let rb_jac = ImplicitOperator::new(
        Arc::new(rb_res.jacobian(Arc::new(state.clone()), &ProblemContext::new()).unwrap()),
        Arc::new(rb_bcs),
    )
    .unwrap();

    // the NS unknowns are a prefix of the RB ordering
    let nsn = ns.num_dofs();
    let ns_bcs = BcSet::resolve(&ns, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let ns_res = ResidualForm::new(ResidualKind::NavierStokes { re: 1.0 }, ns.clone()).unwrap();
    let ns_jac = ImplicitOperator::new(
        Arc::new(ns_res.jacobian(Arc::new(state[..nsn].to_vec()), &ProblemContext::new()).unwrap()),
        Arc::new(ns_bcs),
    )
    .unwrap();

    let up = IndexSet::concat(&[&rb.field_index_set(0), &rb.field_index_set(1)]);
    let sub = rb_jac.extract_sub(&up, &up).unwrap();
    assert_eq!(sub.nrows(), nsn);
    for _ in 0..5 {
        let x = random_vec(&mut r, nsn);
        let (a, b) = (apply(sub.as_ref(), &x), apply(&ns_jac, &x));
        assert!(rel_diff(&a, &b) < 1e-12, "{}", rel_diff(&a, &b));
    }
}

#[test]
fn ns_divergence_block_matches_the_assembled_submatrix() {
    let mesh = square(3);
    let space = taylor_hood(&mesh);
    let bcs = Arc::new(BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap());
    let mut r = rng(22);
    let state = random_vec(&mut r, space.num_dofs());
    let res = ResidualForm::new(ResidualKind::NavierStokes { re: 10.0 }, space.clone()).unwrap();
    let jac =
        ImplicitOperator::new(Arc::new(res.jacobian(Arc::new(state), &ProblemContext::new()).unwrap()), bcs).unwrap();
    let full = jac.assemble_csr().unwrap();
    let (u, p) = (space.field_index_set(0), space.field_index_set(1));
    let b = full.submatrix(&p, &u);
    let sub = jac.extract_sub(&p, &u).unwrap();
    assert_eq!((sub.nrows(), sub.ncols()), (p.len(), u.len()));
    for _ in 0..5 {
        let x = random_vec(&mut r, u.len());
        let mut y = vec![0.0; p.len()];
        b.matvec(&x, &mut y);
        assert!(rel_diff(&apply(sub.as_ref(), &x), &y) < 1e-12);
        // and the transpose
        let z = random_vec(&mut r, p.len());
        let mut t1 = vec![0.0; u.len()];
        let mut t2 = vec![0.0; u.len()];
        sub.apply_transpose(&z, &mut t1).unwrap();
        b.matvec_transpose(&z, &mut t2);
        assert!(rel_diff(&t1, &t2) < 1e-12);
    }
}

#[test]
fn full_extraction_is_the_original_operator() {
    let (op, space) = stokes(2);
    let all = IndexSet::range(0, space.num_dofs());
    let sub = op.extract_sub(&all, &all).unwrap();
    let x = random_vec(&mut rng(23), space.num_dofs());
    assert!(rel_diff(&apply(sub.as_ref(), &x), &apply(op.as_ref(), &x)) < 1e-14);
}

#[test]
fn field_matching_examples() {
    let fields = vec![IndexSet::range(0, 8), IndexSet::range(8, 12), IndexSet::range(12, 20)];
    assert_eq!(match_fields(&IndexSet::range(8, 20), &fields).unwrap(), vec![1, 2]);
    assert_eq!(match_fields(&IndexSet::range(0, 20), &fields).unwrap(), vec![0, 1, 2]);
    assert!(matches!(match_fields(&IndexSet::range(2, 5), &fields), Err(Error::NoFieldMatch)));
}

#[test]
fn ns_jacobian_at_rest_is_stokes() {
    let mesh = square(3);
    let space = taylor_hood(&mesh);
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let res = ResidualForm::new(ResidualKind::NavierStokes { re: 7.0 }, space.clone()).unwrap();
    let jac = res.jacobian(Arc::new(vec![0.0; space.num_dofs()]), &ProblemContext::new()).unwrap();
    let stokes = Form::new(FormKind::Stokes { re: 7.0 }, space.clone(), Arc::new(ProblemContext::new())).unwrap();
    let all = [0, 1];
    let a = assemble_matrix(&jac, &all, &all, &bcs).unwrap().to_dense();
    let b = assemble_matrix(&stokes, &all, &all, &bcs).unwrap().to_dense();
    assert!((a - b).abs().max() < 1e-13);
}

#[test]
fn random_csr_adjoint_identity() {
    let mut r = rng(24);
    use rand::Rng;
    let (m, n) = (37, 23);
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if r.gen_bool(0.2) {
                t.push((i, j, r.gen_range(-1.0..1.0)));
            }
        }
    }
    let a = AssembledOperator::new(CsrMatrix::from_triplets(m, n, &t).unwrap());
    let dense = a.csr().to_dense();
    for _ in 0..100 {
        let x = random_vec(&mut r, n);
        let y = random_vec(&mut r, m);
        let ax = apply(&a, &x);
        let mut aty = vec![0.0; n];
        a.apply_transpose(&y, &mut aty).unwrap();
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        assert!((lhs - rhs).abs() <= 1e-12 * (norm2(&ax) * norm2(&y)).max(1e-300));
        let oracle = &dense * nalgebra::DVector::from_vec(x.clone());
        assert!(max_abs_diff(&ax, oracle.as_slice()) < 1e-13);
    }
}

#[test]
fn implicit_p3_poisson_matches_assembled() {
    let mesh = square(4);
    let space = MixedSpace::single(FunctionSpace::lagrange(&mesh, 3).unwrap());
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let form = Form::new(FormKind::Stiffness { kappa: 2.5 }, space.clone(), Arc::new(ProblemContext::new())).unwrap();
    let imp = ImplicitOperator::new(Arc::new(form), Arc::new(bcs)).unwrap();
    let asm = imp.assemble().unwrap();
    let mut r = rng(25);
    for _ in 0..5 {
        let x = random_vec(&mut r, space.num_dofs());
        assert!(rel_diff(&apply(&imp, &x), &apply(&asm, &x)) < 1e-12);
    }
    assert_eq!(apply(&imp, &vec![0.0; space.num_dofs()]), vec![0.0; space.num_dofs()]);
}

#[test]
fn reassembly_tracks_the_linearisation_state() {
    let mesh = square(3);
    let space = taylor_hood(&mesh);
    let bcs = Arc::new(BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap());
    let res = ResidualForm::new(ResidualKind::NavierStokes { re: 10.0 }, space.clone()).unwrap();
    let mut r = rng(26);
    let s1 = random_vec(&mut r, space.num_dofs());
    let s2 = random_vec(&mut r, space.num_dofs());
    let j1 = ImplicitOperator::new(Arc::new(res.jacobian(Arc::new(s1), &ProblemContext::new()).unwrap()), bcs.clone())
        .unwrap();
    let j2 = ImplicitOperator::new(Arc::new(res.jacobian(Arc::new(s2), &ProblemContext::new()).unwrap()), bcs).unwrap();
    let (a1, a2) = (j1.assemble_csr().unwrap().to_dense(), j2.assemble_csr().unwrap().to_dense());
    assert!((&a1 - &a2).abs().max() > 1e-3);
    assert!((j2.assemble_csr().unwrap().to_dense() - a2).abs().max() == 0.0);
}

#[test]
fn stiffness_and_mass_are_spd_off_the_boundary() {
    let mesh = square(4);
    let space = MixedSpace::single(FunctionSpace::lagrange(&mesh, 2).unwrap());
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let free = IndexSet::new((0..space.num_dofs()).filter(|&i| !bcs.is_constrained(i)).collect());
    for kind in [FormKind::Stiffness { kappa: 1.0 }, FormKind::Mass { c: 1.0 }] {
        let form = Form::new(kind, space.clone(), Arc::new(ProblemContext::new())).unwrap();
        let a = assemble_matrix(&form, &[0], &[0], &bcs).unwrap();
        assert!(a.is_symmetric(1e-12));
        let block = a.submatrix(&free, &free).to_dense();
        assert!(block.cholesky().is_some(), "{kind:?}");
    }
}

#[test]
fn ns_residual_vanishes_at_rest() {
    let mesh = square(3);
    let space = taylor_hood(&mesh);
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let res = ResidualForm::new(ResidualKind::NavierStokes { re: 10.0 }, space.clone()).unwrap();
    let f = assemble_residual(&res, &vec![0.0; space.num_dofs()], &bcs).unwrap();
    assert!(f.iter().all(|&v| v == 0.0));
}

#[test]
fn rb_residual_at_rest_only_sees_the_temperature_boundary() {
    let mesh = square(3);
    let space = rb_space(&mesh);
    let bcs = BcSet::resolve(
        &space,
        &[
            DirichletBC::homogeneous(0, &[1, 2, 3, 4]),
            DirichletBC::new(2, &[1], |_, out| out[0] = 1.0),
            DirichletBC::homogeneous(2, &[2]),
        ],
    )
    .unwrap();
    let res = ResidualForm::new(ResidualKind::RayleighBenard { ra: 200.0, pr: 6.18 }, space.clone()).unwrap();
    let f = assemble_residual(&res, &vec![0.0; space.num_dofs()], &bcs).unwrap();
    let t = space.field_index_set(2);
    let mut hot = 0;
    for (i, &v) in f.iter().enumerate() {
        if v != 0.0 {
            assert!(t.contains(i) && bcs.is_constrained(i), "dof {i} = {v}");
            assert_eq!(v, -1.0);
            hot += 1;
        }
    }
    assert_eq!(hot, space.field(2).boundary_dofs(&[1]).len());
}

fn poisson_residual(space: &Arc<MixedSpace>) -> ResidualForm {
    let forcing = Arc::new(|x: &[f64]| 1.0 + x[0] * x[1]);
    ResidualForm::new(ResidualKind::Poisson { kappa: 1.5, forcing }, space.clone()).unwrap()
}

#[test]
fn poisson_residual_vanishes_at_the_discrete_solution() {
    let mesh = square(4);
    let space = MixedSpace::single(FunctionSpace::lagrange(&mesh, 2).unwrap());
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let res = poisson_residual(&space);
    let n = space.num_dofs();
    let b: Vec<f64> = assemble_residual(&res, &vec![0.0; n], &bcs).unwrap().iter().map(|v| -v).collect();
    let form = Form::new(FormKind::Stiffness { kappa: 1.5 }, space.clone(), Arc::new(ProblemContext::new())).unwrap();
    let a = assemble_matrix(&form, &[0], &[0], &bcs).unwrap().to_dense();
    let u = a.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
    let f = assemble_residual(&res, u.as_slice(), &bcs).unwrap();
    assert!(norm2(&f) <= 1e-10, "{}", norm2(&f));
}

#[test]
fn poisson_jacobian_check_is_exact() {
    let mesh = square(3);
    let space = MixedSpace::single(FunctionSpace::lagrange(&mesh, 2).unwrap());
    let bcs = BcSet::resolve(&space, &[DirichletBC::homogeneous(0, &[1, 2, 3, 4])]).unwrap();
    let state = random_vec(&mut rng(27), space.num_dofs());
    let d = jacobian_check(&poisson_residual(&space), &ProblemContext::new(), &bcs, &state, 5, 1e-3, 1).unwrap();
    assert!(d <= 1e-9, "{d}");
}

#[test]
fn memory_and_flops_are_reported() {
    let (op, _) = stokes(3);
    let asm = op.assemble().unwrap();
    assert!(op.memory_footprint() > 0 && asm.memory_footprint() > op.memory_footprint());
    assert!(op.flops_per_apply() > 0);
    assert_eq!(asm.flops_per_apply(), 2 * asm.csr().nnz() as u64);
}
