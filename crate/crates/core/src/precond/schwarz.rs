use std::sync::Arc;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};

use super::{pc_header, Preconditioner, Viewer};
use crate::error::{Error, Result};
use crate::fem::{BcSet, FunctionSpace, LagrangeElement, MixedSpace};
use crate::forms::{element_matrix, Form};
use crate::krylov::{KspStats, SharedKsp};
use crate::linalg::CsrMatrix;
use crate::operators::{ImplicitOperator, OperatorRef};

/// Interpolation from the P1 space with the same value shape onto `fine`.
/// P1 dofs are numbered like the mesh vertices, so coarse dof `v * ncomp + c`
/// is the hat function at vertex `v`, component `c`.
pub fn prolongation(fine: &FunctionSpace) -> CsrMatrix {
    let mesh = fine.mesh();
    let nc = fine.ncomp();
    let k = fine.degree() as f64;
    let dim = mesh.dim();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); fine.num_nodes()];
    let mut done = vec![false; fine.num_nodes()];
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        for (a, &node) in fine.cell_nodes(c).iter().enumerate() {
            if done[node] {
                continue;
            }
            done[node] = true;
            let m = fine.element().multi_indices()[a];
            for i in 0..=dim {
                if m[i] > 0 {
                    rows[node].push((cell[i] as u32, m[i] as f64 / k));
                }
            }
        }
    }
    let mut triplets = Vec::new();
    for (node, entries) in rows.iter().enumerate() {
        for &(v, w) in entries {
            for comp in 0..nc {
                triplets.push((node * nc + comp, v as usize * nc + comp, w));
            }
        }
    }
    CsrMatrix::from_triplets(fine.num_dofs(), mesh.num_vertices() * nc, &triplets).expect("indices in range")
}

struct Patch {
    dofs: Vec<usize>,
    cells: Vec<usize>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

struct SchwarzState {
    form: Arc<Form>,
    space: Arc<FunctionSpace>,
    bcs: Arc<BcSet>,
    prolong: CsrMatrix,
    coarse_bcs: BcSet,
    patches: Vec<Patch>,
}

/// Two-level additive Schwarz: a P1 coarse correction plus exact solves on
/// vertex patches of the same bilinear form.
pub struct SchwarzPc {
    prefix: String,
    coarse: SharedKsp,
    save_operators: bool,
    state: Option<SchwarzState>,
}

impl std::fmt::Debug for SchwarzPc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchwarzPc").field("prefix", &self.prefix).field("save_operators", &self.save_operators).finish()
    }
}

impl SchwarzPc {
    pub fn new(prefix: &str, coarse: SharedKsp, save_operators: bool) -> SchwarzPc {
        SchwarzPc { prefix: prefix.to_string(), coarse, save_operators, state: None }
    }

    pub fn num_patches(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.patches.len())
    }

    /// Global dofs of each vertex patch.
    pub fn patch_dofs(&self) -> Vec<Vec<usize>> {
        self.state.as_ref().map_or_else(Vec::new, |s| s.patches.iter().map(|p| p.dofs.clone()).collect())
    }

    pub fn prolongation(&self) -> Option<&CsrMatrix> {
        self.state.as_ref().map(|s| &s.prolong)
    }
}

fn patch_matrix(
    form: &Form,
    space: &FunctionSpace,
    patch: &Patch,
    cached: Option<&[DMatrix<f64>]>,
) -> Result<DMatrix<f64>> {
    let n = patch.dofs.len();
    let mut a = DMatrix::zeros(n, n);
    let mut local = Vec::new();
    for &c in &patch.cells {
        let owned;
        let ke = match cached {
            Some(all) => &all[c],
            None => {
                owned = element_matrix(form, &[0], &[0], c)?;
                &owned
            }
        };
        space.cell_dofs(c, &mut local);
        let pos: Vec<Option<usize>> = local.iter().map(|d| patch.dofs.binary_search(d).ok()).collect();
        for (i, pi) in pos.iter().enumerate() {
            let Some(pi) = *pi else { continue };
            for (j, pj) in pos.iter().enumerate() {
                if let Some(pj) = *pj {
                    a[(pi, pj)] += ke[(i, j)];
                }
            }
        }
    }
    Ok(a)
}

fn factor(a: DMatrix<f64>, vertex: usize) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.lu();
    if !lu.is_invertible() {
        return Err(Error::ZeroPivot { row: vertex });
    }
    Ok(lu)
}

impl Preconditioner for SchwarzPc {
    fn type_name(&self) -> &'static str {
        "schwarz"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let imp = pmat.as_implicit().ok_or_else(|| Error::MissingContext {
            pc: "schwarz".into(),
            what: format!("an implicit operator with form, space and boundary conditions, got {}", pmat.describe()),
        })?;
        if imp.space().num_fields() != 1 || !imp.is_diagonal_block() {
            return Err(Error::Unsupported("schwarz on a multi-field operator".into()));
        }
        let space = imp.space().field(0).clone();
        if space.degree() < 2 {
            return Err(Error::InvalidArgument(
                "schwarz needs degree >= 2; the P1 coarse space would equal the fine one".into(),
            ));
        }
        let mesh = space.mesh().clone();
        let nc = space.ncomp();
        let bcs = imp.bcs().clone();
        let form = imp.form().clone();

        // coarse level
        let p1 = FunctionSpace::new(mesh.clone(), LagrangeElement::new(mesh.dim(), 1, nc)?)?;
        let ncoarse = p1.num_dofs();
        let pairs: Vec<(usize, f64)> = bcs.dofs().iter().filter(|&&d| d < ncoarse).map(|&d| (d, 0.0)).collect();
        let coarse_bcs = BcSet::from_dofs(ncoarse, &pairs)?;
        let coarse_form = Arc::new(form.on_space(MixedSpace::single(p1))?);
        let coarse_op: OperatorRef =
            Arc::new(ImplicitOperator::new(coarse_form, Arc::new(coarse_bcs.clone()))?.assemble()?);
        self.coarse.lock().expect("poisoned").set_operators(coarse_op.clone(), coarse_op);
        let prolong = prolongation(&space);

        // patch dofs: not Dirichlet, and either on an entity touching v or on
        // an entity whose cell star lies inside the patch
        let mut patches = Vec::with_capacity(mesh.num_vertices());
        let mut in_patch = vec![false; mesh.num_cells()];
        for v in 0..mesh.num_vertices() {
            let cells = mesh.vertex_patch(v)?.to_vec();
            cells.iter().for_each(|&c| in_patch[c] = true);
            let mut nodes: Vec<usize> = cells.iter().flat_map(|&c| space.cell_nodes(c).iter().copied()).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let mut dofs = Vec::new();
            for node in nodes {
                let ent = space.node_entity(node);
                let keep = ent.contains(&v)
                    || mesh
                        .vertex_to_cells(ent[0])
                        .iter()
                        .filter(|c| ent[1..].iter().all(|w| mesh.cell(**c).contains(w)))
                        .all(|&c| in_patch[c]);
                if keep {
                    for comp in 0..nc {
                        let d = node * nc + comp;
                        if !bcs.is_constrained(d) {
                            dofs.push(d);
                        }
                    }
                }
            }
            cells.iter().for_each(|&c| in_patch[c] = false);
            if !dofs.is_empty() {
                patches.push(Patch { dofs, cells, lu: None });
            }
        }
        if self.save_operators {
            let kes: Vec<DMatrix<f64>> =
                (0..mesh.num_cells()).map(|c| element_matrix(&form, &[0], &[0], c)).collect::<Result<_>>()?;
            for (v, p) in patches.iter_mut().enumerate() {
                let a = patch_matrix(&form, &space, p, Some(&kes))?;
                p.lu = Some(factor(a, v)?);
            }
        }
        self.state = Some(SchwarzState { form, space, bcs, prolong, coarse_bcs, patches });
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let st = self.state.as_ref().ok_or_else(|| Error::NotSetUp("schwarz".into()))?;
        let mut rr = r.to_vec();
        st.bcs.zero_constrained(&mut rr);

        let mut rc = vec![0.0; st.prolong.ncols()];
        st.prolong.matvec_transpose(&rr, &mut rc);
        st.coarse_bcs.zero_constrained(&mut rc);
        let mut zc = vec![0.0; rc.len()];
        self.coarse.lock().expect("poisoned").solve(&rc, &mut zc)?;
        st.coarse_bcs.zero_constrained(&mut zc);
        st.prolong.matvec(&zc, z);
        st.bcs.zero_constrained(z);

        for (v, p) in st.patches.iter().enumerate() {
            let rv = DVector::from_iterator(p.dofs.len(), p.dofs.iter().map(|&d| rr[d]));
            let sol = match &p.lu {
                Some(lu) => lu.solve(&rv),
                None => factor(patch_matrix(&st.form, &st.space, p, None)?, v)?.solve(&rv),
            }
            .ok_or(Error::ZeroPivot { row: v })?;
            for (&d, s) in p.dofs.iter().zip(sol.iter()) {
                z[d] += s;
            }
        }
        for &d in st.bcs.dofs() {
            z[d] += r[d];
        }
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "schwarz");
        v.line("additive: P1 coarse correction + vertex patches");
        v.line(&format!("patch solver: dense LU, save operators: {}", self.save_operators));
        if let Some(st) = &self.state {
            v.line(&format!("{} patches, {} coarse dofs", st.patches.len(), st.prolong.ncols()));
        }
        v.line("KSP solver for the coarse space:");
        v.push();
        self.coarse.lock().expect("poisoned").view(v);
        v.pop();
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        self.coarse.lock().expect("poisoned").collect_stats(out);
    }
}
