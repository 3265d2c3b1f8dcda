use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{
    block_is_zero, cell_geometry, coefficient_jets, eval_jet, fill_scalar_grad, fill_velocity, fill_wind, jet_len,
    physical_grads, point_terms, residual_point, scatter_jet, CellGeometry, PointCoeffs, Term,
};
use super::{Form, FormKind, ProblemContext, ResidualForm};
use crate::error::{Error, Result};
use crate::fem::{BcSet, Function, MixedSpace, QuadratureRule, Tabulation};
use crate::linalg::{norm2, CsrMatrix};

/// Local numbering of a subset of the fields of a mixed space: the
/// selected fields concatenated in increasing field order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    fields: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(space: &MixedSpace, fields: &[usize]) -> Result<BlockLayout> {
        if fields.is_empty() || fields.windows(2).any(|w| w[0] >= w[1]) || *fields.last().unwrap() >= space.num_fields()
        {
            return Err(Error::InvalidArgument(format!("bad field selection {fields:?}")));
        }
        let mut offsets = vec![0];
        for &f in fields {
            offsets.push(offsets.last().unwrap() + space.field(f).num_dofs());
        }
        Ok(BlockLayout { fields: fields.to_vec(), offsets })
    }

    pub fn full(space: &MixedSpace) -> BlockLayout {
        let fields: Vec<usize> = (0..space.num_fields()).collect();
        BlockLayout::new(space, &fields).expect("all fields")
    }

    pub fn fields(&self) -> &[usize] {
        &self.fields
    }

    pub fn size(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Local offset of the `pos`-th selected field.
    pub fn offset(&self, pos: usize) -> usize {
        self.offsets[pos]
    }

    pub fn position(&self, field: usize) -> Option<usize> {
        self.fields.iter().position(|&f| f == field)
    }

    /// Local index of a global (mixed) dof, if its field is selected.
    pub fn local_of(&self, space: &MixedSpace, global: usize) -> Option<usize> {
        let f = (0..space.num_fields()).rev().find(|&f| space.offset(f) <= global)?;
        self.position(f).map(|p| self.offsets[p] + global - space.offset(f))
    }

    /// Constrained dofs as `(local, global)` pairs.
    pub fn constrained(&self, space: &MixedSpace, bcs: &BcSet) -> Vec<(usize, usize)> {
        bcs.dofs().iter().filter_map(|&g| self.local_of(space, g).map(|l| (l, g))).collect()
    }
}

#[derive(Clone, Copy)]
enum Role {
    Velocity,
    Temperature,
    Wind,
}

/// Per-cell scratch shared by assembly, action and residual loops.
struct Evaluator<'a> {
    space: &'a MixedSpace,
    dim: usize,
    rule: Arc<QuadratureRule>,
    tabs: Vec<Arc<Tabulation>>,
    coeffs: Vec<(Role, &'a Function, Arc<Tabulation>)>,
    pgrad: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    pcs: Vec<PointCoeffs>,
    geom: Option<CellGeometry>,
}

impl<'a> Evaluator<'a> {
    fn new(
        space: &'a MixedSpace,
        qdeg: usize,
        kind: Option<&FormKind>,
        ctx: Option<&'a ProblemContext>,
    ) -> Result<Self> {
        let mut tabs = Vec::new();
        let mut rule = None;
        for f in space.fields() {
            let (r, t) = f.tabulation(qdeg)?;
            rule = Some(r);
            tabs.push(t);
        }
        let mut coeffs = Vec::new();
        if let (Some(kind), Some(ctx)) = (kind, ctx) {
            for &name in kind.required_coefficients() {
                let f = ctx
                    .function(name)
                    .ok_or_else(|| Error::MissingCoefficient { form: kind.name().into(), name: name.into() })?;
                let role = match name {
                    "velocity" => Role::Velocity,
                    "temperature" => Role::Temperature,
                    _ => Role::Wind,
                };
                let (_, t) = f.space.tabulation(qdeg)?;
                coeffs.push((role, f, t));
            }
        }
        let rule = rule.expect("at least one field");
        let nq = rule.weights.len();
        Ok(Evaluator {
            space,
            dim: space.mesh().dim(),
            rule,
            tabs,
            coeffs,
            pgrad: vec![Vec::new(); space.num_fields()],
            scratch: Vec::new(),
            pcs: vec![PointCoeffs::default(); nq],
            geom: None,
        })
    }

    fn nq(&self) -> usize {
        self.rule.weights.len()
    }

    fn prepare(&mut self, c: usize, fields: &[bool]) -> Result<()> {
        let geom = cell_geometry(self.space.mesh(), c)?;
        for (f, &used) in fields.iter().enumerate() {
            if used {
                physical_grads(&self.tabs[f], &geom, &mut self.pgrad[f]);
            }
        }
        let dim = self.dim;
        for (role, func, tab) in &self.coeffs {
            physical_grads(tab, &geom, &mut self.scratch);
            let jets = coefficient_jets(&func.space, func.values(), c, tab, &self.scratch);
            let len = jet_len(func.space.ncomp(), dim);
            for (q, pc) in self.pcs.iter_mut().enumerate() {
                let jet = &jets[q * len..(q + 1) * len];
                match role {
                    Role::Velocity => fill_velocity(pc, jet, dim),
                    Role::Temperature => fill_scalar_grad(&mut pc.dt, jet, dim),
                    Role::Wind => fill_wind(pc, jet, dim),
                }
            }
        }
        self.geom = Some(geom);
        Ok(())
    }

    fn weight(&self, q: usize) -> f64 {
        self.rule.weights[q] * self.geom.as_ref().expect("prepared").det
    }
}

fn used_fields(n: usize, rows: &BlockLayout, cols: &BlockLayout) -> Vec<bool> {
    let mut used = vec![false; n];
    for &f in rows.fields().iter().chain(cols.fields()) {
        used[f] = true;
    }
    used
}

/// Local dofs of field `f` on cell `c`, shifted into block numbering.
fn block_cell_dofs(space: &MixedSpace, layout: &BlockLayout, pos: usize, c: usize, out: &mut Vec<usize>) {
    let f = layout.fields()[pos];
    space.field(f).cell_dofs(c, out);
    let off = layout.offset(pos);
    out.iter_mut().for_each(|d| *d += off);
}

fn basis_factor(tab: &Tabulation, pgrad: &[f64], dim: usize, q: usize, node: usize, slot: usize) -> f64 {
    if slot == 0 {
        tab.value(q, node)
    } else {
        pgrad[(q * tab.nbasis + node) * dim + slot - 1]
    }
}

/// Element matrix of block `rows x cols` on cell `c`, before boundary conditions.
/// Local ordering concatenates the selected fields' cell dofs.
pub fn element_matrix(form: &Form, rows: &[usize], cols: &[usize], c: usize) -> Result<DMatrix<f64>> {
    let space = form.space();
    let rl = BlockLayout::new(space, rows)?;
    let cl = BlockLayout::new(space, cols)?;
    let mut ev = Evaluator::new(space, form.qdeg, Some(&form.kind), Some(form.context()))?;
    let mut terms = Vec::new();
    element_matrix_with(form, &rl, &cl, &mut ev, c, &mut terms)
}

/// The adjoint kernel: test and trial roles reversed. Equals the transpose of
/// [`element_matrix`].
pub fn element_matrix_adjoint(form: &Form, rows: &[usize], cols: &[usize], c: usize) -> Result<DMatrix<f64>> {
    let space = form.space();
    let rl = BlockLayout::new(space, rows)?;
    let cl = BlockLayout::new(space, cols)?;
    let mut ev = Evaluator::new(space, form.qdeg, Some(&form.kind), Some(form.context()))?;
    ev.prepare(c, &used_fields(space.num_fields(), &rl, &cl))?;
    let dim = ev.dim;
    let local_sizes =
        |l: &BlockLayout| -> Vec<usize> { l.fields().iter().map(|&f| space.field(f).local_dofs()).collect() };
    let (rs, cs) = (local_sizes(&rl), local_sizes(&cl));
    let mut a = DMatrix::zeros(cs.iter().sum(), rs.iter().sum());
    let mut terms = Vec::new();
    let mut coff = 0;
    for (pj, &fj) in cl.fields().iter().enumerate() {
        let mut roff = 0;
        for (pi, &fi) in rl.fields().iter().enumerate() {
            if !block_is_zero(&form.kind, fi, fj) {
                let (ti, tj) = (&ev.tabs[fi], &ev.tabs[fj]);
                let (nci, ncj) = (space.field(fi).ncomp(), space.field(fj).ncomp());
                for q in 0..ev.nq() {
                    point_terms(&form.kind, fi, fj, dim, ncj.max(nci), &ev.pcs[q], &mut terms);
                    let w = ev.weight(q);
                    // the trial function now plays the test role
                    for &(ta, tb, val) in &terms {
                        let (ca, sa) = (ta / (dim + 1), ta % (dim + 1));
                        let (cb, sb) = (tb / (dim + 1), tb % (dim + 1));
                        for j in 0..tj.nbasis {
                            let phj = basis_factor(tj, &ev.pgrad[fj], dim, q, j, sb);
                            if phj == 0.0 {
                                continue;
                            }
                            for i in 0..ti.nbasis {
                                let phi = basis_factor(ti, &ev.pgrad[fi], dim, q, i, sa);
                                a[(coff + j * ncj + cb, roff + i * nci + ca)] += w * val * phi * phj;
                            }
                        }
                    }
                }
            }
            roff += rs[pi];
        }
        coff += cs[pj];
    }
    Ok(a)
}

fn element_matrix_with(
    form: &Form,
    rl: &BlockLayout,
    cl: &BlockLayout,
    ev: &mut Evaluator,
    c: usize,
    terms: &mut Vec<Term>,
) -> Result<DMatrix<f64>> {
    let space = form.space();
    ev.prepare(c, &used_fields(space.num_fields(), rl, cl))?;
    let dim = ev.dim;
    let rs: Vec<usize> = rl.fields().iter().map(|&f| space.field(f).local_dofs()).collect();
    let cs: Vec<usize> = cl.fields().iter().map(|&f| space.field(f).local_dofs()).collect();
    let mut a = DMatrix::zeros(rs.iter().sum(), cs.iter().sum());
    let mut roff = 0;
    for (pi, &fi) in rl.fields().iter().enumerate() {
        let mut coff = 0;
        for (pj, &fj) in cl.fields().iter().enumerate() {
            if !block_is_zero(&form.kind, fi, fj) {
                let (ti, tj) = (&ev.tabs[fi], &ev.tabs[fj]);
                let (nci, ncj) = (space.field(fi).ncomp(), space.field(fj).ncomp());
                for q in 0..ev.nq() {
                    point_terms(&form.kind, fi, fj, dim, nci.max(ncj), &ev.pcs[q], terms);
                    let w = ev.weight(q);
                    for &(ta, tb, val) in terms.iter() {
                        let (ca, sa) = (ta / (dim + 1), ta % (dim + 1));
                        let (cb, sb) = (tb / (dim + 1), tb % (dim + 1));
                        for i in 0..ti.nbasis {
                            let phi = basis_factor(ti, &ev.pgrad[fi], dim, q, i, sa);
                            if phi == 0.0 {
                                continue;
                            }
                            let s = w * val * phi;
                            for j in 0..tj.nbasis {
                                let phj = basis_factor(tj, &ev.pgrad[fj], dim, q, j, sb);
                                a[(roff + i * nci + ca, coff + j * ncj + cb)] += s * phj;
                            }
                        }
                    }
                }
            }
            coff += cs[pj];
        }
        roff += rs[pi];
    }
    Ok(a)
}

/// The block `rows x cols` as CSR with Dirichlet rows and columns zeroed and a
/// unit diagonal on constrained dofs of fields present on both sides.
pub fn assemble_matrix(form: &Form, rows: &[usize], cols: &[usize], bcs: &BcSet) -> Result<CsrMatrix> {
    let space = form.space();
    let rl = BlockLayout::new(space, rows)?;
    let cl = BlockLayout::new(space, cols)?;
    check_bcs(space, bcs)?;
    let rmask = local_mask(space, &rl, bcs);
    let cmask = local_mask(space, &cl, bcs);

    let ncells = space.mesh().num_cells();
    let mut rdofs = Vec::new();
    let mut cdofs = Vec::new();
    let mut buf = Vec::new();
    let mut pattern: Vec<Vec<u32>> = vec![Vec::new(); rl.size()];
    for c in 0..ncells {
        for (pi, &fi) in rl.fields().iter().enumerate() {
            block_cell_dofs(space, &rl, pi, c, &mut rdofs);
            for (pj, &fj) in cl.fields().iter().enumerate() {
                if block_is_zero(&form.kind, fi, fj) {
                    continue;
                }
                block_cell_dofs(space, &cl, pj, c, &mut buf);
                for &r in &rdofs {
                    pattern[r].extend(buf.iter().map(|&d| d as u32));
                }
            }
        }
    }
    for (l, g) in rl.constrained(space, bcs) {
        if let Some(lc) = cl.local_of(space, g) {
            pattern[l].push(lc as u32);
        }
    }
    for row in &mut pattern {
        row.sort_unstable();
        row.dedup();
    }
    let mut a = CsrMatrix::from_pattern(cl.size(), pattern);

    let mut ev = Evaluator::new(space, form.qdeg, Some(&form.kind), Some(form.context()))?;
    let mut terms = Vec::new();
    for c in 0..ncells {
        let ke = element_matrix_with(form, &rl, &cl, &mut ev, c, &mut terms)?;
        rdofs.clear();
        for pi in 0..rl.fields().len() {
            block_cell_dofs(space, &rl, pi, c, &mut buf);
            rdofs.extend_from_slice(&buf);
        }
        cdofs.clear();
        for pj in 0..cl.fields().len() {
            block_cell_dofs(space, &cl, pj, c, &mut buf);
            cdofs.extend_from_slice(&buf);
        }
        for (i, &r) in rdofs.iter().enumerate() {
            if rmask[r] {
                continue;
            }
            for (j, &col) in cdofs.iter().enumerate() {
                let v = ke[(i, j)];
                if v == 0.0 || cmask[col] {
                    continue;
                }
                let k = a.find(r, col).expect("entry in pattern");
                a.values_mut()[k] += v;
            }
        }
    }
    for (l, g) in rl.constrained(space, bcs) {
        if let Some(lc) = cl.local_of(space, g) {
            let k = a.find(l, lc).expect("diagonal in pattern");
            a.values_mut()[k] = 1.0;
        }
    }
    Ok(a)
}

fn check_bcs(space: &MixedSpace, bcs: &BcSet) -> Result<()> {
    if bcs.mask().len() != space.num_dofs() {
        return Err(Error::ShapeMismatch { expected: space.num_dofs(), got: bcs.mask().len() });
    }
    Ok(())
}

fn local_mask(space: &MixedSpace, layout: &BlockLayout, bcs: &BcSet) -> Vec<bool> {
    let mut mask = vec![false; layout.size()];
    for (l, _) in layout.constrained(space, bcs) {
        mask[l] = true;
    }
    mask
}

enum Direction {
    Forward,
    Adjoint,
}

fn action_impl(
    form: &Form,
    rows: &[usize],
    cols: &[usize],
    bcs: &BcSet,
    x: &[f64],
    y: &mut [f64],
    dir: Direction,
) -> Result<()> {
    let space = form.space();
    let rl = BlockLayout::new(space, rows)?;
    let cl = BlockLayout::new(space, cols)?;
    check_bcs(space, bcs)?;
    // forward: x lives on columns, y on rows; adjoint swaps them
    let (src, dst) = match dir {
        Direction::Forward => (&cl, &rl),
        Direction::Adjoint => (&rl, &cl),
    };
    if x.len() != src.size() {
        return Err(Error::ShapeMismatch { expected: src.size(), got: x.len() });
    }
    if y.len() != dst.size() {
        return Err(Error::ShapeMismatch { expected: dst.size(), got: y.len() });
    }
    let src_con = src.constrained(space, bcs);
    let dst_con = dst.constrained(space, bcs);
    let mut xt = x.to_vec();
    for &(l, _) in &src_con {
        xt[l] = 0.0;
    }
    y.iter_mut().for_each(|v| *v = 0.0);

    let dim = space.mesh().dim();
    let mut ev = Evaluator::new(space, form.qdeg, Some(&form.kind), Some(form.context()))?;
    let used = used_fields(space.num_fields(), &rl, &cl);
    let nsrc = src.fields().len();
    let ndst = dst.fields().len();
    let mut src_dofs: Vec<Vec<usize>> = vec![Vec::new(); nsrc];
    let mut dst_dofs: Vec<Vec<usize>> = vec![Vec::new(); ndst];
    let mut xloc: Vec<Vec<f64>> = vec![Vec::new(); nsrc];
    let mut yloc: Vec<Vec<f64>> = vec![Vec::new(); ndst];
    let mut jets: Vec<Vec<f64>> =
        src.fields().iter().map(|&f| vec![0.0; jet_len(space.field(f).ncomp(), dim)]).collect();
    let mut g: Vec<Vec<f64>> = dst.fields().iter().map(|&f| vec![0.0; jet_len(space.field(f).ncomp(), dim)]).collect();
    let mut terms = Vec::new();

    for c in 0..space.mesh().num_cells() {
        let mut nonzero = false;
        for p in 0..nsrc {
            block_cell_dofs(space, src, p, c, &mut src_dofs[p]);
            xloc[p].clear();
            xloc[p].extend(src_dofs[p].iter().map(|&d| xt[d]));
            nonzero |= xloc[p].iter().any(|&v| v != 0.0);
        }
        if !nonzero {
            continue;
        }
        ev.prepare(c, &used)?;
        for p in 0..ndst {
            block_cell_dofs(space, dst, p, c, &mut dst_dofs[p]);
            yloc[p].clear();
            yloc[p].resize(dst_dofs[p].len(), 0.0);
        }
        for q in 0..ev.nq() {
            for (p, &f) in src.fields().iter().enumerate() {
                eval_jet(&ev.tabs[f], &ev.pgrad[f], space.field(f).ncomp(), q, &xloc[p], &mut jets[p]);
            }
            for (pd, &fd) in dst.fields().iter().enumerate() {
                g[pd].iter_mut().for_each(|v| *v = 0.0);
                for (ps, &fs) in src.fields().iter().enumerate() {
                    let (fi, fj) = match dir {
                        Direction::Forward => (fd, fs),
                        Direction::Adjoint => (fs, fd),
                    };
                    if block_is_zero(&form.kind, fi, fj) {
                        continue;
                    }
                    let nc = space.field(fi).ncomp().max(space.field(fj).ncomp());
                    point_terms(&form.kind, fi, fj, dim, nc, &ev.pcs[q], &mut terms);
                    for &(a, b, val) in &terms {
                        match dir {
                            Direction::Forward => g[pd][a] += val * jets[ps][b],
                            Direction::Adjoint => g[pd][b] += val * jets[ps][a],
                        }
                    }
                }
                let w = ev.weight(q);
                scatter_jet(&ev.tabs[fd], &ev.pgrad[fd], space.field(fd).ncomp(), q, w, &g[pd], &mut yloc[pd]);
            }
        }
        for p in 0..ndst {
            for (&d, &v) in dst_dofs[p].iter().zip(&yloc[p]) {
                y[d] += v;
            }
        }
    }
    for &(l, _) in &dst_con {
        y[l] = 0.0;
    }
    for &(l, gdof) in &dst_con {
        if let Some(ls) = src.local_of(space, gdof) {
            y[l] = x[ls];
        }
    }
    Ok(())
}

/// Matrix-free `y = A x` for block `rows x cols`, consistent with [`assemble_matrix`].
pub fn apply_action(form: &Form, rows: &[usize], cols: &[usize], bcs: &BcSet, x: &[f64], y: &mut [f64]) -> Result<()> {
    action_impl(form, rows, cols, bcs, x, y, Direction::Forward)
}

/// Matrix-free `y = A^T x` via the adjoint kernel.
pub fn apply_action_transpose(
    form: &Form,
    rows: &[usize],
    cols: &[usize],
    bcs: &BcSet,
    x: &[f64],
    y: &mut [f64],
) -> Result<()> {
    action_impl(form, rows, cols, bcs, x, y, Direction::Adjoint)
}

/// Weak residual at `state`; constrained entries hold `state - boundary value`.
pub fn assemble_residual(res: &ResidualForm, state: &[f64], bcs: &BcSet) -> Result<Vec<f64>> {
    let space = res.space();
    if state.len() != space.num_dofs() {
        return Err(Error::ShapeMismatch { expected: space.num_dofs(), got: state.len() });
    }
    check_bcs(space, bcs)?;
    let layout = BlockLayout::full(space);
    let nf = space.num_fields();
    let dim = space.mesh().dim();
    let mut ev = Evaluator::new(space, res.qdeg, None, None)?;
    let used = vec![true; nf];
    let mut out = vec![0.0; space.num_dofs()];
    let mut dofs: Vec<Vec<usize>> = vec![Vec::new(); nf];
    let mut xloc: Vec<Vec<f64>> = vec![Vec::new(); nf];
    let mut yloc: Vec<Vec<f64>> = vec![Vec::new(); nf];
    let mut jets: Vec<Vec<f64>> = (0..nf).map(|f| vec![0.0; jet_len(space.field(f).ncomp(), dim)]).collect();
    let mut g = jets.clone();
    for c in 0..space.mesh().num_cells() {
        ev.prepare(c, &used)?;
        for f in 0..nf {
            block_cell_dofs(space, &layout, f, c, &mut dofs[f]);
            xloc[f].clear();
            xloc[f].extend(dofs[f].iter().map(|&d| state[d]));
            yloc[f].clear();
            yloc[f].resize(dofs[f].len(), 0.0);
        }
        let geom = ev.geom.expect("prepared");
        for q in 0..ev.nq() {
            for f in 0..nf {
                eval_jet(&ev.tabs[f], &ev.pgrad[f], space.field(f).ncomp(), q, &xloc[f], &mut jets[f]);
            }
            let xq = geom.physical_point(&ev.rule.points[q], dim);
            residual_point(res.kind(), dim, &xq, &jets, &mut g);
            let w = ev.weight(q);
            for f in 0..nf {
                scatter_jet(&ev.tabs[f], &ev.pgrad[f], space.field(f).ncomp(), q, w, &g[f], &mut yloc[f]);
            }
        }
        for f in 0..nf {
            for (&d, &v) in dofs[f].iter().zip(&yloc[f]) {
                out[d] += v;
            }
        }
    }
    for (&d, &v) in bcs.dofs().iter().zip(bcs.values()) {
        out[d] = state[d] - v;
    }
    Ok(out)
}

/// Largest relative gap between a central finite difference of the residual
/// and the Jacobian action, over `ndirs` random directions that vanish on
/// constrained dofs.
pub fn jacobian_check(
    res: &ResidualForm,
    base: &ProblemContext,
    bcs: &BcSet,
    state: &[f64],
    ndirs: usize,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let space = res.space();
    let n = space.num_dofs();
    let jac = res.jacobian(Arc::new(state.to_vec()), base)?;
    let all: Vec<usize> = (0..space.num_fields()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..ndirs {
        let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        bcs.zero_constrained(&mut d);
        let xp: Vec<f64> = state.iter().zip(&d).map(|(x, v)| x + h * v).collect();
        let xm: Vec<f64> = state.iter().zip(&d).map(|(x, v)| x - h * v).collect();
        let fp = assemble_residual(res, &xp, bcs)?;
        let fm = assemble_residual(res, &xm, bcs)?;
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let mut jd = vec![0.0; n];
        apply_action(&jac, &all, &all, bcs, &d, &mut jd)?;
        let diff: Vec<f64> = fd.iter().zip(&jd).map(|(a, b)| a - b).collect();
        let scale = norm2(&jd).max(1e-300);
        worst = worst.max(norm2(&diff) / scale);
    }
    Ok(worst)
}

/// Analytic flop count of one matrix-free application of a block.
pub(crate) fn action_flops(form: &Form, rows: &[usize], cols: &[usize]) -> Result<u64> {
    let space = form.space();
    let rl = BlockLayout::new(space, rows)?;
    let cl = BlockLayout::new(space, cols)?;
    let dim = space.mesh().dim();
    let (rule, _) = space.field(0).tabulation(form.qdeg)?;
    let nq = rule.weights.len() as u64;
    let jet_cost = |f: usize| {
        let fs = space.field(f);
        (2 * fs.element().num_nodes() * jet_len(fs.ncomp(), dim)) as u64
    };
    let mut per_point = 0u64;
    let used = used_fields(space.num_fields(), &rl, &cl);
    for (f, &u) in used.iter().enumerate() {
        if u {
            // gradient push-forward
            per_point += (2 * space.field(f).element().num_nodes() * dim * dim) as u64;
        }
    }
    for &f in cl.fields() {
        per_point += jet_cost(f);
    }
    for &f in rl.fields() {
        per_point += jet_cost(f);
    }
    let probe = PointCoeffs { u: [1.0; 3], du: [[1.0; 3]; 3], dt: [1.0; 3], wind: [1.0; 3] };
    let mut terms = Vec::new();
    for &fi in rl.fields() {
        for &fj in cl.fields() {
            if block_is_zero(&form.kind, fi, fj) {
                continue;
            }
            let nc = space.field(fi).ncomp().max(space.field(fj).ncomp());
            point_terms(&form.kind, fi, fj, dim, nc, &probe, &mut terms);
            per_point += 2 * terms.len() as u64;
        }
    }
    Ok(per_point * nq * space.mesh().num_cells() as u64)
}
