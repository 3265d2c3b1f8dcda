//! Pointwise kernels. Every form is written as a sparse coupling between
//! the test-function jet and the trial-function jet at a quadrature point,
//! where the jet of a field holds, per component, its value followed by its
//! physical gradient.

use crate::error::{Error, Result};
use crate::fem::{FunctionSpace, Tabulation};
use crate::mesh::Mesh;

use super::{FormKind, ResidualKind};

#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: [f64; 3],
    pub jac: [[f64; 3]; 3],
    pub jinv: [[f64; 3]; 3],
    /// |det J|
    pub det: f64,
}

impl CellGeometry {
    pub fn physical_point(&self, xi: &[f64; 3], dim: usize) -> [f64; 3] {
        let mut x = self.origin;
        for r in 0..dim {
            for k in 0..dim {
                x[r] += self.jac[r][k] * xi[k];
            }
        }
        x
    }
}

pub fn cell_geometry(mesh: &Mesh, c: usize) -> Result<CellGeometry> {
    let verts: Vec<[f64; 3]> = mesh
        .cell(c)
        .iter()
        .map(|&v| {
            let mut x = [0.0; 3];
            x[..mesh.dim()].copy_from_slice(mesh.vertex(v));
            x
        })
        .collect();
    simplex_geometry(mesh.dim(), &verts, c)
}

/// Affine map of the simplex with the given vertices; `c` only labels errors.
pub fn simplex_geometry(dim: usize, verts: &[[f64; 3]], c: usize) -> Result<CellGeometry> {
    let origin = verts[0];
    let mut jac = [[0.0; 3]; 3];
    for col in 0..dim {
        for row in 0..dim {
            jac[row][col] = verts[col + 1][row] - origin[row];
        }
    }
    let (det, jinv) = if dim == 2 {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let mut inv = [[0.0; 3]; 3];
        inv[0][0] = jac[1][1] / det;
        inv[0][1] = -jac[0][1] / det;
        inv[1][0] = -jac[1][0] / det;
        inv[1][1] = jac[0][0] / det;
        (det, inv)
    } else {
        let m = &jac;
        let cof = |r: usize, c: usize| {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
        let mut inv = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                inv[c][r] = cof(r, c) / det;
            }
        }
        (det, inv)
    };
    let factorial = if dim == 2 { 2.0 } else { 6.0 };
    let volume = det.abs() / factorial;
    if volume <= 1e-14 || !volume.is_finite() {
        return Err(Error::DegenerateCell { cell: c, volume });
    }
    Ok(CellGeometry { origin, jac, jinv, det: det.abs() })
}

/// Physical gradients `out[(q * nb + a) * dim + r]` from reference ones.
pub(crate) fn physical_grads(tab: &Tabulation, geom: &CellGeometry, out: &mut Vec<f64>) {
    let d = tab.dim;
    out.clear();
    out.resize(tab.npoints * tab.nbasis * d, 0.0);
    for q in 0..tab.npoints {
        for a in 0..tab.nbasis {
            let g = tab.grad(q, a);
            let o = (q * tab.nbasis + a) * d;
            for r in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += geom.jinv[k][r] * g[k];
                }
                out[o + r] = s;
            }
        }
    }
}

#[inline]
pub(crate) fn jet_len(ncomp: usize, dim: usize) -> usize {
    ncomp * (dim + 1)
}

#[inline]
fn jv(c: usize, dim: usize) -> usize {
    c * (dim + 1)
}

#[inline]
fn jg(c: usize, k: usize, dim: usize) -> usize {
    c * (dim + 1) + 1 + k
}

/// Jet of local coefficients `x` (layout `node * ncomp + comp`) at point `q`.
pub(crate) fn eval_jet(tab: &Tabulation, pgrad: &[f64], ncomp: usize, q: usize, x: &[f64], jet: &mut [f64]) {
    let d = tab.dim;
    let nb = tab.nbasis;
    jet.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..nb {
        let phi = tab.value(q, a);
        let g = &pgrad[(q * nb + a) * d..(q * nb + a + 1) * d];
        for c in 0..ncomp {
            let xa = x[a * ncomp + c];
            if xa == 0.0 {
                continue;
            }
            jet[jv(c, d)] += phi * xa;
            for k in 0..d {
                jet[jg(c, k, d)] += g[k] * xa;
            }
        }
    }
}

/// `y[a * ncomp + c] += w * <test jet of basis (a, c)>, g>`
pub(crate) fn scatter_jet(tab: &Tabulation, pgrad: &[f64], ncomp: usize, q: usize, w: f64, g: &[f64], y: &mut [f64]) {
    let d = tab.dim;
    let nb = tab.nbasis;
    for c in 0..ncomp {
        let gv = g[jv(c, d)] * w;
        let mut gg = [0.0; 3];
        let mut any = gv != 0.0;
        for k in 0..d {
            gg[k] = g[jg(c, k, d)] * w;
            any |= gg[k] != 0.0;
        }
        if !any {
            continue;
        }
        for a in 0..nb {
            let grad = &pgrad[(q * nb + a) * d..(q * nb + a + 1) * d];
            let mut s = gv * tab.value(q, a);
            for k in 0..d {
                s += gg[k] * grad[k];
            }
            y[a * ncomp + c] += s;
        }
    }
}

/// Coefficient values at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PointCoeffs {
    pub u: [f64; 3],
    /// `du[c][k] = d u_c / d x_k`
    pub du: [[f64; 3]; 3],
    pub dt: [f64; 3],
    pub wind: [f64; 3],
}

/// Jet of a coefficient function's component layout at all points of a cell.
pub(crate) fn coefficient_jets(
    space: &FunctionSpace,
    values: &[f64],
    c: usize,
    tab: &Tabulation,
    pgrad: &[f64],
) -> Vec<f64> {
    let nc = space.ncomp();
    let d = tab.dim;
    let nodes = space.cell_nodes(c);
    let mut x = vec![0.0; nodes.len() * nc];
    for (a, &n) in nodes.iter().enumerate() {
        for comp in 0..nc {
            x[a * nc + comp] = values[n * nc + comp];
        }
    }
    let len = jet_len(nc, d);
    let mut out = vec![0.0; tab.npoints * len];
    for q in 0..tab.npoints {
        eval_jet(tab, pgrad, nc, q, &x, &mut out[q * len..(q + 1) * len]);
    }
    out
}

pub(crate) fn fill_velocity(pc: &mut PointCoeffs, jet: &[f64], dim: usize) {
    for c in 0..dim {
        pc.u[c] = jet[jv(c, dim)];
        for k in 0..dim {
            pc.du[c][k] = jet[jg(c, k, dim)];
        }
    }
}

pub(crate) fn fill_scalar_grad(out: &mut [f64; 3], jet: &[f64], dim: usize) {
    for k in 0..dim {
        out[k] = jet[jg(0, k, dim)];
    }
}

pub(crate) fn fill_wind(pc: &mut PointCoeffs, jet: &[f64], dim: usize) {
    for c in 0..dim {
        pc.wind[c] = jet[jv(c, dim)];
    }
}

pub(crate) type Term = (usize, usize, f64);

/// Whether block `(fi, fj)` of `kind` vanishes identically.
pub(crate) fn block_is_zero(kind: &FormKind, fi: usize, fj: usize) -> bool {
    match kind {
        FormKind::Mass { .. } | FormKind::Stiffness { .. } | FormKind::ConvectionDiffusion { .. } => false,
        FormKind::Stokes { .. } | FormKind::NavierStokesJacobian { .. } => fi == 1 && fj == 1,
        FormKind::RayleighBenardJacobian { .. } => matches!((fi, fj), (1, 1) | (1, 2) | (2, 1)),
    }
}

fn stiffness_terms(coef: f64, ncomp: usize, dim: usize, out: &mut Vec<Term>) {
    for c in 0..ncomp {
        for k in 0..dim {
            out.push((jg(c, k, dim), jg(c, k, dim), coef));
        }
    }
}

fn momentum_terms(nu: f64, pc: &PointCoeffs, dim: usize, out: &mut Vec<Term>) {
    stiffness_terms(nu, dim, dim, out);
    for c in 0..dim {
        for k in 0..dim {
            if pc.u[k] != 0.0 {
                out.push((jv(c, dim), jg(c, k, dim), pc.u[k]));
            }
            if pc.du[c][k] != 0.0 {
                out.push((jv(c, dim), jv(k, dim), pc.du[c][k]));
            }
        }
    }
}

/// Couplings `(test jet index, trial jet index, value)` of block `(fi, fj)`.
pub(crate) fn point_terms(
    kind: &FormKind,
    fi: usize,
    fj: usize,
    dim: usize,
    ncomp: usize,
    pc: &PointCoeffs,
    out: &mut Vec<Term>,
) {
    out.clear();
    match *kind {
        FormKind::Mass { c } => {
            for comp in 0..ncomp {
                out.push((jv(comp, dim), jv(comp, dim), c));
            }
        }
        FormKind::Stiffness { kappa } => stiffness_terms(kappa, ncomp, dim, out),
        FormKind::ConvectionDiffusion { nu } => {
            stiffness_terms(nu, ncomp, dim, out);
            for comp in 0..ncomp {
                for k in 0..dim {
                    out.push((jv(comp, dim), jg(comp, k, dim), pc.wind[k]));
                }
            }
        }
        FormKind::Stokes { re } => match (fi, fj) {
            (0, 0) => stiffness_terms(1.0 / re, dim, dim, out),
            (0, 1) => (0..dim).for_each(|c| out.push((jg(c, c, dim), jv(0, dim), -1.0))),
            (1, 0) => (0..dim).for_each(|c| out.push((jv(0, dim), jg(c, c, dim), 1.0))),
            _ => {}
        },
        FormKind::NavierStokesJacobian { re } => match (fi, fj) {
            (0, 0) => momentum_terms(1.0 / re, pc, dim, out),
            (0, 1) => (0..dim).for_each(|c| out.push((jg(c, c, dim), jv(0, dim), -1.0))),
            (1, 0) => (0..dim).for_each(|c| out.push((jv(0, dim), jg(c, c, dim), 1.0))),
            _ => {}
        },
        FormKind::RayleighBenardJacobian { ra, pr } => match (fi, fj) {
            (0, 0) => momentum_terms(1.0, pc, dim, out),
            (0, 1) => (0..dim).for_each(|c| out.push((jg(c, c, dim), jv(0, dim), -1.0))),
            (0, 2) => out.push((jv(dim - 1, dim), jv(0, dim), ra / pr)),
            (1, 0) => (0..dim).for_each(|c| out.push((jv(0, dim), jg(c, c, dim), 1.0))),
            (2, 0) => (0..dim).for_each(|k| out.push((jv(0, dim), jv(k, dim), pc.dt[k]))),
            (2, 2) => {
                stiffness_terms(pr, 1, dim, out);
                for k in 0..dim {
                    out.push((jv(0, dim), jg(0, k, dim), pc.u[k]));
                }
            }
            _ => {}
        },
    }
}

/// Test-jet coefficients of the residual for every field at one point.
/// `jets[f]` is the state jet of field `f`; `g[f]` receives the result.
pub(crate) fn residual_point(kind: &ResidualKind, dim: usize, x: &[f64; 3], jets: &[Vec<f64>], g: &mut [Vec<f64>]) {
    for gf in g.iter_mut() {
        gf.iter_mut().for_each(|v| *v = 0.0);
    }
    match kind {
        ResidualKind::Poisson { kappa, forcing } => {
            for k in 0..dim {
                g[0][jg(0, k, dim)] = kappa * jets[0][jg(0, k, dim)];
            }
            g[0][jv(0, dim)] = -forcing(&x[..dim]);
        }
        ResidualKind::NavierStokes { .. } | ResidualKind::RayleighBenard { .. } => {
            let (nu, buoyancy) = match *kind {
                ResidualKind::NavierStokes { re } => (1.0 / re, 0.0),
                ResidualKind::RayleighBenard { ra, pr } => (1.0, ra / pr),
                _ => unreachable!(),
            };
            let u = &jets[0];
            let p = jets[1][jv(0, dim)];
            let mut div = 0.0;
            for c in 0..dim {
                let mut conv = 0.0;
                for k in 0..dim {
                    conv += u[jv(k, dim)] * u[jg(c, k, dim)];
                    g[0][jg(c, k, dim)] = nu * u[jg(c, k, dim)];
                }
                g[0][jg(c, c, dim)] -= p;
                g[0][jv(c, dim)] = conv;
                div += u[jg(c, c, dim)];
            }
            g[1][jv(0, dim)] = div;
            if let ResidualKind::RayleighBenard { pr, .. } = *kind {
                let t = &jets[2];
                g[0][jv(dim - 1, dim)] += buoyancy * t[jv(0, dim)];
                let mut adv = 0.0;
                for k in 0..dim {
                    adv += u[jv(k, dim)] * t[jg(0, k, dim)];
                    g[2][jg(0, k, dim)] = pr * t[jg(0, k, dim)];
                }
                g[2][jv(0, dim)] = adv;
            }
        }
    }
}
