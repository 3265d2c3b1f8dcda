use super::kernel::cell_geometry;
use crate::error::Result;
use crate::fem::{FunctionSpace, MAX_QUADRATURE_DEGREE};

/// `|u_h - u|` in L2 over the mesh, for all components of `space`.
pub fn l2_error(space: &FunctionSpace, values: &[f64], exact: impl Fn(&[f64], &mut [f64])) -> Result<f64> {
    let mesh = space.mesh();
    let dim = mesh.dim();
    let nc = space.ncomp();
    let (rule, tab) = space.tabulation((2 * space.degree() + 3).min(MAX_QUADRATURE_DEGREE))?;
    let mut sum = 0.0;
    let mut uq = vec![0.0; nc];
    let mut ue = vec![0.0; nc];
    for c in 0..mesh.num_cells() {
        let geom = cell_geometry(mesh, c)?;
        let nodes = space.cell_nodes(c);
        for (q, xi) in rule.points.iter().enumerate() {
            uq.iter_mut().for_each(|v| *v = 0.0);
            for (a, &node) in nodes.iter().enumerate() {
                let phi = tab.value(q, a);
                for comp in 0..nc {
                    uq[comp] += phi * values[node * nc + comp];
                }
            }
            let x = geom.physical_point(xi, dim);
            exact(&x[..dim], &mut ue);
            let e2: f64 = uq.iter().zip(&ue).map(|(a, b)| (a - b) * (a - b)).sum();
            sum += rule.weights[q] * geom.det * e2;
        }
    }
    Ok(sum.sqrt())
}
