use std::fmt;
use std::sync::Arc;

use super::space::MixedSpace;
use crate::error::{Error, Result};

pub type BoundaryValue = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Strong Dirichlet condition on one field of a mixed space.
#[derive(Clone)]
pub struct DirichletBC {
    pub field: usize,
    pub markers: Vec<u32>,
    pub value: BoundaryValue,
}

impl fmt::Debug for DirichletBC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DirichletBC").field("field", &self.field).field("markers", &self.markers).finish()
    }
}

impl DirichletBC {
    pub fn new(field: usize, markers: &[u32], value: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        DirichletBC { field, markers: markers.to_vec(), value: Arc::new(value) }
    }

    pub fn homogeneous(field: usize, markers: &[u32]) -> Self {
        DirichletBC::new(field, markers, |_, out| out.iter_mut().for_each(|v| *v = 0.0))
    }
}

/// Dirichlet conditions resolved to global (mixed) dofs. When several
/// conditions claim a dof, the one listed last supplies its value.
#[derive(Debug, Clone)]
pub struct BcSet {
    dofs: Vec<usize>,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl BcSet {
    pub fn empty(ndofs: usize) -> BcSet {
        BcSet { dofs: Vec::new(), values: Vec::new(), mask: vec![false; ndofs] }
    }

    pub fn resolve(space: &MixedSpace, bcs: &[DirichletBC]) -> Result<BcSet> {
        let n = space.num_dofs();
        let mut mask = vec![false; n];
        let mut value_at = vec![0.0; n];
        for bc in bcs {
            if bc.field >= space.num_fields() {
                return Err(Error::InvalidArgument(format!("bc on field {} of {}", bc.field, space.num_fields())));
            }
            let fs = space.field(bc.field);
            let nc = fs.ncomp();
            let offset = space.offset(bc.field);
            let mut buf = vec![0.0; nc];
            for dof in fs.boundary_dofs(&bc.markers) {
                let node = dof / nc;
                (bc.value)(fs.node_coords(node), &mut buf);
                mask[offset + dof] = true;
                value_at[offset + dof] = buf[dof % nc];
            }
        }
        let dofs: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let values = dofs.iter().map(|&i| value_at[i]).collect();
        Ok(BcSet { dofs, values, mask })
    }

    /// Constraints given directly as (dof, value) pairs.
    pub fn from_dofs(ndofs: usize, pairs: &[(usize, f64)]) -> Result<BcSet> {
        let mut mask = vec![false; ndofs];
        let mut value_at = vec![0.0; ndofs];
        for &(d, v) in pairs {
            if d >= ndofs {
                return Err(Error::InvalidArgument(format!("constrained dof {d} of {ndofs}")));
            }
            mask[d] = true;
            value_at[d] = v;
        }
        let dofs: Vec<usize> = (0..ndofs).filter(|&i| mask[i]).collect();
        let values = dofs.iter().map(|&i| value_at[i]).collect();
        Ok(BcSet { dofs, values, mask })
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn is_constrained(&self, dof: usize) -> bool {
        self.mask[dof]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Overwrite constrained entries of `x` with the boundary values.
    pub fn apply_values(&self, x: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            x[d] = v;
        }
    }

    pub fn zero_constrained(&self, x: &mut [f64]) {
        for &d in &self.dofs {
            x[d] = 0.0;
        }
    }

    /// The same constrained dofs with homogeneous values.
    pub fn homogenized(&self) -> BcSet {
        BcSet { dofs: self.dofs.clone(), values: vec![0.0; self.dofs.len()], mask: self.mask.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FunctionSpace;
    use crate::mesh::Mesh;

    #[test]
    fn later_conditions_win() {
        let m = Arc::new(Mesh::unit_square(2).unwrap());
        let v = FunctionSpace::vector_lagrange(&m, 2).unwrap();
        let mixed = MixedSpace::single(v.clone());
        let lid = DirichletBC::new(0, &[4], |_, out| {
            out[0] = 1.0;
            out[1] = 0.0;
        });
        let walls = DirichletBC::homogeneous(0, &[1, 2, 3]);
        let bcs = BcSet::resolve(&mixed, &[lid, walls]).unwrap();
        assert_eq!(bcs.len(), v.boundary_dofs(&[1, 2, 3, 4]).len());
        for (&d, &val) in bcs.dofs().iter().zip(bcs.values()) {
            let x = v.node_coords(d / 2);
            let on_lid_interior = (x[1] - 1.0).abs() < 1e-14 && x[0] > 1e-14 && x[0] < 1.0 - 1e-14;
            let expect = if on_lid_interior && d % 2 == 0 { 1.0 } else { 0.0 };
            assert_eq!(val, expect);
        }
        for &d in bcs.dofs() {
            let node = d / 2;
            let x = v.node_coords(node);
            assert!(x.iter().any(|&c| c.abs() < 1e-14 || (c - 1.0).abs() < 1e-14));
        }
    }
}
