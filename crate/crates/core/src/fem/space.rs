use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use smallvec::SmallVec;

use super::element::{LagrangeElement, Tabulation};
use super::quadrature::{make_quadrature, QuadratureRule};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::operators::IndexSet;

type NodeKey = SmallVec<[(usize, u8); 4]>;

/// A continuous Lagrange space. Vector-valued spaces interleave their
/// components per node: `dof = node * ncomp + comp`.
#[derive(Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: Arc<LagrangeElement>,
    cell_nodes: Vec<usize>,
    num_nodes: usize,
    node_entities: Vec<SmallVec<[usize; 4]>>,
    node_coords: Vec<[f64; 3]>,
    tabulations: Mutex<HashMap<usize, (Arc<QuadratureRule>, Arc<Tabulation>)>>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, element: LagrangeElement) -> Result<Arc<FunctionSpace>> {
        if element.dim() != mesh.dim() {
            return Err(Error::ShapeMismatch { expected: mesh.dim(), got: element.dim() });
        }
        let k = element.degree() as u8;
        let nloc = element.num_nodes();
        let nv = mesh.num_vertices();
        let mut numbering: HashMap<NodeKey, usize> = HashMap::new();
        let mut node_entities: Vec<SmallVec<[usize; 4]>> = (0..nv).map(|v| SmallVec::from_slice(&[v])).collect();
        let mut node_coords: Vec<[f64; 3]> = (0..nv)
            .map(|v| {
                let mut x = [0.0; 3];
                x[..mesh.dim()].copy_from_slice(mesh.vertex(v));
                x
            })
            .collect();
        let mut cell_nodes = Vec::with_capacity(mesh.num_cells() * nloc);
        let mut next = nv;
        for cell in mesh.cells() {
            for m in element.multi_indices() {
                let mut key: NodeKey = SmallVec::new();
                for (i, &a) in m.iter().enumerate().take(mesh.dim() + 1) {
                    if a > 0 {
                        key.push((cell[i], a));
                    }
                }
                key.sort_unstable();
                let id = if key.len() == 1 {
                    debug_assert_eq!(key[0].1, k);
                    key[0].0
                } else {
                    *numbering.entry(key.clone()).or_insert_with(|| {
                        let id = next;
                        next += 1;
                        let mut x = [0.0; 3];
                        for &(v, a) in &key {
                            for (d, xd) in mesh.vertex(v).iter().enumerate() {
                                x[d] += a as f64 / k as f64 * xd;
                            }
                        }
                        node_entities.push(key.iter().map(|&(v, _)| v).collect());
                        node_coords.push(x);
                        id
                    })
                };
                cell_nodes.push(id);
            }
        }
        Ok(Arc::new(FunctionSpace {
            mesh,
            element: Arc::new(element),
            cell_nodes,
            num_nodes: next,
            node_entities,
            node_coords,
            tabulations: Mutex::new(HashMap::new()),
        }))
    }

    pub fn lagrange(mesh: &Arc<Mesh>, degree: usize) -> Result<Arc<FunctionSpace>> {
        FunctionSpace::new(mesh.clone(), LagrangeElement::new(mesh.dim(), degree, 1)?)
    }

    pub fn vector_lagrange(mesh: &Arc<Mesh>, degree: usize) -> Result<Arc<FunctionSpace>> {
        FunctionSpace::new(mesh.clone(), LagrangeElement::new(mesh.dim(), degree, mesh.dim())?)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &LagrangeElement {
        &self.element
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn ncomp(&self) -> usize {
        self.element.ncomp()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.ncomp()
    }

    pub fn local_dofs(&self) -> usize {
        self.element.num_nodes() * self.ncomp()
    }

    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        let n = self.element.num_nodes();
        &self.cell_nodes[c * n..(c + 1) * n]
    }

    /// Global dofs of cell `c` in local order `a * ncomp + comp`.
    pub fn cell_dofs(&self, c: usize, out: &mut Vec<usize>) {
        out.clear();
        let nc = self.ncomp();
        for &node in self.cell_nodes(c) {
            for comp in 0..nc {
                out.push(node * nc + comp);
            }
        }
    }

    /// Mesh vertices spanning the entity a node belongs to.
    pub fn node_entity(&self, node: usize) -> &[usize] {
        &self.node_entities[node]
    }

    pub fn node_coords(&self, node: usize) -> &[f64] {
        &self.node_coords[node][..self.mesh.dim()]
    }

    /// Quadrature rule of the given degree together with this element's tabulation on it.
    pub fn tabulation(&self, degree: usize) -> Result<(Arc<QuadratureRule>, Arc<Tabulation>)> {
        let mut cache = self.tabulations.lock().expect("tabulation cache poisoned");
        if let Some(entry) = cache.get(&degree) {
            return Ok(entry.clone());
        }
        let rule = Arc::new(make_quadrature(self.mesh.dim(), degree)?);
        let tab = Arc::new(self.element.tabulate(&rule)?);
        cache.insert(degree, (rule.clone(), tab.clone()));
        Ok((rule, tab))
    }

    /// Sorted dofs whose nodes lie on boundary facets carrying any of `markers`.
    pub fn boundary_dofs(&self, markers: &[u32]) -> Vec<usize> {
        let mut on = vec![false; self.num_nodes];
        let nv = self.mesh.dim() + 1;
        for facet in self.mesh.boundary_facets() {
            if !markers.contains(&facet.marker) {
                continue;
            }
            let cell = self.mesh.cell(facet.cell);
            let nodes = self.cell_nodes(facet.cell);
            for (a, m) in self.element.multi_indices().iter().enumerate() {
                let inside = (0..nv).all(|i| m[i] == 0 || facet.vertices.contains(&cell[i]));
                if inside {
                    on[nodes[a]] = true;
                }
            }
        }
        let nc = self.ncomp();
        let mut dofs = Vec::new();
        for (node, flag) in on.iter().enumerate() {
            if *flag {
                dofs.extend((0..nc).map(|c| node * nc + c));
            }
        }
        dofs
    }

    /// Nodal interpolation of `f(x, out)` where `out` has `ncomp` entries.
    pub fn interpolate(&self, f: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
        let nc = self.ncomp();
        let mut values = vec![0.0; self.num_dofs()];
        for node in 0..self.num_nodes {
            f(self.node_coords(node), &mut values[node * nc..(node + 1) * nc]);
        }
        values
    }

    /// Evaluate a coefficient vector at reference point `xi` of cell `c`.
    pub fn evaluate_in_cell(&self, values: &[f64], c: usize, xi: [f64; 3]) -> Vec<f64> {
        let t = self.element.tabulate_points(&[xi]);
        let nc = self.ncomp();
        let mut out = vec![0.0; nc];
        for (a, &node) in self.cell_nodes(c).iter().enumerate() {
            for comp in 0..nc {
                out[comp] += t.value(0, a) * values[node * nc + comp];
            }
        }
        out
    }

    /// Values at the mesh vertices (vertex nodes are numbered first).
    pub fn vertex_values(&self, values: &[f64], comp: usize) -> Vec<f64> {
        let nc = self.ncomp();
        (0..self.mesh.num_vertices()).map(|v| values[v * nc + comp]).collect()
    }
}

/// Ordered tuple of spaces with field-major global numbering.
#[derive(Debug, Clone)]
pub struct MixedSpace {
    fields: Vec<Arc<FunctionSpace>>,
    offsets: Vec<usize>,
}

impl MixedSpace {
    pub fn new(fields: Vec<Arc<FunctionSpace>>) -> Result<Arc<MixedSpace>> {
        if fields.is_empty() {
            return Err(Error::InvalidArgument("mixed space needs at least one field".into()));
        }
        let mesh = fields[0].mesh();
        if fields.iter().any(|f| !Arc::ptr_eq(f.mesh(), mesh)) {
            return Err(Error::InvalidArgument("all fields must share one mesh".into()));
        }
        let mut offsets = vec![0];
        for f in &fields {
            offsets.push(offsets.last().unwrap() + f.num_dofs());
        }
        Ok(Arc::new(MixedSpace { fields, offsets }))
    }

    pub fn single(space: Arc<FunctionSpace>) -> Arc<MixedSpace> {
        MixedSpace::new(vec![space]).expect("one field")
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.fields[0].mesh()
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, i: usize) -> &Arc<FunctionSpace> {
        &self.fields[i]
    }

    pub fn fields(&self) -> &[Arc<FunctionSpace>] {
        &self.fields
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn num_dofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn field_index_set(&self, i: usize) -> IndexSet {
        IndexSet::range(self.offsets[i], self.offsets[i + 1])
    }

    pub fn field_index_sets(&self) -> Vec<IndexSet> {
        (0..self.num_fields()).map(|i| self.field_index_set(i)).collect()
    }
}

/// A finite element function: a view into a (possibly mixed) coefficient vector.
#[derive(Debug, Clone)]
pub struct Function {
    pub space: Arc<FunctionSpace>,
    values: Arc<Vec<f64>>,
    offset: usize,
}

impl Function {
    pub fn new(space: Arc<FunctionSpace>, values: Vec<f64>) -> Result<Function> {
        if values.len() != space.num_dofs() {
            return Err(Error::ShapeMismatch { expected: space.num_dofs(), got: values.len() });
        }
        Ok(Function { space, values: Arc::new(values), offset: 0 })
    }

    /// Field `i` of a mixed coefficient vector, without copying.
    pub fn field_of(mixed: &MixedSpace, i: usize, values: Arc<Vec<f64>>) -> Result<Function> {
        if values.len() != mixed.num_dofs() {
            return Err(Error::ShapeMismatch { expected: mixed.num_dofs(), got: values.len() });
        }
        Ok(Function { space: mixed.field(i).clone(), values, offset: mixed.offset(i) })
    }

    pub fn values(&self) -> &[f64] {
        &self.values[self.offset..self.offset + self.space.num_dofs()]
    }

    pub fn storage_len(&self) -> usize {
        self.space.num_dofs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dof_counts() {
        let m = Arc::new(Mesh::unit_square(2).unwrap());
        assert_eq!(FunctionSpace::lagrange(&m, 1).unwrap().num_dofs(), 9);
        assert_eq!(FunctionSpace::lagrange(&m, 2).unwrap().num_dofs(), 25);
        let v = FunctionSpace::vector_lagrange(&m, 2).unwrap();
        let p = FunctionSpace::lagrange(&m, 1).unwrap();
        let th = MixedSpace::new(vec![v, p]).unwrap();
        assert_eq!(th.field_index_set(0), IndexSet::range(0, 50));
        assert_eq!(th.field_index_set(1), IndexSet::range(50, 59));
        assert_eq!(th.num_dofs(), 59);
    }

    #[test]
    fn closed_form_counts_on_larger_meshes() {
        for n in [1, 3, 4] {
            let m = Arc::new(Mesh::unit_square(n).unwrap());
            for k in 1..=4 {
                let s = FunctionSpace::lagrange(&m, k).unwrap();
                assert_eq!(s.num_dofs(), (k * n + 1).pow(2));
            }
            let m3 = Arc::new(Mesh::unit_cube(n).unwrap());
            for k in 1..=3 {
                let s = FunctionSpace::lagrange(&m3, k).unwrap();
                assert_eq!(s.num_dofs(), (k * n + 1).pow(3));
            }
        }
    }

    #[test]
    fn p1_dofs_are_vertex_ids() {
        let m = Arc::new(Mesh::unit_square(3).unwrap());
        let s = FunctionSpace::lagrange(&m, 1).unwrap();
        for c in 0..m.num_cells() {
            assert_eq!(s.cell_nodes(c), m.cell(c));
        }
    }

    #[test]
    fn shared_nodes_coincide() {
        let m = Arc::new(Mesh::unit_square(3).unwrap());
        let s = FunctionSpace::lagrange(&m, 3).unwrap();
        // Every node's coordinates match the cell-local node it was created from.
        for c in 0..m.num_cells() {
            let (v0, jac) = m.cell_jacobian(c);
            for (a, &node) in s.cell_nodes(c).iter().enumerate() {
                let xi = s.element().nodes()[a];
                for d in 0..2 {
                    let x = v0[d] + jac[d][0] * xi[0] + jac[d][1] * xi[1];
                    assert!((x - s.node_coords(node)[d]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn boundary_dof_selection() {
        let m = Arc::new(Mesh::unit_square(2).unwrap());
        let p1 = FunctionSpace::lagrange(&m, 1).unwrap();
        assert_eq!(p1.boundary_dofs(&[1, 2, 3, 4]).len(), 8);
        assert!(p1.boundary_dofs(&[]).is_empty());
        let m1 = Arc::new(Mesh::unit_square(1).unwrap());
        let p2 = FunctionSpace::lagrange(&m1, 2).unwrap();
        let left = p2.boundary_dofs(&[1]);
        assert_eq!(left.len(), 3);
        for d in left {
            assert!(p2.node_coords(d)[0].abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (dim, kmax) in [(2usize, 4usize), (3, 3)] {
            let m = Arc::new(if dim == 2 { Mesh::unit_square(3).unwrap() } else { Mesh::unit_cube(2).unwrap() });
            for k in 1..=kmax {
                let s = FunctionSpace::lagrange(&m, k).unwrap();
                let poly = |x: &[f64]| -> f64 {
                    let z = if dim == 3 { x[2] } else { 0.3 };
                    (x[0] + 2.0 * x[1] - z + 0.5).powi(k as i32) + x[1].powi(k as i32)
                };
                let vals = s.interpolate(|x, out| out[0] = poly(x));
                for _ in 0..20 {
                    let c = rng.gen_range(0..m.num_cells());
                    let mut xi = [0.0; 3];
                    let mut rest = 1.0;
                    for xk in xi.iter_mut().take(dim) {
                        *xk = rng.gen::<f64>() * rest;
                        rest -= *xk;
                    }
                    let (v0, jac) = m.cell_jacobian(c);
                    let mut x = [0.0; 3];
                    for d in 0..dim {
                        x[d] = v0[d] + (0..dim).map(|j| jac[d][j] * xi[j]).sum::<f64>();
                    }
                    let got = s.evaluate_in_cell(&vals, c, xi)[0];
                    assert!((got - poly(&x[..dim])).abs() < 1e-10, "dim {dim} k {k}");
                }
            }
        }
    }
}
