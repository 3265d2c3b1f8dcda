//! Structured simplicial meshes of the unit square and unit cube.
//!
//! Squares are split along the lower-left to upper-right diagonal; cubes use
//! the Kuhn (Freudenthal) split into six tetrahedra sharing the main diagonal.
//! Boundary facets carry a marker identifying the coordinate plane they lie on:
//! `1..=2` for `x = 0, 1`, `3..=4` for `y = 0, 1` and `5..=6` for `z = 0, 1`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const MARKER_X0: u32 = 1;
pub const MARKER_X1: u32 = 2;
pub const MARKER_Y0: u32 = 3;
pub const MARKER_Y1: u32 = 4;
pub const MARKER_Z0: u32 = 5;
pub const MARKER_Z1: u32 = 6;
/// Boundary facets off the coordinate planes (only the reference simplex has them).
pub const MARKER_OTHER: u32 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub vertices: Vec<usize>,
    pub marker: u32,
    /// The single cell incident to this facet.
    pub cell: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 3]>,
    cells: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
    vertex_to_cells: Vec<Vec<usize>>,
}

impl Mesh {
    /// Regular triangulation of `[0,1]^2` with `n` squares per side.
    pub fn unit_square(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidArgument("unit_square needs n >= 1".into()));
        }
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h, 0.0]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(6 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                cells.extend_from_slice(&[v00, v10, v11]);
                cells.extend_from_slice(&[v00, v11, v01]);
            }
        }
        Ok(Mesh::from_cells(2, vertices, cells))
    }

    /// Kuhn-split tetrahedral mesh of `[0,1]^3` with `n` cubes per side.
    pub fn unit_cube(n: usize) -> Result<Mesh> {
        if n == 0 {
            return Err(Error::InvalidArgument("unit_cube needs n >= 1".into()));
        }
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1).pow(3));
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([i as f64 * h, j as f64 * h, k as f64 * h]);
                }
            }
        }
        let id = |c: [usize; 3]| (c[2] * (n + 1) + c[1]) * (n + 1) + c[0];
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut cells = Vec::with_capacity(24 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut tet = [id(c), 0, 0, 0];
                        for (step, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[step + 1] = id(c);
                        }
                        cells.extend_from_slice(&tet);
                    }
                }
            }
        }
        // Odd permutations produce negatively oriented tetrahedra.
        let mut mesh_cells = cells;
        for t in mesh_cells.chunks_mut(4) {
            if signed_volume(3, &vertices, t) < 0.0 {
                t.swap(2, 3);
            }
        }
        Ok(Mesh::from_cells(3, vertices, mesh_cells))
    }

    /// The reference simplex as a one-cell mesh.
    pub fn reference_simplex(dim: usize) -> Result<Mesh> {
        match dim {
            2 => Ok(Mesh::from_cells(2, vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![0, 1, 2])),
            3 => Ok(Mesh::from_cells(
                3,
                vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                vec![0, 1, 2, 3],
            )),
            _ => Err(Error::InvalidArgument(format!("unsupported dimension {dim}"))),
        }
    }

    fn from_cells(dim: usize, vertices: Vec<[f64; 3]>, cells: Vec<usize>) -> Mesh {
        let nv = dim + 1;
        let ncells = cells.len() / nv;
        let mut vertex_to_cells = vec![Vec::new(); vertices.len()];
        for c in 0..ncells {
            for &v in &cells[c * nv..(c + 1) * nv] {
                vertex_to_cells[v].push(c);
            }
        }

        // Facets seen exactly once are on the boundary.
        let mut count: HashMap<Vec<usize>, (usize, usize, usize)> = HashMap::new();
        let mut order = Vec::new();
        for c in 0..ncells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for omit in 0..nv {
                let mut key: Vec<usize> = (0..nv).filter(|&i| i != omit).map(|i| cell[i]).collect();
                key.sort_unstable();
                let entry = count.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    (0, c, omit)
                });
                entry.0 += 1;
            }
        }
        let mut boundary_facets = Vec::new();
        for key in order {
            let (hits, cell, omit) = count[&key];
            if hits != 1 {
                continue;
            }
            let cv = &cells[cell * nv..(cell + 1) * nv];
            let facet: Vec<usize> = (0..nv).filter(|&i| i != omit).map(|i| cv[i]).collect();
            let marker = plane_marker(dim, &vertices, &facet).unwrap_or(MARKER_OTHER);
            boundary_facets.push(BoundaryFacet { vertices: facet, marker, cell });
        }

        Mesh { dim, vertices, cells, boundary_facets, vertex_to_cells }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.vertices[v][..self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn vertex_to_cells(&self, v: usize) -> &[usize] {
        &self.vertex_to_cells[v]
    }

    /// Cells sharing vertex `v`, sorted by id.
    pub fn vertex_patch(&self, v: usize) -> Result<&[usize]> {
        self.vertex_to_cells
            .get(v)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::InvalidArgument(format!("vertex {v} out of range")))
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_volume(self.dim, &self.vertices, self.cell(c))
    }

    /// Affine map of cell `c`: origin vertex and Jacobian columns `v_i - v_0`.
    pub fn cell_jacobian(&self, c: usize) -> ([f64; 3], [[f64; 3]; 3]) {
        let cell = self.cell(c);
        let v0 = self.vertices[cell[0]];
        let mut jac = [[0.0; 3]; 3];
        for (col, &v) in cell[1..].iter().enumerate() {
            for row in 0..self.dim {
                jac[row][col] = self.vertices[v][row] - v0[row];
            }
        }
        (v0, jac)
    }

    /// Plain-text dump: vertex list followed by cell list.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "vertices {}", self.num_vertices());
        for v in 0..self.num_vertices() {
            let coords: Vec<String> = self.vertex(v).iter().map(|x| format!("{x:.17e}")).collect();
            let _ = writeln!(out, "{}", coords.join(" "));
        }
        let _ = writeln!(out, "cells {}", self.num_cells());
        for cell in self.cells() {
            let ids: Vec<String> = cell.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{}", ids.join(" "));
        }
        out
    }
}

fn signed_volume(dim: usize, vertices: &[[f64; 3]], cell: &[usize]) -> f64 {
    let v0 = vertices[cell[0]];
    let e = |i: usize, k: usize| vertices[cell[i]][k] - v0[k];
    match dim {
        2 => 0.5 * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0)),
        3 => {
            let det = e(1, 0) * (e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1))
                - e(1, 1) * (e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0))
                + e(1, 2) * (e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0));
            det / 6.0
        }
        _ => unreachable!("meshes are 2D or 3D"),
    }
}

fn plane_marker(dim: usize, vertices: &[[f64; 3]], facet: &[usize]) -> Option<u32> {
    const TOL: f64 = 1e-12;
    for axis in 0..dim {
        for (side, value) in [(0u32, 0.0), (1u32, 1.0)] {
            if facet.iter().all(|&v| (vertices[v][axis] - value).abs() < TOL) {
                return Some(2 * axis as u32 + side + 1);
            }
        }
    }
    None
}
