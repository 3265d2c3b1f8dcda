//! Lagrange elements of degree 1–4 on the reference simplex.
//!
//! Nodes sit at equispaced barycentric points. The nodal basis is obtained by
//! inverting a Vandermonde matrix against an orthonormalised monomial basis,
//! so no degree-specific shape functions are hand-coded.

use nalgebra::DMatrix;

use super::quadrature::{make_quadrature, QuadratureRule};
use crate::error::{Error, Result};

pub const MAX_ELEMENT_DEGREE: usize = 4;

#[derive(Debug, Clone)]
pub struct LagrangeElement {
    dim: usize,
    degree: usize,
    ncomp: usize,
    /// Barycentric multi-index of each node; entry 0 belongs to the origin vertex.
    multi_indices: Vec<[u8; 4]>,
    nodes: Vec<[f64; 3]>,
    exponents: Vec<[u32; 3]>,
    /// Monomial coefficients of each nodal basis function (monomials x nodes).
    coeffs: DMatrix<f64>,
}

/// Basis values and reference gradients at a set of reference points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub npoints: usize,
    pub nbasis: usize,
    pub dim: usize,
    /// `values[q * nbasis + a]`
    pub values: Vec<f64>,
    /// `grads[(q * nbasis + a) * dim + k]`
    pub grads: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, q: usize, a: usize) -> f64 {
        self.values[q * self.nbasis + a]
    }

    #[inline]
    pub fn grad(&self, q: usize, a: usize) -> &[f64] {
        let s = (q * self.nbasis + a) * self.dim;
        &self.grads[s..s + self.dim]
    }
}

impl LagrangeElement {
    pub fn new(dim: usize, degree: usize, ncomp: usize) -> Result<LagrangeElement> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("unsupported dimension {dim}")));
        }
        if !(1..=MAX_ELEMENT_DEGREE).contains(&degree) {
            return Err(Error::InvalidArgument(format!("Lagrange degree {degree} not in 1..=4")));
        }
        if ncomp == 0 {
            return Err(Error::InvalidArgument("element needs at least one component".into()));
        }

        let mut multi_indices = Vec::new();
        let k = degree as u8;
        for a1 in 0..=k {
            for a2 in 0..=(k - a1) {
                if dim == 2 {
                    multi_indices.push([k - a1 - a2, a1, a2, 0]);
                } else {
                    for a3 in 0..=(k - a1 - a2) {
                        multi_indices.push([k - a1 - a2 - a3, a1, a2, a3]);
                    }
                }
            }
        }
        // Vertices first (in reference vertex order), then higher-dimensional entities.
        multi_indices.sort_by_key(|m| {
            let support = m.iter().filter(|&&x| x > 0).count();
            let key: Vec<i32> = m.iter().map(|&x| -(x as i32)).collect();
            (support, key)
        });
        let nodes: Vec<[f64; 3]> = multi_indices
            .iter()
            .map(|m| {
                let mut x = [0.0; 3];
                for i in 0..dim {
                    x[i] = m[i + 1] as f64 / degree as f64;
                }
                x
            })
            .collect();

        let mut exponents = Vec::new();
        for total in 0..=degree as u32 {
            for e0 in (0..=total).rev() {
                for e1 in (0..=(total - e0)).rev() {
                    if dim == 2 {
                        if e0 + e1 == total {
                            exponents.push([e0, e1, 0]);
                        }
                    } else {
                        exponents.push([e0, e1, total - e0 - e1]);
                    }
                }
            }
        }
        let nb = exponents.len();
        debug_assert_eq!(nb, nodes.len());

        // Orthonormalise the monomials under the L2 inner product of the simplex.
        let rule = make_quadrature(dim, 2 * degree)?;
        let mut gram = DMatrix::<f64>::zeros(nb, nb);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let m: Vec<f64> = exponents.iter().map(|e| monomial(e, p)).collect();
            for i in 0..nb {
                for j in 0..nb {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        let chol = gram.cholesky().ok_or_else(|| Error::InvalidArgument("singular monomial Gram matrix".into()))?;
        let l_inv = chol.l().try_inverse().ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;

        // Vandermonde of the orthonormal basis at the nodes.
        let mut mono_at_nodes = DMatrix::<f64>::zeros(nb, nb);
        for (j, x) in nodes.iter().enumerate() {
            for (i, e) in exponents.iter().enumerate() {
                mono_at_nodes[(i, j)] = monomial(e, x);
            }
        }
        let vander = (&l_inv * &mono_at_nodes).transpose();
        let vinv = vander.try_inverse().ok_or_else(|| Error::InvalidArgument("singular Vandermonde matrix".into()))?;
        let coeffs = l_inv.transpose() * vinv;

        Ok(LagrangeElement { dim, degree, ncomp, multi_indices, nodes, exponents, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn multi_indices(&self) -> &[[u8; 4]] {
        &self.multi_indices
    }

    /// Scalar nodal basis values and reference gradients at `points`.
    pub fn tabulate_points(&self, points: &[[f64; 3]]) -> Tabulation {
        let nb = self.num_nodes();
        let d = self.dim;
        let mut values = vec![0.0; points.len() * nb];
        let mut grads = vec![0.0; points.len() * nb * d];
        let mut m = vec![0.0; nb];
        let mut dm = vec![[0.0; 3]; nb];
        for (q, p) in points.iter().enumerate() {
            for (i, e) in self.exponents.iter().enumerate() {
                m[i] = monomial(e, p);
                dm[i] = monomial_grad(e, p);
            }
            for a in 0..nb {
                let mut v = 0.0;
                let mut g = [0.0; 3];
                for i in 0..nb {
                    let c = self.coeffs[(i, a)];
                    v += c * m[i];
                    for k in 0..d {
                        g[k] += c * dm[i][k];
                    }
                }
                values[q * nb + a] = v;
                grads[(q * nb + a) * d..(q * nb + a + 1) * d].copy_from_slice(&g[..d]);
            }
        }
        Tabulation { npoints: points.len(), nbasis: nb, dim: d, values, grads }
    }

    pub fn tabulate(&self, rule: &QuadratureRule) -> Result<Tabulation> {
        if rule.dim != self.dim {
            return Err(Error::ShapeMismatch { expected: self.dim, got: rule.dim });
        }
        Ok(self.tabulate_points(&rule.points))
    }
}

fn monomial(e: &[u32; 3], p: &[f64; 3]) -> f64 {
    p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32)
}

fn monomial_grad(e: &[u32; 3], p: &[f64; 3]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for k in 0..3 {
        if e[k] == 0 {
            continue;
        }
        let mut v = e[k] as f64;
        for j in 0..3 {
            let pow = if j == k { e[j] as i32 - 1 } else { e[j] as i32 };
            v *= p[j].powi(pow);
        }
        g[k] = v;
    }
    g
}
