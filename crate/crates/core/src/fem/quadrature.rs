//! Quadrature on the reference triangle `(0,0),(1,0),(0,1)` and the reference
//! tetrahedron `(0,0,0),(1,0,0),(0,1,0),(0,0,1)`.
//!
//! Degree 0 and 1 use the centroid rule. Higher degrees use collapsed
//! (Duffy) products of Gauss–Jacobi rules, which are exact for the requested
//! polynomial degree.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 8;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn make_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("no quadrature for dimension {dim}")));
    }
    if degree > MAX_DEGREE {
        return Err(Error::InvalidArgument(format!("quadrature degree {degree} unsupported (max {MAX_DEGREE})")));
    }
    if degree <= 1 {
        let (c, w) = if dim == 2 { (1.0 / 3.0, 0.5) } else { (0.25, 1.0 / 6.0) };
        let mut p = [0.0; 3];
        p[..dim].iter_mut().for_each(|x| *x = c);
        return Ok(QuadratureRule { dim, degree, points: vec![p], weights: vec![w] });
    }

    let npts = degree / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if dim == 2 {
        let (a, wa) = gauss_jacobi_unit(npts, 1);
        let (b, wb) = gauss_jacobi_unit(npts, 0);
        for i in 0..npts {
            for j in 0..npts {
                points.push([a[i], b[j] * (1.0 - a[i]), 0.0]);
                weights.push(wa[i] * wb[j]);
            }
        }
    } else {
        let (a, wa) = gauss_jacobi_unit(npts, 2);
        let (b, wb) = gauss_jacobi_unit(npts, 1);
        let (c, wc) = gauss_jacobi_unit(npts, 0);
        for i in 0..npts {
            for j in 0..npts {
                for k in 0..npts {
                    let y = b[j] * (1.0 - a[i]);
                    let z = c[k] * (1.0 - a[i]) * (1.0 - b[j]);
                    points.push([a[i], y, z]);
                    weights.push(wa[i] * wb[j] * wc[k]);
                }
            }
        }
    }
    Ok(QuadratureRule { dim, degree, points, weights })
}

/// Gauss–Jacobi rule on `[0,1]` for the weight `(1-x)^alpha`, by Golub–Welsch.
fn gauss_jacobi_unit(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let a = alpha as f64;
    let b = 0.0;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        jac[(k, k)] = if k == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (s * (s + 2.0)) };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + a + b;
            let num = 4.0 * m * (m + a) * (m + b) * (m + a + b);
            let den = s * s * (s + 1.0) * (s - 1.0);
            let off = (num / den).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    // Integral of the weight over [-1,1].
    let mu0 = 2f64.powf(a + 1.0) / (a + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((x + 1.0) / 2.0, mu0 * v0 * v0 / 2f64.powf(a + 1.0))
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}
