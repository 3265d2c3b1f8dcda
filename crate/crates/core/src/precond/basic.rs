use std::sync::Arc;

use super::{pc_header, require_csr, Preconditioner, Viewer};
use crate::error::{Error, Result};
use crate::linalg::{BandLu, CsrMatrix};
use crate::operators::{NullSpace, OperatorRef};

fn not_set_up(name: &str) -> Error {
    Error::NotSetUp(name.to_string())
}

fn stand_in_label(name: &str, stand_in: Option<&str>) -> String {
    match stand_in {
        Some(orig) => format!("{name} (stand-in for {orig})"),
        None => name.to_string(),
    }
}

/// Pointwise inverse diagonal.
#[derive(Debug, Default)]
pub struct JacobiPc {
    prefix: String,
    inv_diag: Option<Vec<f64>>,
}

impl JacobiPc {
    pub fn new(prefix: &str) -> JacobiPc {
        JacobiPc { prefix: prefix.to_string(), inv_diag: None }
    }
}

impl Preconditioner for JacobiPc {
    fn type_name(&self) -> &'static str {
        "jacobi"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let csr = require_csr("jacobi", pmat.as_ref())?;
        let d = csr.diagonal();
        if let Some(row) = d.iter().position(|&x| x == 0.0) {
            return Err(Error::ZeroPivot { row });
        }
        self.inv_diag = Some(d.iter().map(|x| 1.0 / x).collect());
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let d = self.inv_diag.as_ref().ok_or_else(|| not_set_up("jacobi"))?;
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
            *zi = ri * di;
        }
        Ok(())
    }

    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.apply(r, z)
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "jacobi");
        v.pop();
    }
}

/// Symmetric successive over-relaxation with zero initial guess.
#[derive(Debug)]
pub struct SorPc {
    prefix: String,
    pub omega: f64,
    pub its: usize,
    stand_in: Option<&'static str>,
    mat: Option<OperatorRef>,
    diag: Vec<f64>,
}

impl SorPc {
    pub fn new(prefix: &str, omega: f64, its: usize) -> SorPc {
        SorPc { prefix: prefix.to_string(), omega, its, stand_in: None, mat: None, diag: Vec::new() }
    }

    pub fn standing_in_for(mut self, name: &'static str) -> Self {
        self.stand_in = Some(name);
        self
    }

    fn sweep(&self, a: &CsrMatrix, b: &[f64], x: &mut [f64]) {
        let n = a.nrows();
        x.iter_mut().for_each(|v| *v = 0.0);
        let w = self.omega;
        let relax = |i: usize, x: &mut [f64]| {
            let (cols, vals) = a.row(i);
            let mut s = b[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j as usize != i {
                    s -= v * x[j as usize];
                }
            }
            x[i] = (1.0 - w) * x[i] + w * s / self.diag[i];
        };
        for _ in 0..self.its {
            for i in 0..n {
                relax(i, x);
            }
            for i in (0..n).rev() {
                relax(i, x);
            }
        }
    }
}

impl Preconditioner for SorPc {
    fn type_name(&self) -> &'static str {
        "sor"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let csr = require_csr("sor", pmat.as_ref())?;
        let d = csr.diagonal();
        if let Some(row) = d.iter().position(|&x| x == 0.0) {
            return Err(Error::ZeroPivot { row });
        }
        self.diag = d;
        self.mat = Some(pmat.clone());
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let mat = self.mat.as_ref().ok_or_else(|| not_set_up("sor"))?;
        let a = mat.as_csr().expect("checked at set up");
        self.sweep(a, r, z);
        Ok(())
    }

    /// SSOR sweeps on the transposed matrix.
    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let mat = self.mat.as_ref().ok_or_else(|| not_set_up("sor"))?;
        let a = mat.as_csr().expect("checked at set up");
        self.sweep(&a.transpose(), r, z);
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, &stand_in_label("sor", self.stand_in));
        v.line(&format!("type = symmetric, iterations = {}, omega = {}", self.its, self.omega));
        v.pop();
    }
}

/// Incomplete LU without fill.
#[derive(Debug)]
pub struct Ilu0Pc {
    prefix: String,
    factors: Option<CsrMatrix>,
    diag_pos: Vec<usize>,
}

impl Ilu0Pc {
    pub fn new(prefix: &str) -> Ilu0Pc {
        Ilu0Pc { prefix: prefix.to_string(), factors: None, diag_pos: Vec::new() }
    }
}

impl Preconditioner for Ilu0Pc {
    fn type_name(&self) -> &'static str {
        "ilu"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let mut lu = require_csr("ilu", pmat.as_ref())?.clone();
        let n = lu.nrows();
        let rp: Vec<usize> = lu.row_ptr().iter().map(|&p| p as usize).collect();
        let ci: Vec<usize> = lu.col_idx().iter().map(|&c| c as usize).collect();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let pos = lu.find(i, i).ok_or(Error::ZeroPivot { row: i })?;
            diag_pos.push(pos);
        }
        let vals = lu.values_mut();
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for p in rp[i]..rp[i + 1] {
                marker[ci[p]] = p;
            }
            for p in rp[i]..rp[i + 1] {
                let k = ci[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::ZeroPivot { row: k });
                }
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag_pos[k] + 1..rp[k + 1] {
                    let m = marker[ci[q]];
                    if m != usize::MAX {
                        vals[m] -= lik * vals[q];
                    }
                }
            }
            for p in rp[i]..rp[i + 1] {
                marker[ci[p]] = usize::MAX;
            }
            if vals[diag_pos[i]] == 0.0 {
                return Err(Error::ZeroPivot { row: i });
            }
        }
        self.factors = Some(lu);
        self.diag_pos = diag_pos;
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let lu = self.factors.as_ref().ok_or_else(|| not_set_up("ilu"))?;
        let n = lu.nrows();
        for i in 0..n {
            let (cols, vals) = lu.row(i);
            let mut s = r[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if (j as usize) < i {
                    s -= v * z[j as usize];
                }
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = lu.row(i);
            let mut s = z[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if (j as usize) > i {
                    s -= v * z[j as usize];
                }
            }
            z[i] = s / lu.values()[self.diag_pos[i]];
        }
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "ilu");
        v.line("levels of fill = 0");
        v.pop();
    }
}

/// Direct solve with a banded LU after reverse Cuthill–McKee reordering.
#[derive(Debug)]
pub struct LuPc {
    prefix: String,
    stand_in: Option<&'static str>,
    lu: Option<Arc<BandLu>>,
    nullspace: Option<NullSpace>,
}

impl LuPc {
    pub fn new(prefix: &str) -> LuPc {
        LuPc { prefix: prefix.to_string(), stand_in: None, lu: None, nullspace: None }
    }

    pub fn standing_in_for(mut self, name: &'static str) -> Self {
        self.stand_in = Some(name);
        self
    }

    pub fn factor_bytes(&self) -> usize {
        self.lu.as_ref().map_or(0, |lu| lu.memory_footprint())
    }
}

impl Preconditioner for LuPc {
    fn type_name(&self) -> &'static str {
        "lu"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let csr = require_csr("lu", pmat.as_ref())?;
        self.nullspace = pmat.nullspace().cloned();
        let lu = match &self.nullspace {
            None => BandLu::factor(csr)?,
            Some(ns) => BandLu::factor(&pinned(csr, ns))?,
        };
        self.lu = Some(Arc::new(lu));
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.lu.as_ref().ok_or_else(|| not_set_up("lu"))?.solve(r, z);
        if let Some(ns) = &self.nullspace {
            ns.project(z);
        }
        Ok(())
    }

    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.lu.as_ref().ok_or_else(|| not_set_up("lu"))?.solve_transpose(r, z);
        if let Some(ns) = &self.nullspace {
            ns.project(z);
        }
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, &stand_in_label("lu", self.stand_in));
        v.line("banded LU, reverse Cuthill-McKee ordering, partial pivoting");
        v.pop();
    }
}

/// A singular matrix with a known nullspace made invertible by replacing one
/// row per nullspace vector with a unit row, at the vector's largest entry.
/// For a consistent right-hand side this picks one solution; projecting
/// afterwards gives the one orthogonal to the nullspace.
fn pinned(a: &CsrMatrix, ns: &NullSpace) -> CsrMatrix {
    let mut pins = Vec::new();
    for v in ns.vectors() {
        let k = (0..v.len())
            .filter(|i| !pins.contains(i))
            .max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs()))
            .expect("nonempty");
        pins.push(k);
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..a.nrows() {
        if pins.contains(&i) {
            triplets.push((i, i, 1.0));
            continue;
        }
        let (cols, vals) = a.row(i);
        triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j as usize, v)));
    }
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &triplets).expect("same shape")
}
