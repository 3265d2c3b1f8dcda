use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use super::{pc_header, Preconditioner, Viewer};
use crate::error::{Error, Result};
use crate::krylov::{KspStats, SharedKsp};
use crate::linalg::axpy;
use crate::operators::{check_shape, IndexSet, LinearOperator, NullSpace, OperatorRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurFactType {
    Diag,
    Lower,
    Upper,
    Full,
}

impl SchurFactType {
    pub const NAMES: [&'static str; 4] = ["diag", "lower", "upper", "full"];

    pub fn parse(s: &str) -> Option<SchurFactType> {
        Some(match s {
            "diag" => SchurFactType::Diag,
            "lower" => SchurFactType::Lower,
            "upper" => SchurFactType::Upper,
            "full" => SchurFactType::Full,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        Self::NAMES[*self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Additive,
    Multiplicative,
    Schur(SchurFactType),
}

impl SplitKind {
    pub const NAMES: [&'static str; 3] = ["additive", "multiplicative", "schur"];
}

/// `S = A11 - A10 inv(A00) A01`, applied with an inner solve for `A00`.
pub struct SchurComplement {
    a10: OperatorRef,
    a01: OperatorRef,
    a11: OperatorRef,
    inner: SharedKsp,
    nullspace: Option<NullSpace>,
}

impl fmt::Debug for SchurComplement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchurComplement").field("a11", &self.a11).finish()
    }
}

impl SchurComplement {
    /// `inner` must already hold the operators for `A00`.
    pub fn new(a10: OperatorRef, a01: OperatorRef, a11: OperatorRef, inner: SharedKsp) -> Result<SchurComplement> {
        check_shape(a11.nrows(), a10.nrows())?;
        check_shape(a11.ncols(), a01.ncols())?;
        check_shape(a10.ncols(), a01.nrows())?;
        let nullspace = a11.nullspace().cloned();
        Ok(SchurComplement { a10, a01, a11, inner, nullspace })
    }
}

impl LinearOperator for SchurComplement {
    fn nrows(&self) -> usize {
        self.a11.nrows()
    }

    fn ncols(&self) -> usize {
        self.a11.ncols()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let n0 = self.a01.nrows();
        let mut t = vec![0.0; n0];
        let mut u = vec![0.0; n0];
        self.a01.apply(x, &mut t)?;
        self.inner.lock().expect("inner ksp poisoned").solve(&t, &mut u)?;
        self.a11.apply(x, y)?;
        let mut w = vec![0.0; y.len()];
        self.a10.apply(&u, &mut w)?;
        axpy(-1.0, &w, y);
        Ok(())
    }

    fn nullspace(&self) -> Option<&NullSpace> {
        self.nullspace.as_ref()
    }

    fn memory_footprint(&self) -> usize {
        self.a10.memory_footprint() + self.a01.memory_footprint() + self.a11.memory_footprint()
    }

    fn flops_per_apply(&self) -> u64 {
        self.a10.flops_per_apply() + self.a01.flops_per_apply() + self.a11.flops_per_apply()
    }

    fn describe(&self) -> String {
        format!("schur complement with A11 = {}", self.a11.describe())
    }
}

struct Setup {
    sets: Vec<IndexSet>,
    /// `off[i][j]` for the blocks the composition needs.
    off: Vec<Vec<Option<OperatorRef>>>,
    n: usize,
}

/// Block preconditioner over a split of the operator's fields.
pub struct FieldSplitPc {
    prefix: String,
    kind: SplitKind,
    /// Field positions per split; `None` means one split per field.
    splits: Option<Vec<Vec<usize>>>,
    ksps: Vec<SharedKsp>,
    schur_inner: Option<SharedKsp>,
    setup: Option<Setup>,
}

impl fmt::Debug for FieldSplitPc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSplitPc").field("prefix", &self.prefix).field("kind", &self.kind).finish()
    }
}

impl FieldSplitPc {
    pub fn new(
        prefix: &str,
        kind: SplitKind,
        splits: Option<Vec<Vec<usize>>>,
        ksps: Vec<SharedKsp>,
        schur_inner: Option<SharedKsp>,
    ) -> Result<FieldSplitPc> {
        if let SplitKind::Schur(_) = kind {
            if ksps.len() != 2 {
                return Err(Error::MissingFields {
                    prefix: prefix.to_string(),
                    msg: format!("schur needs exactly 2 splits, got {}", ksps.len()),
                });
            }
        }
        if let Some(s) = &splits {
            if s.len() != ksps.len() {
                return Err(Error::MissingFields {
                    prefix: prefix.to_string(),
                    msg: format!("{} split definitions for {} solvers", s.len(), ksps.len()),
                });
            }
        }
        Ok(FieldSplitPc { prefix: prefix.to_string(), kind, splits, ksps, schur_inner, setup: None })
    }

    pub fn kind(&self) -> SplitKind {
        self.kind
    }

    pub fn sub_ksps(&self) -> &[SharedKsp] {
        &self.ksps
    }

    fn missing(&self, msg: String) -> Error {
        Error::MissingFields { prefix: self.prefix.clone(), msg }
    }

    fn solve(&self, i: usize, r: &[f64], z: &mut [f64]) -> Result<()> {
        self.ksps[i].lock().expect("split ksp poisoned").solve(r, z)?;
        Ok(())
    }
}

impl Preconditioner for FieldSplitPc {
    fn type_name(&self) -> &'static str {
        "fieldsplit"
    }

    fn set_up(&mut self, a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let fields =
            pmat.row_fields().ok_or_else(|| self.missing(format!("operator {} defines no fields", pmat.describe())))?;
        let splits: Vec<Vec<usize>> = match &self.splits {
            Some(s) => s.clone(),
            None => (0..fields.len()).map(|f| vec![f]).collect(),
        };
        if splits.len() != self.ksps.len() {
            return Err(self.missing(format!("{} splits but {} solvers", splits.len(), self.ksps.len())));
        }
        let mut seen = vec![false; fields.len()];
        for s in &splits {
            for &f in s {
                if f >= fields.len() || seen[f] {
                    return Err(
                        self.missing(format!("field {f} missing or used twice (operator has {})", fields.len()))
                    );
                }
                seen[f] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(self.missing("splits do not cover every field".into()));
        }
        let sets: Vec<IndexSet> = splits
            .iter()
            .map(|s| {
                let mut sorted = s.clone();
                sorted.sort_unstable();
                let parts: Vec<&IndexSet> = sorted.iter().map(|&f| &fields[f]).collect();
                IndexSet::concat(&parts)
            })
            .collect();
        let m = sets.len();
        let mut diag = Vec::with_capacity(m);
        for s in &sets {
            diag.push(pmat.extract_sub(s, s)?);
        }
        let mut off: Vec<Vec<Option<OperatorRef>>> = vec![vec![None; m]; m];
        match self.kind {
            SplitKind::Additive => {}
            SplitKind::Multiplicative => {
                for i in 0..m {
                    for j in 0..i {
                        off[i][j] = Some(a.extract_sub(&sets[i], &sets[j])?);
                    }
                }
            }
            SplitKind::Schur(_) => {
                off[0][1] = Some(a.extract_sub(&sets[0], &sets[1])?);
                off[1][0] = Some(a.extract_sub(&sets[1], &sets[0])?);
                off[1][1] = Some(a.extract_sub(&sets[1], &sets[1])?);
            }
        }
        match self.kind {
            SplitKind::Schur(_) => {
                self.ksps[0].lock().expect("poisoned").set_operators(diag[0].clone(), diag[0].clone());
                let inner = match &self.schur_inner {
                    Some(k) => {
                        k.lock().expect("poisoned").set_operators(diag[0].clone(), diag[0].clone());
                        k.clone()
                    }
                    None => self.ksps[0].clone(),
                };
                let s = SchurComplement::new(
                    off[1][0].clone().expect("set"),
                    off[0][1].clone().expect("set"),
                    off[1][1].clone().expect("set"),
                    inner,
                )?;
                self.ksps[1].lock().expect("poisoned").set_operators(Arc::new(s), diag[1].clone());
            }
            _ => {
                for (k, p) in self.ksps.iter().zip(&diag) {
                    k.lock().expect("poisoned").set_operators(p.clone(), p.clone());
                }
            }
        }
        self.setup = Some(Setup { sets, off, n: pmat.nrows() });
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let st = self.setup.as_ref().ok_or_else(|| Error::NotSetUp("fieldsplit".into()))?;
        check_shape(st.n, r.len())?;
        let rs: Vec<Vec<f64>> = st.sets.iter().map(|s| s.gather(r)).collect();
        let mut zs: Vec<Vec<f64>> = st.sets.iter().map(|s| vec![0.0; s.len()]).collect();
        match self.kind {
            SplitKind::Additive => {
                for i in 0..st.sets.len() {
                    self.solve(i, &rs[i], &mut zs[i])?;
                }
            }
            SplitKind::Multiplicative => {
                for i in 0..st.sets.len() {
                    let mut ri = rs[i].clone();
                    let mut t = vec![0.0; ri.len()];
                    for (j, zj) in zs.iter().enumerate().take(i) {
                        st.off[i][j].as_ref().expect("set").apply(zj, &mut t)?;
                        axpy(-1.0, &t, &mut ri);
                    }
                    self.solve(i, &ri, &mut zs[i])?;
                }
            }
            SplitKind::Schur(fact) => {
                let a01 = st.off[0][1].as_ref().expect("set");
                let a10 = st.off[1][0].as_ref().expect("set");
                let (z0, z1) = {
                    let (a, b) = zs.split_at_mut(1);
                    (&mut a[0], &mut b[0])
                };
                let mut t1 = vec![0.0; z1.len()];
                let mut t0 = vec![0.0; z0.len()];
                match fact {
                    SchurFactType::Diag => {
                        self.solve(0, &rs[0], z0)?;
                        self.solve(1, &rs[1], z1)?;
                    }
                    SchurFactType::Lower => {
                        self.solve(0, &rs[0], z0)?;
                        a10.apply(z0, &mut t1)?;
                        let mut r1 = rs[1].clone();
                        axpy(-1.0, &t1, &mut r1);
                        self.solve(1, &r1, z1)?;
                    }
                    SchurFactType::Upper => {
                        self.solve(1, &rs[1], z1)?;
                        a01.apply(z1, &mut t0)?;
                        let mut r0 = rs[0].clone();
                        axpy(-1.0, &t0, &mut r0);
                        self.solve(0, &r0, z0)?;
                    }
                    SchurFactType::Full => {
                        let mut y0 = vec![0.0; z0.len()];
                        self.solve(0, &rs[0], &mut y0)?;
                        a10.apply(&y0, &mut t1)?;
                        let mut r1 = rs[1].clone();
                        axpy(-1.0, &t1, &mut r1);
                        self.solve(1, &r1, z1)?;
                        a01.apply(z1, &mut t0)?;
                        let mut r0 = rs[0].clone();
                        axpy(-1.0, &t0, &mut r0);
                        self.solve(0, &r0, z0)?;
                    }
                }
            }
        }
        for (s, zi) in st.sets.iter().zip(&zs) {
            s.scatter(zi, z);
        }
        Ok(())
    }

    fn apply_transpose(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if self.kind != SplitKind::Additive {
            return Err(Error::Unsupported(format!("transpose of {:?} fieldsplit", self.kind)));
        }
        let st = self.setup.as_ref().ok_or_else(|| Error::NotSetUp("fieldsplit".into()))?;
        for (i, s) in st.sets.iter().enumerate() {
            let ri = s.gather(r);
            let mut zi = vec![0.0; ri.len()];
            self.ksps[i].lock().expect("poisoned").solve_transpose(&ri, &mut zi)?;
            s.scatter(&zi, z);
        }
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "fieldsplit");
        match self.kind {
            SplitKind::Additive => {
                v.line(&format!("FieldSplit with ADDITIVE composition: total splits = {}", self.ksps.len()))
            }
            SplitKind::Multiplicative => {
                v.line(&format!("FieldSplit with MULTIPLICATIVE composition: total splits = {}", self.ksps.len()))
            }
            SplitKind::Schur(f) => {
                v.line(&format!("FieldSplit with Schur preconditioner, factorization {}", f.name().to_uppercase()))
            }
        }
        for i in 0..self.ksps.len() {
            let fields = match &self.splits {
                Some(s) => s[i].iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", "),
                None => i.to_string(),
            };
            v.line(&format!("Split number {i} Fields {fields}"));
        }
        for (i, k) in self.ksps.iter().enumerate() {
            v.line(&format!("KSP solver for split {i}:"));
            v.push();
            k.lock().expect("poisoned").view(v);
            v.pop();
        }
        if let SplitKind::Schur(_) = self.kind {
            match &self.schur_inner {
                Some(k) => {
                    v.line("KSP solver for A00 inside S = A11 - A10 inv(A00) A01:");
                    v.push();
                    k.lock().expect("poisoned").view(v);
                    v.pop();
                }
                None => v.line("A00 inside S = A11 - A10 inv(A00) A01 uses the split 0 solver"),
            }
        }
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        for k in &self.ksps {
            k.lock().expect("poisoned").collect_stats(out);
        }
        if let Some(k) = &self.schur_inner {
            k.lock().expect("poisoned").collect_stats(out);
        }
    }
}
