use std::sync::Arc;

use indexmap::IndexMap;

use super::{pc_header, Preconditioner, Viewer};
use crate::error::{Error, Result};
use crate::fem::{BcSet, FunctionSpace, MixedSpace};
use crate::forms::{Form, FormKind, ProblemContext};
use crate::krylov::{KspStats, SharedKsp};
use crate::operators::{ImplicitOperator, IndexSet, LinearOperator, NullSpace, OperatorRef};

/// How the pressure Laplacian is made invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcdBcVariant {
    /// Pin the first pressure dof (homogeneous Dirichlet there).
    Pin,
    /// Keep pure Neumann and project out constants; needs an iterative Kp solve.
    Nullspace,
}

impl PcdBcVariant {
    pub const NAMES: [&'static str; 2] = ["pin", "nullspace"];

    pub fn parse(s: &str) -> Option<PcdBcVariant> {
        match s {
            "pin" => Some(PcdBcVariant::Pin),
            "nullspace" => Some(PcdBcVariant::Nullspace),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PcdBcVariant::Pin => "pin",
            PcdBcVariant::Nullspace => "nullspace",
        }
    }
}

/// The pressure field behind an implicit diagonal block, with its context.
struct PressureBlock {
    space: Arc<FunctionSpace>,
    context: Arc<ProblemContext>,
}

fn pressure_block(pc: &str, pmat: &dyn LinearOperator) -> Result<PressureBlock> {
    let missing = |what: String| Error::MissingContext { pc: pc.to_string(), what };
    let imp =
        pmat.as_implicit().ok_or_else(|| missing(format!("an implicit pressure block, got {}", pmat.describe())))?;
    let rows = imp.row_field_ids();
    if rows.len() != 1 || !imp.is_diagonal_block() {
        return Err(missing(format!("a single-field diagonal block, got fields {rows:?}")));
    }
    let space = imp.space().field(rows[0]).clone();
    if space.ncomp() != 1 {
        return Err(missing("a scalar pressure field".into()));
    }
    Ok(PressureBlock { space, context: imp.context().clone() })
}

fn reynolds(pc: &str, ctx: &ProblemContext) -> Result<f64> {
    ctx.constant("Re").ok_or_else(|| Error::MissingContext { pc: pc.to_string(), what: "constant `Re`".into() })
}

fn assembled(form: Form, bcs: BcSet) -> Result<OperatorRef> {
    Ok(Arc::new(ImplicitOperator::new(Arc::new(form), Arc::new(bcs))?.assemble()?))
}

fn matfree(form: Form, bcs: BcSet) -> Result<OperatorRef> {
    Ok(Arc::new(ImplicitOperator::new(Arc::new(form), Arc::new(bcs))?))
}

struct PcdState {
    fp: OperatorRef,
    pinned: Option<usize>,
    nullspace: Option<NullSpace>,
    n: usize,
}

/// Pressure convection–diffusion approximation of the inverse Schur
/// complement: `z = Kp^{-1} Fp Mp^{-1} r`.
pub struct PcdPc {
    prefix: String,
    mp: SharedKsp,
    kp: SharedKsp,
    mp_matfree: bool,
    kp_matfree: bool,
    fp_matfree: bool,
    variant: PcdBcVariant,
    state: Option<PcdState>,
}

impl std::fmt::Debug for PcdPc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PcdPc").field("prefix", &self.prefix).field("variant", &self.variant).finish()
    }
}

impl PcdPc {
    /// `mp` and `kp` are the inner solvers; the `*_matfree` flags choose
    /// whether the corresponding operator is left implicit.
    pub fn new(prefix: &str, mp: SharedKsp, kp: SharedKsp, mat_types: [bool; 3], variant: PcdBcVariant) -> PcdPc {
        let [mp_matfree, kp_matfree, fp_matfree] = mat_types;
        PcdPc { prefix: prefix.to_string(), mp, kp, mp_matfree, kp_matfree, fp_matfree, variant, state: None }
    }

    /// Set up from explicit operators instead of a PDE context.
    pub fn set_up_with(&mut self, mp: OperatorRef, kp: OperatorRef, fp: OperatorRef) -> Result<()> {
        let n = fp.nrows();
        self.mp.lock().expect("poisoned").set_operators(mp.clone(), mp);
        self.kp.lock().expect("poisoned").set_operators(kp.clone(), kp);
        self.state = Some(PcdState { fp, pinned: None, nullspace: None, n });
        Ok(())
    }
}

impl Preconditioner for PcdPc {
    fn type_name(&self) -> &'static str {
        "pcd"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let block = pressure_block("pcd", pmat.as_ref())?;
        let re = reynolds("pcd", &block.context)?;
        let velocity = block.context.function("velocity").cloned().ok_or_else(|| Error::MissingContext {
            pc: "pcd".into(),
            what: "function `velocity` (current state)".into(),
        })?;
        let ps = MixedSpace::single(block.space.clone());
        let n = ps.num_dofs();
        let plain = Arc::new(ProblemContext::new());
        let windy = Arc::new(ProblemContext::new().with_constant("Re", re).with_function("wind", velocity));
        let build = |matfree_op: bool, form: Form, bcs: BcSet| {
            if matfree_op {
                matfree(form, bcs)
            } else {
                assembled(form, bcs)
            }
        };

        let mp =
            build(self.mp_matfree, Form::new(FormKind::Mass { c: 1.0 }, ps.clone(), plain.clone())?, BcSet::empty(n))?;
        let (kp_bcs, pinned, nullspace) = match self.variant {
            PcdBcVariant::Pin => (BcSet::from_dofs(n, &[(0, 0.0)])?, Some(0), None),
            PcdBcVariant::Nullspace => {
                (BcSet::empty(n), None, Some(NullSpace::constant_on(n, &IndexSet::range(0, n))?))
            }
        };
        let mut kp = build(self.kp_matfree, Form::new(FormKind::Stiffness { kappa: 1.0 }, ps.clone(), plain)?, kp_bcs)?;
        if let Some(ns) = &nullspace {
            kp = with_nullspace(kp, ns.clone())?;
        }
        let fp = build(
            self.fp_matfree,
            Form::new(FormKind::ConvectionDiffusion { nu: 1.0 / re }, ps, windy)?,
            BcSet::empty(n),
        )?;
        self.mp.lock().expect("poisoned").set_operators(mp.clone(), mp);
        self.kp.lock().expect("poisoned").set_operators(kp.clone(), kp);
        self.state = Some(PcdState { fp, pinned, nullspace, n });
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let st = self.state.as_ref().ok_or_else(|| Error::NotSetUp("pcd".into()))?;
        let mut t = vec![0.0; st.n];
        self.mp.lock().expect("poisoned").solve(r, &mut t)?;
        let mut u = vec![0.0; st.n];
        st.fp.apply(&t, &mut u)?;
        if let Some(p) = st.pinned {
            u[p] = 0.0;
        }
        if let Some(ns) = &st.nullspace {
            ns.project(&mut u);
        }
        self.kp.lock().expect("poisoned").solve(&u, z)?;
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "pcd");
        let mt = |m: bool| if m { "matfree" } else { "aij" };
        v.line(&format!(
            "Mp {}, Kp {}, Fp {}; Kp boundary treatment: {}",
            mt(self.mp_matfree),
            mt(self.kp_matfree),
            mt(self.fp_matfree),
            self.variant.name()
        ));
        v.line("KSP solver for Mp:");
        v.push();
        self.mp.lock().expect("poisoned").view(v);
        v.pop();
        v.line("KSP solver for Kp:");
        v.push();
        self.kp.lock().expect("poisoned").view(v);
        v.pop();
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        self.mp.lock().expect("poisoned").collect_stats(out);
        self.kp.lock().expect("poisoned").collect_stats(out);
    }
}

fn with_nullspace(op: OperatorRef, ns: NullSpace) -> Result<OperatorRef> {
    if let Some(imp) = op.as_implicit() {
        let fresh = ImplicitOperator::new(imp.form().clone(), imp.bcs().clone())?.with_nullspace(ns);
        return Ok(Arc::new(fresh));
    }
    let csr = op.as_csr().expect("operators here are implicit or assembled").clone();
    Ok(Arc::new(crate::operators::AssembledOperator::new(csr).with_nullspace(ns)))
}

/// Inverse pressure mass matrix scaled by `1/Re`: the Stokes-limit Schur approximation.
#[derive(Debug)]
pub struct MassPc {
    prefix: String,
    inner: SharedKsp,
    scale: f64,
    ready: bool,
}

impl MassPc {
    pub fn new(prefix: &str, inner: SharedKsp) -> MassPc {
        MassPc { prefix: prefix.to_string(), inner, scale: 1.0, ready: false }
    }
}

impl Preconditioner for MassPc {
    fn type_name(&self) -> &'static str {
        "mass"
    }

    fn set_up(&mut self, _a: &OperatorRef, pmat: &OperatorRef) -> Result<()> {
        let block = pressure_block("mass", pmat.as_ref())?;
        self.scale = 1.0 / reynolds("mass", &block.context)?;
        let ps = MixedSpace::single(block.space);
        let n = ps.num_dofs();
        let mp =
            assembled(Form::new(FormKind::Mass { c: 1.0 }, ps, Arc::new(ProblemContext::new()))?, BcSet::empty(n))?;
        self.inner.lock().expect("poisoned").set_operators(mp.clone(), mp);
        self.ready = true;
        Ok(())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) -> Result<()> {
        if !self.ready {
            return Err(Error::NotSetUp("mass".into()));
        }
        self.inner.lock().expect("poisoned").solve(r, z)?;
        z.iter_mut().for_each(|v| *v *= self.scale);
        Ok(())
    }

    fn view(&self, v: &mut Viewer) {
        pc_header(v, &self.prefix, "mass");
        v.line("pressure mass matrix scaled by 1/Re");
        self.inner.lock().expect("poisoned").view(v);
        v.pop();
    }

    fn collect_stats(&self, out: &mut IndexMap<String, KspStats>) {
        self.inner.lock().expect("poisoned").collect_stats(out);
    }
}
