//! A fixed catalogue of weak forms with global assembly, residual
//! evaluation and matrix-free element-loop application.

mod assembly;
mod kernel;
mod norms;

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::fem::{Function, MixedSpace, MAX_QUADRATURE_DEGREE};

pub(crate) use assembly::action_flops;
pub use assembly::{
    apply_action, apply_action_transpose, assemble_matrix, assemble_residual, element_matrix, element_matrix_adjoint,
    jacobian_check, BlockLayout,
};
pub use kernel::{cell_geometry, simplex_geometry, CellGeometry};
pub use norms::l2_error;

/// Named constants and functions available to forms and preconditioners.
#[derive(Debug, Clone, Default)]
pub struct ProblemContext {
    constants: IndexMap<String, f64>,
    functions: IndexMap<String, Function>,
}

impl ProblemContext {
    pub fn new() -> ProblemContext {
        ProblemContext::default()
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_function(mut self, name: &str, f: Function) -> Self {
        self.functions.insert(name.to_string(), f);
        self
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.get(name)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.constants.keys().chain(self.functions.keys()).map(String::as_str)
    }
}

/// Bilinear forms. Field layouts: single-field kinds act on one (scalar or
/// vector) field; Navier–Stokes kinds on (velocity, pressure); Rayleigh–Bénard
/// kinds on (velocity, pressure, temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormKind {
    /// `c (u, v)`
    Mass { c: f64 },
    /// `kappa (grad u, grad v)`
    Stiffness { kappa: f64 },
    /// `nu (grad u, grad v) + (w . grad u, v)` with wind `w` from coefficient "wind".
    ConvectionDiffusion { nu: f64 },
    /// Saddle point operator `[[F, -B^T], [B, 0]]` without convection.
    Stokes { re: f64 },
    /// Newton linearisation about coefficient "velocity".
    NavierStokesJacobian { re: f64 },
    /// Newton linearisation about coefficients "velocity" and "temperature".
    RayleighBenardJacobian { ra: f64, pr: f64 },
}

impl FormKind {
    pub fn name(&self) -> &'static str {
        match self {
            FormKind::Mass { .. } => "mass",
            FormKind::Stiffness { .. } => "stiffness",
            FormKind::ConvectionDiffusion { .. } => "convection_diffusion",
            FormKind::Stokes { .. } => "stokes",
            FormKind::NavierStokesJacobian { .. } => "navier_stokes_jacobian",
            FormKind::RayleighBenardJacobian { .. } => "rayleigh_benard_jacobian",
        }
    }

    pub fn num_fields(&self) -> usize {
        match self {
            FormKind::Mass { .. } | FormKind::Stiffness { .. } | FormKind::ConvectionDiffusion { .. } => 1,
            FormKind::Stokes { .. } | FormKind::NavierStokesJacobian { .. } => 2,
            FormKind::RayleighBenardJacobian { .. } => 3,
        }
    }

    pub fn required_coefficients(&self) -> &'static [&'static str] {
        match self {
            FormKind::ConvectionDiffusion { .. } => &["wind"],
            FormKind::NavierStokesJacobian { .. } => &["velocity"],
            FormKind::RayleighBenardJacobian { .. } => &["velocity", "temperature"],
            _ => &[],
        }
    }

    pub fn is_convective(&self) -> bool {
        matches!(
            self,
            FormKind::ConvectionDiffusion { .. }
                | FormKind::NavierStokesJacobian { .. }
                | FormKind::RayleighBenardJacobian { .. }
        )
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, FormKind::Mass { .. } | FormKind::Stiffness { .. })
    }
}

/// A bilinear form bound to a mixed space and the context supplying its coefficients.
#[derive(Clone)]
pub struct Form {
    kind: FormKind,
    space: Arc<MixedSpace>,
    context: Arc<ProblemContext>,
    qdeg: usize,
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Form").field("kind", &self.kind).field("qdeg", &self.qdeg).finish()
    }
}

fn check_layout(name: &str, space: &MixedSpace, nfields: usize) -> Result<()> {
    if space.num_fields() != nfields {
        return Err(Error::InvalidArgument(format!(
            "{name} expects {nfields} field(s), space has {}",
            space.num_fields()
        )));
    }
    if nfields >= 2 {
        let dim = space.mesh().dim();
        let ok = space.field(0).ncomp() == dim && space.fields()[1..].iter().all(|f| f.ncomp() == 1);
        if !ok {
            return Err(Error::InvalidArgument(format!("{name} expects (vector, scalar, ...) fields")));
        }
    }
    Ok(())
}

fn quadrature_degree(space: &MixedSpace, convective: bool) -> usize {
    let k = space.fields().iter().map(|f| f.degree()).max().unwrap_or(1);
    (2 * k + usize::from(convective)).min(MAX_QUADRATURE_DEGREE)
}

impl Form {
    pub fn new(kind: FormKind, space: Arc<MixedSpace>, context: Arc<ProblemContext>) -> Result<Form> {
        check_layout(kind.name(), &space, kind.num_fields())?;
        for &name in kind.required_coefficients() {
            let f = context
                .function(name)
                .ok_or_else(|| Error::MissingCoefficient { form: kind.name().to_string(), name: name.to_string() })?;
            if !Arc::ptr_eq(f.space.mesh(), space.mesh()) {
                return Err(Error::InvalidArgument(format!("coefficient `{name}` lives on another mesh")));
            }
        }
        let qdeg = quadrature_degree(&space, kind.is_convective());
        Ok(Form { kind, space, context, qdeg })
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    pub fn context(&self) -> &Arc<ProblemContext> {
        &self.context
    }

    pub fn quadrature_degree(&self) -> usize {
        self.qdeg
    }

    /// The same form with test and trial functions replaced by `space`.
    pub fn on_space(&self, space: Arc<MixedSpace>) -> Result<Form> {
        Form::new(self.kind, space, self.context.clone())
    }
}

pub type Forcing = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Nonlinear (or affine) residuals `F(u; v)`.
#[derive(Clone)]
pub enum ResidualKind {
    /// `kappa (grad u, grad v) - (f, v)`
    Poisson {
        kappa: f64,
        forcing: Forcing,
    },
    NavierStokes {
        re: f64,
    },
    RayleighBenard {
        ra: f64,
        pr: f64,
    },
}

impl fmt::Debug for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResidualKind::Poisson { kappa, .. } => write!(f, "Poisson {{ kappa: {kappa} }}"),
            ResidualKind::NavierStokes { re } => write!(f, "NavierStokes {{ re: {re} }}"),
            ResidualKind::RayleighBenard { ra, pr } => {
                write!(f, "RayleighBenard {{ ra: {ra}, pr: {pr} }}")
            }
        }
    }
}

impl ResidualKind {
    pub fn num_fields(&self) -> usize {
        match self {
            ResidualKind::Poisson { .. } => 1,
            ResidualKind::NavierStokes { .. } => 2,
            ResidualKind::RayleighBenard { .. } => 3,
        }
    }

    /// The exact linearisation of this residual.
    pub fn jacobian_kind(&self) -> FormKind {
        match *self {
            ResidualKind::Poisson { kappa, .. } => FormKind::Stiffness { kappa },
            ResidualKind::NavierStokes { re } => FormKind::NavierStokesJacobian { re },
            ResidualKind::RayleighBenard { ra, pr } => FormKind::RayleighBenardJacobian { ra, pr },
        }
    }

    fn is_convective(&self) -> bool {
        !matches!(self, ResidualKind::Poisson { .. })
    }
}

#[derive(Debug, Clone)]
pub struct ResidualForm {
    kind: ResidualKind,
    space: Arc<MixedSpace>,
    qdeg: usize,
}

impl ResidualForm {
    pub fn new(kind: ResidualKind, space: Arc<MixedSpace>) -> Result<ResidualForm> {
        check_layout("residual", &space, kind.num_fields())?;
        let qdeg = quadrature_degree(&space, kind.is_convective());
        Ok(ResidualForm { kind, space, qdeg })
    }

    pub fn kind(&self) -> &ResidualKind {
        &self.kind
    }

    pub fn space(&self) -> &Arc<MixedSpace> {
        &self.space
    }

    /// Context holding the state functions the Jacobian is linearised about.
    pub fn linearisation_context(&self, state: Arc<Vec<f64>>, base: &ProblemContext) -> Result<ProblemContext> {
        let mut ctx = base.clone();
        if self.kind.num_fields() >= 2 {
            ctx = ctx.with_function("velocity", Function::field_of(&self.space, 0, state.clone())?);
        }
        if let ResidualKind::RayleighBenard { .. } = self.kind {
            ctx = ctx.with_function("temperature", Function::field_of(&self.space, 2, state)?);
        }
        Ok(ctx)
    }

    /// Jacobian form at `state`.
    pub fn jacobian(&self, state: Arc<Vec<f64>>, base: &ProblemContext) -> Result<Form> {
        let ctx = self.linearisation_context(state, base)?;
        Form::new(self.kind.jacobian_kind(), self.space.clone(), Arc::new(ctx))
    }
}
