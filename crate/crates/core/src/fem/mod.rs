//! Reference elements, quadrature, function spaces and boundary conditions.

mod bc;
mod element;
mod quadrature;
mod space;

pub use bc::{BcSet, BoundaryValue, DirichletBC};
pub use element::{LagrangeElement, Tabulation, MAX_ELEMENT_DEGREE};
pub use quadrature::{make_quadrature, QuadratureRule, MAX_DEGREE as MAX_QUADRATURE_DEGREE};
pub use space::{Function, FunctionSpace, MixedSpace};
