use thiserror::Error;

use crate::krylov::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("degenerate cell {cell}: volume {volume:e}")]
    DegenerateCell { cell: usize, volume: f64 },

    #[error("form `{form}` requires coefficient `{name}`")]
    MissingCoefficient { form: String, name: String },

    #[error("index set is not a concatenation of fields")]
    NoFieldMatch,

    #[error("{pc} requires PDE-level context: {what}")]
    MissingContext { pc: String, what: String },

    #[error("unknown {kind} type `{name}` (known: {})", known.join(", "))]
    UnknownType { kind: &'static str, name: String, known: Vec<&'static str> },

    #[error("option -{key}: {msg}")]
    Options { key: String, msg: String },

    #[error("options prefix_pop without matching prefix_push")]
    UnbalancedPrefix,

    #[error("fieldsplit at prefix `{prefix}`: {msg}")]
    MissingFields { prefix: String, msg: String },

    #[error("preconditioner `{0}` used before setUp")]
    NotSetUp(String),

    #[error("zero pivot in row {row}")]
    ZeroPivot { row: usize },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("Krylov solve diverged: not a number at iteration {iteration}")]
    DivergedNaN { iteration: usize },

    #[error("Krylov breakdown at iteration {iteration}")]
    Breakdown { iteration: usize },

    #[error("CG detected an indefinite operator or preconditioner at iteration {iteration}")]
    IndefiniteOperator { iteration: usize },

    #[error("Krylov solve reached max_it = {max_it} without converging")]
    DivergedMaxIts { max_it: usize },

    #[error("inner solve `{prefix}` failed: {source}")]
    InnerSolveFailed {
        prefix: String,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve in Newton step {step} failed: {report:?}")]
    LinearSolveFailed { step: usize, report: Box<SolveReport> },

    #[error("Newton reached max_it = {max_it}; |F| = {norm:e}")]
    NewtonDivergedMaxIts { max_it: usize, norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn inner(prefix: &str, source: Error) -> Error {
        match source {
            // keep the innermost prefix, which names the failing solver
            e @ Error::InnerSolveFailed { .. } => e,
            e => Error::InnerSolveFailed { prefix: prefix.to_string(), source: Box::new(e) },
        }
    }
}
