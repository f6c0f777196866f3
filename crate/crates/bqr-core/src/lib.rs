//! Convex relaxations of quadratic programs over intersections of balls.
//!
//! The crate builds and solves a ladder of conic relaxations for problems of
//! the form `min q(x)` subject to `||x - c_i|| <= r_i` for `i = 1..m`:
//!
//! * the Shor SDP relaxation, optionally strengthened by linear RLT products,
//!   Kronecker RLT blocks, or the Zhen et al. two-norm blocks ([`relaxations`]),
//! * the lifted relaxation with one extra variable modeling `||x||^2`
//!   ([`relaxations::build_burer`]), its exact two-ball variant, and the full
//!   level-2 moment relaxation,
//! * an embedded homogeneous self-dual interior-point solver over nonnegative,
//!   second-order, and semidefinite cone blocks ([`solver`]),
//! * a brute-force / multistart global-minimum oracle ([`oracle`]), and
//! * eigenvalue-level certification of the domination and decomposition
//!   structure relating all of the above ([`certify`]).
//!
//! Batch drivers parallelize over instances with rayon when the `parallel`
//! feature (default) is enabled; see [`batch`].

pub mod batch;
pub mod certify;
pub mod instance;
pub mod liftmaps;
pub mod matcone;
pub mod oracle;
pub mod relaxations;
pub mod solver;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Dimension or shape mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A size cap (matrix dimension, monomial count) was exceeded.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// An iterative numerical procedure failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Invalid user-facing configuration (flags, generator parameters, ...).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An on-disk artifact failed schema validation.
    #[error("schema validation: {0}")]
    Schema(String),
    /// A certification routine was called on input violating its hypothesis.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Best-effort decomposition search did not produce a valid certificate.
    #[error("decomposition not found: {0}")]
    DecompositionNotFound(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
