//! Numerical laboratory for reflection symmetry of semilinear parabolic
//! Dirichlet problems on x1-symmetric grids.
//!
//! The crate provides, in rough dependency order:
//!
//! - [`domain`]: discretized symmetric domains with exact half-grid
//!   reflection maps and cap-component caches;
//! - [`field`]: grid functions with an implicit zero boundary trace;
//! - [`reflection`]: the reflection difference `V_lambda` and the quantized
//!   moving-plane functional, with an exhaustive oracle;
//! - [`nonlinearity`]: a catalog of reaction terms and decaying forcings,
//!   plus samplers that check the declared symmetry and Lipschitz metadata;
//! - [`solver`]: semi-implicit time stepping (implicit diffusion, explicit
//!   reaction) with trajectory diagnostics;
//! - [`equilibria`]: damped-Newton steady states, classification by the
//!   moving-plane functional and nodal structure, linearization and leading
//!   eigenpairs;
//! - [`dynamics`]: functional tracking along trajectories, omega-limit
//!   estimation, constructed connecting orbits, and the verification
//!   harness for the symmetry and classification statements;
//! - [`io`]: binary snapshots with text sidecars and CSV emitters.

pub mod domain;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod field;
pub mod io;
mod linalg;
pub mod nonlinearity;
pub mod reflection;
pub mod solver;

pub use domain::{Domain, Reflected};
pub use error::{CoreError, Result};
pub use field::Field;
pub use reflection::{
    capital_lambda, capital_lambda_bruteforce, monotone_defect, symmetry_defect, HalfGridLambda,
    LambdaResult,
};
