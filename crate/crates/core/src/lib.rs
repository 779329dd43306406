//! Boundary control of the LWR traffic-flow conservation law.
//!
//! The crate couples a Godunov finite-volume integrator with weak boundary
//! conditions to convex synthesis of the boundary inputs: at every control
//! step the boundary densities are chosen as minimal-norm solutions of
//! stability (Lyapunov) and invariance (barrier) constrained problems, either
//! separately or jointly through the relaxed compound formulation.
//!
//! Modules:
//! - [`flux`]: the concave flux, its primitive, the Godunov numerical flux,
//!   and an exact Riemann sampler used as a validation oracle.
//! - [`solver`]: the finite-volume integrator with CFL-limited stepping.
//! - [`functionals`]: Lyapunov and barrier functionals, boundary-rate
//!   functions, class-K budgets.
//! - [`synthesis`]: the six single-objective boundary-control problems.
//! - [`compound`]: the relaxed joint stability-and-invariance problems.
//! - [`oracle`]: grid brute-force reference solvers.
//! - [`scenario`]: closed-loop orchestration, config, CSV and plot output.
//! - [`cli`]: the `lwrctl` command-line interface.

pub mod cli;
pub mod compound;
pub mod error;
pub mod flux;
pub mod functionals;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod synthesis;

pub use error::{Error, Result};
