//! Finite-dimensional quantum information manifold: Gibbs states of form-bounded
//! perturbations, the Bogoliubov–Kubo–Mori metric, (+1)-affine charts and the
//! Luxemburg seminorm, with numerical verification suites.

pub mod atlas;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod gibbs;
pub mod io;
pub mod operator;
pub mod perturbation;
pub mod quadrature;
pub mod sampling;
pub mod suites;

pub use error::{Error, Result};
pub use exec::Execution;
pub use gibbs::{gibbs_state, GibbsState, TangentVector};
pub use operator::{build_model, HermitianOperator, ModelHamiltonian, ModelKind, ModelParams};
pub use suites::{run_battery, run_suite, Suite, SuiteConfig, SuiteReport};
