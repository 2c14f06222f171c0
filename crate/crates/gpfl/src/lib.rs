//! Learning inverse dynamics of serial manipulators with Gaussian process
//! regression, and closing the loop with feedback-linearizing controllers
//! driven by the learned model.
//!
//! The crate is organized bottom-up:
//!
//! - [`dynamics`]: rigid-body model, recursive inverse dynamics, mass matrix,
//!   forward dynamics, energies.
//! - [`sim`]: fixed-step simulation, reference trajectory generators, logging.
//! - [`gpr`]: exact GP regression with squared-exponential, polynomial and
//!   structured inverse-dynamics kernels, plus hyperparameter optimization.
//! - [`dyncomp`]: extraction of gravity, inertia and velocity-product terms
//!   from a trained model by probing it at selected inputs.
//! - [`control`]: PD and feedback-linearizing control laws.
//! - [`cli`]: the experiment pipeline behind the `gpfl` binary.

pub mod cli;
pub mod control;
pub mod dyncomp;
pub mod dynamics;
pub mod error;
pub mod gpr;
pub mod sim;

pub use error::{Error, Result};
