//! Anytime model predictive control for constrained LTI systems.
//!
//! The solver embeds the MPC quadratic program in a virtual primal-dual
//! flow whose every iterate is a feasible control sequence, so the
//! computation can be cut off after any number of iterations and still
//! return a stabilizing input. The crate also ships the surrounding
//! machinery: plant modeling, terminal-set construction, a closed-loop
//! simulator under the one-sample-delay convention, and a CLI.

pub mod cli;
pub mod error;
pub mod numerics;
pub mod plant;
pub mod qpform;
pub mod reap;
pub mod sim;
pub mod terminal;

pub use error::Error;
