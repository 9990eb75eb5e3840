//! Numerical laboratory for complex Hessian equations on the unit ball.
//!
//! Grids are integer lattices clipped to the ball, with Shortley–Weller arms
//! reaching the sphere exactly. On top of the discrete complex Hessian sit a
//! Dirichlet solver, a Picard iteration for `u`-dependent right-hand sides,
//! relative capacities and a handful of numerical property checks.

pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod forms;
pub mod grid;
pub mod hermitian;
pub mod io;
pub mod linalg;
pub mod picard;
pub mod properties;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
