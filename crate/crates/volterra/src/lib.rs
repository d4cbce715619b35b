//! Solver for linear first-kind Volterra integral equations
//! `int_a^x k(x, y) u(y) dy = f(x)` with smooth kernels and noisy right-hand
//! sides. Quadrature rules are generated from linear multistep methods;
//! step-size selection is either a-priori in the noise level or adaptive via
//! a balancing principle.

pub mod cli;
pub mod error;
pub mod harness;
pub mod msm;
pub mod polyalg;
pub mod quadrature;
pub mod solver;
pub mod stepsize;

pub use error::{Error, Result};
