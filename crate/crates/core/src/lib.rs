//! Entropic Gromov-Wasserstein (EGW) distances between discrete measures.
//!
//! The quadratic EGW problem between centered measures splits into a
//! marginal-only constant and a smooth `d0 * d1`-dimensional problem
//! `min_{|A|_F <= M/2} 32 |A|_F^2 + OT_{A,eps}(mu0, mu1)`, whose gradient needs
//! one entropic OT plan. This crate provides:
//!
//! * [`measures`]: weighted point clouds, I/O, transforms, raster ingestion;
//! * [`sinkhorn`]: Sinkhorn with an a-posteriori bound on the plan error;
//! * [`egw`]: the objective, its gradient and Hessian, and the EGW value;
//! * [`solvers`]: accelerated first-order solvers and an `eps` continuation;
//! * [`bench`]: a timing harness over random Gaussian instances.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod egw;
pub mod error;
pub mod measures;
pub mod sinkhorn;
pub mod solvers;

pub use egw::{AuxMatrix, ProblemSpec};
pub use error::{EgwError, Result};
pub use measures::DiscreteMeasure;
pub use solvers::{solve, SolveConfig, SolveReport};
