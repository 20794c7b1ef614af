//! Linear response of finite-state Markov jump processes out of equilibrium.
//!
//! The crate computes response kernels exactly through the generator, checks
//! them against independent finite-difference and Monte Carlo routes, and
//! evaluates the occupation-measure rate function of the unperturbed process.

pub mod fluctuations;
pub mod markov;
pub mod models;
pub mod numerics;
pub mod perturbation;
pub mod pathspace;
pub mod response;
