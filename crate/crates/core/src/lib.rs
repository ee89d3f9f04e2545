//! Smoothed model checking with stochastic variational inference.
//!
//! The crate learns the satisfaction probability of a signal temporal logic
//! property over the whole parameter space of a parametric population CTMC
//! from a limited number of simulated runs, and wraps the learned predictor
//! with distribution-free error bounds.
//!
//! Pipeline overview:
//!
//! 1. [`pctmc`] describes the model family and simulates it with Gillespie's
//!    direct method.
//! 2. [`stl`] parses properties and monitors them on simulated trajectories.
//! 3. [`dataset`] turns (parameter, trajectory batch) pairs into binomial
//!    observations.
//! 4. [`gp`] and [`bnn`] fit Bayesian surrogates of the satisfaction function
//!    by maximizing an evidence lower bound with Adam.
//! 5. [`guarantees`] calibrates conformal, Chernoff and PAC-Bayes bounds and
//!    [`metrics`] scores the surrogate on held-out data.

pub mod bnn;
pub mod dataset;
pub mod error;
pub mod gp;
pub mod guarantees;
pub mod likelihood;
pub mod metrics;
pub mod optim;
pub mod pctmc;
pub mod posterior;
pub mod quadrature;
pub mod rng;
pub mod stl;

pub use error::{Error, Result};
pub use posterior::{Posterior, PosteriorBundle, Predictive};
