//! Sparse variational Gaussian process with a binomial likelihood.

pub mod kernel;
pub(crate) mod linalg;
pub mod objective;
pub mod predict;
pub mod state;
pub mod train;

pub use kernel::{gram, kernel_matrix, RbfKernel};
pub use objective::{elbo_gp_grad, ElboGrad};
pub use predict::{link_moments, GpPosterior};
pub use state::{elbo_gp, joint_kl_to_reference, kl_divergence, q_g_marginals, GpVariationalState, Observations};
pub use train::{train_gp, GpConfig, GpDiagnostics};

pub use crate::likelihood::expected_log_lik;
