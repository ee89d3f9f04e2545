//! Mean-field variational Bayesian neural network surrogate.

pub mod arch;
pub mod predict;
pub mod train;
pub mod variational;

pub use arch::{forward, forward_logits, BnnArchitecture, LayerShape};
pub use predict::{predict_bnn, sample_outputs};
pub use train::{kaiming_uniform, pretrain_prior, train_bnn, BnnConfig};
pub use variational::{elbo_bnn, elbo_bnn_fixed, kl_weights, layer_std, BnnDiagnostics, BnnPosterior, BnnPrior};
