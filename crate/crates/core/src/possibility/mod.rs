//! Gaussian possibility functions and their weighted max-mixtures.
//!
//! A Gaussian possibility peaks at 1 on its mean; a max-mixture takes the
//! pointwise maximum of weighted Gaussians, so its supremum is its largest
//! weight. Both are closed under products and positive powers.

mod gaussian;
mod mixture;

pub use gaussian::{eval_gaussian, gaussian_product, hellinger_distance, GaussianComponent, PIVOT_FLOOR};
pub use mixture::{MaxMixture, MixtureReduction};

pub(crate) use gaussian::{factorize, mahalanobis_sq, symmetrize};
