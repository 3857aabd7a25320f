//! Risk-averse static output-feedback synthesis against stealthy actuator
//! data-injection attacks on uncertain finite-horizon LTI systems.
//!
//! The library covers the full design pipeline:
//!
//! 1. [`model`] — plant, detector, controller and uncertainty-set types with
//!    validation of the standing assumptions (square fully-actuated system,
//!    invertible `B`, `C`, `C_J`, zero uncertainty inside the box).
//! 2. [`lifted`] — horizon-stacked block-Toeplitz operators mapping the
//!    stacked attack sequence to stacked state/output trajectories, and the
//!    closed-form, affine-in-`K` construction of the inverse attack map
//!    `kappa_inv`.
//! 3. [`impact`] — exact worst-case stealthy-attack impact (via the extreme
//!    singular values of `kappa_inv`), the convex impact proxy (a Ky Fan
//!    norm plus a Frobenius regularizer) and its subgradients.
//! 4. [`scenario`] — sampling of the uncertainty box, top-m order-statistic
//!    averages and empirical VaR/CVaR.
//! 5. [`optimizer`] — subgradient minimization of the empirical-CVaR
//!    objective over the feedback gain, with the combinatorial
//!    subset-constraint form kept as a cross-check.
//! 6. [`certificate`] — out-of-sample probabilistic certificates through the
//!    regularized incomplete beta function and Monte-Carlo probability of
//!    shortfall.

pub mod certificate;
pub mod error;
#[cfg(test)]
pub(crate) mod fixtures;
pub mod impact;
pub mod lifted;
pub mod model;
pub mod optimizer;
pub mod scenario;
pub mod serde_matrix;

pub use error::{Error, Result};
