//! Bernoulli group testing as a planted inference landscape.
//!
//! The crate samples non-adaptive Bernoulli group testing instances, applies
//! COMP pruning, and studies the resulting energy landscape over `k`-subsets
//! of the surviving candidates:
//!
//! - [`mathcore`]: entropies, two-point KL divergence, `H_C`, binomial tails.
//! - [`model`]: instance sampling, COMP, the Hamiltonian, serialization.
//! - [`mcmc`]: Glauber and Metropolis chains on the Johnson graph, exact
//!   stationary analysis and bottleneck ratios at desk scale.
//! - [`landscape`]: exact `Z_{t,l}` counts, the overlap curve `phi(l)` and
//!   bottleneck-OGP detection.
//! - [`fmf`]: the conditional first moment function and its unconditional
//!   counterpart.
//! - [`regions`]: the parameter assumptions over the `(alpha, C)` plane and
//!   the critical constant `C*`.
//! - [`setcover`]: random MAX k-set cover and flatness diagnostics.
//! - [`gfunc`]: the second-moment functions `G~`, `G`, `G-breve`.

pub mod bitset;
pub mod combin;
mod error;
pub mod fmf;
pub mod gfunc;
pub mod landscape;
pub mod mathcore;
pub mod mcmc;
pub mod model;
pub mod regions;
pub mod report;
pub mod rng;
pub mod setcover;

pub use error::{Error, Result};
pub use model::{GTInstance, KSubset, PrunedInstance};
