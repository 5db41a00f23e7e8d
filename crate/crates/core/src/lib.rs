//! Kolmogorov–Smirnov and Cramér–von-Mises type tests for independent but not
//! identically distributed observations.
//!
//! The observations `X_1, …, X_n` may each follow their own distribution
//! `F_i`. Hypotheses are stated about the weighted mixture
//! `Σ α_i F_i`, estimated by the weighted empirical distribution function
//! `Σ α_i I(X_i ≤ x)`. Critical values come from Monte-Carlo simulation
//! under the null.
//!
//! Modules:
//!
//! - [`distributions`]: the distribution families and finite mixtures.
//! - [`weights`]: weight schemes `α_1, …, α_n` and their diagnostics.
//! - [`empirical`]: weighted empirical distribution functions, sup-distances
//!   and Cramér–von-Mises integrals.
//! - [`gof`]: goodness-of-fit against a known mixture or a parametric family.
//! - [`estimation`]: weighted maximum-likelihood estimation.
//! - [`functional`]: homogeneity, central symmetry and independence.
//! - [`montecarlo`]: seeded replicate engine, critical values and p-values.
//! - [`harness`]: size/power simulation tables.

pub mod distributions;
pub mod empirical;
mod error;
pub mod estimation;
pub mod expr;
pub mod functional;
pub mod gof;
pub mod harness;
pub mod io;
pub mod montecarlo;
mod numeric;
pub mod sample;
pub mod template;
pub mod weights;

pub use error::{Error, Result};
pub use sample::Sample;
