//! Logistic regression when the binary outcome is observed only through a
//! misclassified surrogate.
//!
//! The surrogate model is `P(S = 1 | x) = (1 - α₂) + (α₁ + α₂ - 1) · expit(β₀ + xᵀβ)`
//! with sensitivity `α₁` and specificity `α₂`. The crate provides
//!
//! * [`model`]: parameter and data types, link functions, simulation;
//! * [`likelihood`]: log-likelihood, analytic score and information blocks;
//! * [`estimation`]: profile-grid maximum likelihood with optional polishing;
//! * [`identifiability`]: the exact global-identifiability checker plus
//!   numeric certificates and explicit equivalent-parameter constructions;
//! * [`inference`]: score, sup-score and likelihood-ratio tests of `η = 0`,
//!   calibrated by χ² or by a multiplier bootstrap.

pub mod error;
pub mod estimation;
pub mod grid;
pub mod identifiability;
pub mod inference;
pub mod likelihood;
mod linalg;
pub mod model;
mod rng;

pub use error::{Error, Result};
pub use estimation::{fit_beta_given_alpha, fit_mle, fit_null, BetaFit, FitOptions, FitResult};
pub use grid::{AlphaGrid, GridAxis};
pub use identifiability::{check_identifiability, IdentifiabilityVerdict};
pub use inference::{run_test, TestOptions, TestReport};
pub use likelihood::{InfoBlocks, Partition};
pub use model::{
    expit, logit, ABParams, Covariates, Dataset, MisclassParams, RegressionParams, Support,
    SupportSpec, Theta,
};
