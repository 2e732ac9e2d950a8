//! Discrete PCA: admixture models over sparse multi-bag count data.
//!
//! Three variants of the same family — flat Dirichlet-multinomial admixture,
//! gamma-Poisson (discrete ICA), and tree-structured hierarchical components —
//! trained by Gibbs sampling, with harmonic-mean evidence estimates for
//! choosing the component count, fixed-omega inference for new documents,
//! query matching, classification, feature export, and TF-IDF retrieval with
//! probabilistic re-ranking.

pub mod corpus;
pub mod error;
pub mod evidence;
pub mod features;
pub mod infer;
pub mod model;
pub mod retrieval;
pub mod rng;
pub mod sampler;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
