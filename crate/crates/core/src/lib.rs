//! Extrinsic Bayesian optimization on manifolds.
//!
//! Objectives defined on the sphere, the Grassmannian or the SPD cone are
//! modelled by a Gaussian process whose kernel is a Euclidean RBF evaluated on
//! embedded coordinates. The next evaluation point maximizes the probability
//! of improvement, found by projected gradient ascent on the embedded image of
//! the manifold.

pub mod acquisition;
pub mod baselines;
pub mod bo;
pub mod egp;
pub mod experiments;
pub mod error;
pub mod linalg;
pub mod manifolds;
pub mod trace;

pub use error::{Error, Result};
