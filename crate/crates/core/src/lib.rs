//! Conditional independence of discrete random pairs.
//!
//! A pair with joint matrix `M` admits a derivation (a chain of pairs, each conditionally
//! independent given the next, ending in an independent pair) exactly when `M` is not a
//! block matrix. This crate decides blockness, builds derivation witnesses for non-block
//! matrices, validates witnesses, and evaluates the entropy inequalities that any
//! derivation of order `k` forces.

#![allow(clippy::needless_range_loop)]

pub mod construction;
pub mod distribution;
pub mod error;
pub mod inequalities;
pub mod io;
pub mod structure;
pub mod witness;

pub use distribution::{GammaCoupling, InfoReport, Joint, JointDistribution, MassMatrix, RealMatrix, StochasticMatrix};
pub use error::{Error, Result};
pub use witness::{DerivationWitness, QuadJoint, ValidationReport};
