//! Monomial-model encoding and sensitivity analysis for discrete graphical
//! models.
//!
//! Bayesian networks, staged trees and BN classifiers compile into
//! [`model::MonomialModel`]s. On top of that sit single-block covariation
//! schemes, divergences between distributions, sensitivity functions, the
//! classification of multi-parameter analyses and a brute-force check of
//! when proportional covariation is the I-projection of the original
//! distribution.

pub mod compile;
pub mod model;
pub mod covariation;
pub mod divergence;
pub mod sensitivity;
