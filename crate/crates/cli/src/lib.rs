//! Command-line and HTTP front end for `mmsa-core`.
//!
//! [`ops`] holds every operation once; the `mmsa` binary and the
//! [`service`] router both call into it, so the two give identical answers.

pub mod csv;
pub mod error;
pub mod formats;
pub mod ops;
pub mod service;
pub mod session;
