//! Simulation and verification tooling for Galerkin-truncated SPDEs driven by
//! cylindrical symmetric α-stable noise with Hölder drift.

// `!(x > 0.0)` is the NaN-rejecting form used for every parameter check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod quadrature;
pub mod rng;
pub mod stable;
pub mod spectral;
pub mod functions;
pub mod mehler;
pub mod grid;
pub mod kolmogorov;
pub mod simulator;
pub mod stats;
