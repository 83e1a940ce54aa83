//! Boolean models and Poisson hyperplane processes in hyperbolic space.
//!
//! Geometry lives in the hyperboloid model ([`hypgeom`]). [`closedform`]
//! evaluates the exact expressions for visibility, intersection density and
//! zero-cell volume, [`procsim`] draws realizations, and [`visibility`] and
//! [`intersect`] turn them into Monte Carlo estimates.

pub mod closedform;
pub mod hypgeom;
pub mod intersect;
pub mod procsim;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod visibility;
