//! Fractional-order reparametrization-invariant Sobolev metrics on closed curves.
//!
//! The crate evaluates the metrics `G^q_c` and `Ġ^q_c` on sampled immersed closed
//! curves, estimates geodesic distances by minimizing discrete path energies, and
//! packages a set of reproducible numerical experiments around them.

pub mod curve;
pub mod error;
pub mod experiments;
pub mod geodesic;
pub mod io;
pub mod metric;
pub mod optim;
pub mod spectral;

pub use error::{Error, Result};
