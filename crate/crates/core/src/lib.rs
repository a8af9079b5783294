//! Output-only identification of mechanical systems in physical coordinates.
//!
//! The unknown input is modeled as the output of an autonomous periodic
//! signal model. Stacking that model onto the mechanical plant gives an
//! output-only system that stochastic subspace identification can realize.
//! The realization is then rotated back into displacement/velocity
//! coordinates, which exposes the normalized stiffness and damping matrices
//! and lets the effective input be reconstructed from the filtered states.

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod mech;
pub mod signal;
pub mod ssi;
pub mod recovery;
