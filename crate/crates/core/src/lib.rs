//! Prepare-and-measure superdense coding: states, protocols, SDP-based
//! see-saw optimization and entanglement witnesses built on success
//! probability.

pub mod error;
pub mod linalg;
pub mod policy;
pub mod protocol;
pub mod sampling;
pub mod sdpsolve;
pub mod seesaw;
pub mod states;
pub mod witness;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Subsystem, C64};
pub use policy::NumericPolicy;
