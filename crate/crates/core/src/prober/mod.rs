//! Probe surfaces against a stage and certify holes.

pub mod arith;
pub mod probe;
pub mod surface;

pub use arith::*;
pub use probe::*;
pub use surface::*;
