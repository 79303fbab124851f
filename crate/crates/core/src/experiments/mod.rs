//! Verification experiments built on the lattice, algebra and state layers.

pub mod canon;
pub mod circuit;
pub mod correlation;
pub mod depth;
pub mod detection;
pub mod flipper;
pub mod suite;
