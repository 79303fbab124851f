//! Exact simulation of a parity-loop qudit state on the Sierpiński gasket.

pub mod algebra;
pub mod constraints;
pub mod error;
pub mod experiments;
pub mod gf2;
pub mod lattice;
pub mod scalar;
pub mod state;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::ExactScalar;
