//! Compatible metric pencils, the cotangent multiplication they induce, and
//! (weak) F-manifolds, verified numerically on symbolic component fields.

pub mod error;
pub mod expr;
pub mod fmanifold;
pub mod circalg;
pub mod cli;
pub mod geometry;
pub mod hamiltonian;
pub mod pencil;
pub mod report;
pub mod sampling;
pub mod submanifold;

pub use error::{Error, Result};
