//! Minimization of the ground-state energy of an energy-dependent s-wave
//! Schrödinger operator over rearrangement classes of its potential terms.

pub mod admissibility;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
mod linalg;
pub mod mesh;
pub mod nlep;
pub mod optimize;
pub mod rearrange;

pub use error::{Error, Result};
pub use field::{Distribution, Field, Level};
pub use mesh::{Geometry, Mesh, MeshKind, MeshSpec};
pub use nlep::{GroundState, SolverOptions};
