//! Anisotropic expansive dilations: quasi-norms, covers, Littlewood–Paley
//! decompositions and Hardy-space atoms on sampled grids.

pub mod covers;
pub mod error;
pub mod experiments;
pub mod hardy_atoms;
pub mod littlewood_paley;
pub mod matrix;
pub mod quadrature;
pub mod quasinorm;

pub use error::{Error, Result};
pub use matrix::{build_ellipsoid, Ellipsoid, ExpansiveMatrix};
pub use quasinorm::StepQuasiNorm;
