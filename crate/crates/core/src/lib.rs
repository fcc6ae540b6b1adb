//! Numerical study of least-energy nodal solutions of the Hénon equation
//! `−Δu = |x|^α |u|^{p−1} u` on the unit disc with Dirichlet data, restricted
//! to functions invariant under rotation by `2π/n`.

pub mod constants;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod ode;
pub mod nehari;
pub mod nodal;
pub mod radial;
pub mod spectrum;

pub use constants::{AsymptoticConstants, CasePrediction, ProblemParams};
pub use error::{HenonError, Result};
pub use mesh::{Field, FieldShape, Grading, RadialGrid, SectorMesh};
