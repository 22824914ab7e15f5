//! Numerical tools for Hofer geometry on Poisson manifolds: Poisson
//! structures on global charts, Hamiltonian isotopies, Hofer lengths,
//! displacement-energy bounds and symplectic-groupoid lifts.

pub mod cutoff;
pub mod error;
pub mod expr;
pub mod flows;
pub mod groupoid;
pub mod hamiltonian;
pub mod hofer;
pub mod ode;
pub mod optimize;
pub mod parallel;
pub mod poisson;
pub mod region;
pub mod sampling;

pub use error::{Error, Result};
pub use hamiltonian::{FamilyHamiltonian, Hamiltonian, SharedHamiltonian, Spatial, TimeProfile};
pub use poisson::{LeafChart, PoissonStructure};
pub use region::{AxisBox, Region};

/// Largest chart dimension supported by the stack-allocated evaluation paths.
pub const MAX_DIM: usize = 16;
