//! Ground states of the orthonormality-constrained two-orbital NLS energy on the line,
//! their two-soliton decomposition, and checks of the asymptotic laws near p = 2.

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod fit;
pub mod grid;
pub mod nelder_mead;
pub mod solitons;
pub mod solver;
pub mod validate;

pub use energy::{EnergySplit, IdentityReport, MultiplierMatrix, OrbitalPair};
pub use error::{Error, Result};
pub use fit::{BumpInfo, FitResult};
pub use grid::{EigenPair, Grid, TriDiagOperator};
pub use solitons::{ExpansionCoefficients, SolitonSpec};
pub use solver::{GroundState, SolverConfig};
