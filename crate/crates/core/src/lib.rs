//! Pseudo-spectral ground states for the semi-relativistic
//! Schrödinger–Poisson–Slater energy
//!
//! `E(u) = ½‖u‖²_{H^{1/2}} + α∫∫|u(x)|²|u(y)|²/|x−y| − β∫|u|^p`
//!
//! on the mass sphere `‖u‖₂² = ρ`, together with the variational identities
//! that certify candidate minimizers and the Gagliardo–Nirenberg-type
//! quotient governing the critical exponent `p = 8/3`.

pub mod cli;
pub mod constants;
pub mod error;
pub mod field;
pub mod grid;
pub mod identities;
pub mod minimize;
pub mod params;
pub mod snapshot;
pub mod spectral;
mod sum;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{CoulombKernel, Grid, GridMeta};
pub use identities::IdentityReport;
pub use params::{Params, Variant};
pub use spectral::{EnergyBreakdown, NormSet};
