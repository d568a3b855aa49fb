//! Stability analysis for switched linear descriptor systems
//! `E_σ x' = A_σ x` whose modes may have different indices.
//!
//! The crate is organised bottom-up:
//!
//! - [`matkit`]: rank-revealing decompositions, subspaces and definiteness tests.
//! - [`descriptor`]: index, consistency space and projector of a single pair.
//! - [`lyapunov`]: verification and search of quadratic Lyapunov certificates.
//! - [`switched`]: the switched model, its GUES tests and order reduction.
//! - [`sim`]: trajectory simulation with jumps and state-dependent switching,
//!   plus builders for the reference systems.

pub mod descriptor;
pub mod error;
pub mod lyapunov;
pub mod matkit;
pub mod random;
pub mod serde_ext;
pub mod sim;
pub mod switched;

pub use descriptor::{DescriptorPair, ModeSummary, QuasiWeierstrassForm, StructuralAnalysis};
pub use error::{Error, Result};
pub use lyapunov::{LyapunovCertificate, QuadraticDecay};
pub use matkit::{Matrix, SubspaceBasis, Tolerances, Vector};
pub use switched::{JumpRule, ReductionData, Restriction, StabilityVerdict, SwitchedSystem, VerdictStatus};
