//! Simulation and compensator design for two-crystal type-I SPDC
//! polarization-entanglement sources.
//!
//! The dispersion and phasematching kernels are generic over `f32`/`f64`;
//! the source-level pipeline (phase maps, delays, JTPA, density matrices)
//! runs in `f64`.

pub mod error;
pub mod materials;
pub mod numeric;
pub mod phasematch;
pub mod qstate;
pub mod source;
pub mod spatialphase;
pub mod temporal;

pub use error::{Error, Result};
pub use materials::{Branch, Material, MaterialDb, Symmetry, UniaxialBranch};
pub use numeric::Real;
pub use phasematch::{Arm, CrystalPlate, Orientation, PlateRole, SpdcTriplet};
pub use qstate::TwoQubitState;
pub use source::{Collection, SourceSetup};
pub use temporal::{Filter, FilterShape, Filters, PumpKind, PumpSpec};

pub type Material64 = Material<f64>;
pub type Material32 = Material<f32>;
pub type Plate64 = CrystalPlate<f64>;
pub type Plate32 = CrystalPlate<f32>;
pub type Triplet64 = SpdcTriplet<f64>;
pub type Triplet32 = SpdcTriplet<f32>;
