//! Non-Markovian dissipation in discrete- and continuous-variable quantum
//! teleportation, and its suppression by system–reservoir bound states.
//!
//! Units: ω_0 = 1 unless a function takes ω_0 explicitly; times are in 1/ω_0.

pub mod error;
pub mod export;
pub mod lattice;
pub mod propagator;
pub mod quad;
pub mod spectral;
pub mod spectrum;
pub mod teleport;

pub use error::{Error, Result};
pub use lattice::{ChainParams, ExcitationSpectrum};
pub use propagator::{MasterEqCoeffs, UTrajectory};
pub use quad::Tolerance;
pub use spectral::SpectralDensity;
pub use spectrum::{BoundState, Gap, SpectrumSweep};
pub use teleport::cv::CvChannelCoeffs;
pub use teleport::dv::DvChannelState;
pub use teleport::{FidelityRow, Protocol};
