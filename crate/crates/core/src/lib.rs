//! Static kinks, normal modes and ground-state entanglement of a
//! Frenkel-Kontorova chain on a double sine-Gordon substrate.
//!
//! The pipeline is `statics` → `spectral` → `gaussian`: solve the static
//! configuration, diagonalise the fluctuation Hessian around it, and build
//! the ground-state covariance from which correlations and block entropies
//! follow. [`cli`] wires the stages into reproducible experiment runs.

pub mod cli;
pub mod dd;
pub mod gaussian;
pub mod potential;
pub mod spectral;
pub mod statics;

pub use gaussian::{
    correlation_profile, covariance, entanglement_entropy, entropy_scan, symplectic_eigenvalues,
    CovarianceData, EntropyScan, GaussianError, SymplecticSpectrum,
};
pub use potential::{
    critical_points, potential_d1, potential_d2, potential_value, CriticalKind, CriticalPoint,
    ModelParams, PotentialError,
};
pub use spectral::{
    build_hessian, eigendecompose, zero_point_energy, HessianMatrix, NormalModes, SpectralError,
};
pub use statics::{
    energy_profile, lump_centers, solve_kink, vacuum_configuration, EnergyProfile,
    FieldConfiguration, Sector, StaticsError,
};
