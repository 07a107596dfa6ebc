//! Pointwise constitutive kernels: stored energy and its driving forces,
//! dissipation potentials with their flow-rule inverses, thermal functions,
//! transport pull-backs and the heat production rate.
//!
//! All functions are pure and reentrant.

mod dissipation;
mod energy;
mod params;
mod thermal;
mod transport;

pub use dissipation::{dissipation_d, dissipation_r, invert_flow_rules};
pub use energy::{
    d_stored_energy, invariant_ratio_drive, invariants_of, stored_energy, stress_tangent, varpi,
    varpi_prime, varpi_second, zeta_curvature, DrivingForces, PointState,
};
pub use params::{clamp01, MaterialParams, Moduli, PullbackForm, SigmaShape, VarpiForm, CLAMP_LAYER};
pub use thermal::{
    enthalpy, enthalpy_inverse, entropy, heat_capacity, regularize_boundary_temperature,
    regularize_initial_temperature, thermal_pack, Temperature, ThermalPack, THETA_FLOOR,
};
pub use transport::{
    heat_production, pullback_conductivity, pullback_mobility, yosida, yosida_energy, yosida_slope,
    HeatProduction, Rates,
};
