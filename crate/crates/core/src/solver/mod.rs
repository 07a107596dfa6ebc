//! Time integration of the regularized Galerkin system.
//!
//! One step runs a fixed-point loop. Each pass evaluates the stresses at the
//! midpoint iterate, then updates: the chemical potential with implicit water
//! transport, the plastic strain (implicit viscous term, lagged q-Laplacian
//! weights), damage and porosity in closed form, the deformation by one
//! modified-Newton correction of the implicit-midpoint momentum balance, and
//! the enthalpy with the conductivity of the current iterate.

mod model;
mod run;
mod step;

pub use model::{apply_initial_conditions, EnergyItems, InitialFields, Model};
pub use run::{march, LedgerRow, MarchOptions, Trajectory};
pub use step::{midpoint_fields, midpoint_y, step_rates, Increments, StepDetail, StepReport, Stepper};

use crate::galerkin::Fields;
use serde::{Deserialize, Serialize};

/// Discrete state; all fields are coefficient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    /// Plastic strain components, index `r·d + c`.
    pub p: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub mu: Vec<f64>,
    pub vartheta: Vec<f64>,
    /// Initial porosity (enters the healing rate).
    pub phi0: Vec<f64>,
}

impl State {
    pub fn fields(&self) -> Fields<'_> {
        Fields {
            y: &self.y,
            p: &self.p,
            alpha: &self.alpha,
            phi: &self.phi,
            zeta: &self.zeta,
            mu: &self.mu,
            vartheta: &self.vartheta,
            phi0: &self.phi0,
        }
    }

    /// `max(−min ζ, max ζ − 1, 0)` over nodes.
    pub fn zeta_violation(&self) -> f64 {
        self.zeta.iter().fold(0.0f64, |a, &z| a.max(-z).max(z - 1.0))
    }

    pub fn min_vartheta(&self) -> f64 {
        self.vartheta.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Which blocks of the system are integrated; frozen blocks keep their
/// initial coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveFlags {
    pub mechanics: bool,
    pub plastic: bool,
    pub damage: bool,
    pub porosity: bool,
    pub water: bool,
    pub heat: bool,
}

impl Default for EvolveFlags {
    fn default() -> Self {
        EvolveFlags { mechanics: true, plastic: true, damage: true, porosity: true, water: true, heat: true }
    }
}

impl EvolveFlags {
    pub fn any_internal(&self) -> bool {
        self.plastic || self.damage || self.porosity || self.water
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Regularization parameter ε.
    pub eps: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub det_floor: f64,
    /// Halve dt on fixed-point or determinant failures.
    pub adaptive: bool,
    pub max_halvings: usize,
    /// Relative Newton tolerance of the deformation solve.
    pub newton_tol: f64,
    /// Nodal lower bound on ϑ accepted as nonnegative.
    pub tol_neg: f64,
    pub gauss_points: usize,
    pub evolve: EvolveFlags,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            dt: 2e-3,
            t_end: 2.0,
            eps: 1e-3,
            tol_fp: 1e-9,
            max_iter: 25,
            det_floor: 1e-6,
            adaptive: true,
            max_halvings: 6,
            newton_tol: 1e-12,
            tol_neg: 1e-10,
            gauss_points: 4,
            evolve: EvolveFlags::default(),
        }
    }
}
