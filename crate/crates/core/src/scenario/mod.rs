//! Scenario configuration, presets, validation and run outputs.
//!
//! A configuration file is TOML with the sections `[domain]`, `[material]`,
//! `[loading]`, `[solver]`, `[outputs]` and `[initial]`, plus an optional
//! top-level `preset` key naming the preset that supplies every omitted value
//! (`fault_shear` when absent).

mod output;
mod presets;
mod validate;

pub use output::{
    read_csv_table, read_ledger_csv, read_manifest, read_snapshot, snapshot_file_name, write_ledger_csv, write_outputs,
    write_snapshot, LedgerCsvRow, Manifest, Snapshot, DETAIL_HEADER, LEDGER_HEADER, SNAPSHOT_FIELDS,
};
pub use presets::{lowest_mode, preset, PRESET_NAMES};
pub use validate::{validate, validate_material};

use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::galerkin::{build_space_with_quadrature, BoundaryData, GalerkinSpace, Side};
use crate::solver::{apply_initial_conditions, march, InitialFields, MarchOptions, Model, SolverSettings, State, Trajectory};
use crate::tensor::Mat;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Sides carrying the boundary springs and the Dirichlet data for P, α, φ.
    pub dirichlet: Vec<Side>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig { lx: 1.0, ly: 1.0, nx: 16, ny: 16, dirichlet: vec![Side::Bottom, Side::Top] }
    }
}

/// Boundary and body loads. The boundary deformation is
/// `y♭(x, t) = x + t G (x − center)` with `G = shear_rate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadingConfig {
    pub shear_rate: [[f64; 2]; 2],
    pub center: [f64; 2],
    pub gravity: [f64; 2],
    pub mu_flat: f64,
    pub theta_flat: f64,
}

impl Default for LoadingConfig {
    fn default() -> Self {
        LoadingConfig { shear_rate: [[0.0; 2]; 2], center: [0.5, 0.5], gravity: [0.0; 2], mu_flat: 0.0, theta_flat: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub ledger_every: usize,
    pub snapshot_every: usize,
    /// Snapshot fields, a subset of [`SNAPSHOT_FIELDS`].
    pub fields: Vec<String>,
    /// Seed of the randomized audit checks.
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            ledger_every: 1,
            snapshot_every: 100,
            fields: SNAPSHOT_FIELDS.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

/// Shape of the initial α, φ (and θ) fields on top of the uniform values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Uniform,
    /// Horizontal fault zone centred at `y = center`: core values for
    /// `|y − center| ≤ core_half_width`, a linear ramp to the damaged values
    /// at `damage_half_width`, and a linear ramp to the uniform values over
    /// `transition_width` into the compact rock.
    FaultZone {
        center: f64,
        core_half_width: f64,
        damage_half_width: f64,
        transition_width: f64,
        alpha_core: f64,
        phi_core: f64,
        alpha_damage: f64,
        phi_damage: f64,
    },
    /// Deformation `x + amplitude · m(x)` with `m` the lowest vibration mode
    /// of the linearized system, normalized to unit max nodal value.
    Mode { amplitude: f64 },
    /// `θ0 = theta + amplitude cos(πx/Lx) cos(πy/Ly)`.
    Cosine { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub alpha: f64,
    pub phi: f64,
    pub zeta: f64,
    pub theta: f64,
    pub profile: Profile,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { alpha: 0.0, phi: 0.0, zeta: 0.0, theta: 1.0, profile: Profile::Uniform }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Preset supplying the omitted values.
    pub preset: Option<String>,
    pub domain: DomainConfig,
    pub material: MaterialParams,
    pub loading: LoadingConfig,
    pub solver: SolverSettings,
    pub outputs: OutputConfig,
    pub initial: InitialConfig,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, e: toml::de::Error) -> Error {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    Error::Parse { line, column, message: e.message().trim().to_string() }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "profile" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Parses TOML text; omitted keys take the values of the named preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        // Typed pass first: unknown keys and type errors carry a position.
        let typed: ScenarioConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        let user: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, e))?;
        let name = typed.preset.as_deref().unwrap_or("fault_shear");
        let base = preset(name)?;
        let mut table = toml::Table::try_from(&base).map_err(|e| Error::Validation(e.to_string()))?;
        merge(&mut table, user);
        let mut cfg: ScenarioConfig =
            table.try_into().map_err(|e: toml::de::Error| Error::Parse { line: 0, column: 0, message: e.to_string() })?;
        cfg.preset = Some(name.to_string());
        validate(&cfg)?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(e.to_string()))
    }

    pub fn space(&self) -> Result<GalerkinSpace> {
        let d = &self.domain;
        build_space_with_quadrature(d.nx, d.ny, d.lx, d.ly, &d.dirichlet, self.solver.gauss_points)
    }

    pub fn boundary_data(&self) -> BoundaryData {
        let l = &self.loading;
        let g = l.shear_rate;
        BoundaryData {
            velocity_gradient: Mat::new2(g[0][0], g[0][1], g[1][0], g[1][1]),
            center: l.center,
            gravity: l.gravity,
            mu_flat: l.mu_flat,
            theta_flat: l.theta_flat,
            heat_source: None,
        }
    }

    pub fn march_options(&self) -> MarchOptions {
        MarchOptions { ledger_every: self.outputs.ledger_every, snapshot_every: self.outputs.snapshot_every }
    }

    /// Validated model and initial state.
    pub fn build(&self) -> Result<(Model, State)> {
        validate(self)?;
        let model = Model::new(self.space()?, self.material.clone(), self.boundary_data(), self.solver.clone());
        let init = self.initial_fields(&model)?;
        let state = apply_initial_conditions(init, &model)?;
        Ok((model, state))
    }

    pub fn initial_fields(&self, model: &Model) -> Result<InitialFields> {
        let ic = &self.initial;
        let sp = &model.sp;
        let mut init = InitialFields::uniform(sp, ic.alpha, ic.phi, ic.zeta, ic.theta);
        match ic.profile {
            Profile::Uniform => {}
            Profile::FaultZone {
                center,
                core_half_width: wc,
                damage_half_width: wd,
                transition_width: wt,
                alpha_core,
                phi_core,
                alpha_damage,
                phi_damage,
            } => {
                let ramp = |d: f64, core: f64, damage: f64, rock: f64| {
                    if d <= wc {
                        core
                    } else if d <= wd {
                        core + (damage - core) * (d - wc) / (wd - wc)
                    } else if d <= wd + wt {
                        damage + (rock - damage) * (d - wd) / wt
                    } else {
                        rock
                    }
                };
                for i in 0..sp.n_nodes() {
                    let d = (sp.node_coords(i)[1] - center).abs();
                    init.alpha[i] = ramp(d, alpha_core, alpha_damage, ic.alpha);
                    init.phi[i] = ramp(d, phi_core, phi_damage, ic.phi);
                }
            }
            Profile::Mode { amplitude } => {
                let (mode, _) = lowest_mode(model)?;
                for (y, m) in init.y.iter_mut().zip(&mode) {
                    *y += amplitude * m;
                }
            }
            Profile::Cosine { amplitude } => {
                let (lx, ly) = (self.domain.lx, self.domain.ly);
                let pi = std::f64::consts::PI;
                init.theta =
                    sp.interpolate_scalar(|x, y| ic.theta + amplitude * (pi * x / lx).cos() * (pi * y / ly).cos());
            }
        }
        Ok(init)
    }
}

/// Builds the scenario and marches it to `t_end`.
pub fn run(cfg: &ScenarioConfig) -> Result<(Model, Trajectory)> {
    let (model, init) = cfg.build()?;
    let traj = march(&model, init, &cfg.march_options())?;
    Ok((model, traj))
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_toml_str(&text)
}
