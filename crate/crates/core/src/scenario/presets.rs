use super::{DomainConfig, InitialConfig, LoadingConfig, OutputConfig, Profile, ScenarioConfig};
use crate::constitutive::MaterialParams;
use crate::error::{Error, Result};
use crate::galerkin::{assemble_tangent, Fields, Side};
use crate::solver::{EvolveFlags, Model, SolverSettings};
use nalgebra::{DMatrix, SymmetricEigen};

pub const PRESET_NAMES: [&str; 4] = ["fault_shear", "heat_only", "oscillator", "consolidation"];

/// Nondimensional rock: unit moduli, density, mobility and conductivity.
fn rock() -> MaterialParams {
    MaterialParams {
        lambda0: 1.0,
        lambda_r: 0.5,
        g0: 1.0,
        g_r: 0.5,
        gamma_r: 0.2,
        m0: 1.0,
        m_min: 0.01,
        beta: 0.5,
        phi_cr: 0.5,
        kappa0: 1e-3,
        kappa1: 1e-2,
        kappa2: 1e-3,
        kappa3: 1e-3,
        kappa4: 1e-3,
        tau_rel: 1.0,
        rho: 1.0,
        chi1: 0.01,
        c0: 1.0,
        c1: 0.5,
        nu_pl: 1.0,
        d_phi: 0.1,
        mobility: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        conductivity: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        cv0: 1.0,
        spring_n: 2.0,
        m_bnd: 0.5,
        k_bnd: 0.3,
        ..MaterialParams::default()
    }
}

fn only(mechanics: bool, heat: bool, water: bool) -> EvolveFlags {
    EvolveFlags { mechanics, plastic: false, damage: false, porosity: false, water, heat }
}

fn fault_shear() -> ScenarioConfig {
    ScenarioConfig {
        preset: Some("fault_shear".into()),
        domain: DomainConfig::default(),
        material: rock(),
        loading: LoadingConfig {
            shear_rate: [[0.0, 0.02], [0.0, 0.0]],
            mu_flat: 0.5,
            ..LoadingConfig::default()
        },
        solver: SolverSettings { dt: 5e-4, t_end: 0.5, ..SolverSettings::default() },
        outputs: OutputConfig { dir: "out/fault_shear".into(), ..OutputConfig::default() },
        initial: InitialConfig {
            alpha: 0.0,
            phi: 0.0,
            zeta: 1.0,
            theta: 1.0,
            profile: Profile::FaultZone {
                center: 0.5,
                core_half_width: 0.05,
                damage_half_width: 0.15,
                transition_width: 0.1,
                alpha_core: 0.6,
                phi_core: 0.2,
                alpha_damage: 0.3,
                phi_damage: 0.1,
            },
        },
    }
}

fn heat_only() -> ScenarioConfig {
    let material = MaterialParams {
        beta: 0.0,
        gamma_r: 0.0,
        cv_gain: 0.0,
        k_bnd: 0.0,
        m_bnd: 0.0,
        spring_n: 1.0,
        ..rock()
    };
    ScenarioConfig {
        preset: Some("heat_only".into()),
        domain: DomainConfig { nx: 8, ny: 8, dirichlet: vec![Side::Bottom], ..DomainConfig::default() },
        material,
        loading: LoadingConfig::default(),
        solver: SolverSettings { dt: 1e-3, t_end: 0.1, evolve: only(false, true, false), ..SolverSettings::default() },
        outputs: OutputConfig { dir: "out/heat_only".into(), ..OutputConfig::default() },
        initial: InitialConfig { theta: 1.0, profile: Profile::Cosine { amplitude: 0.5 }, ..InitialConfig::default() },
    }
}

fn oscillator() -> ScenarioConfig {
    let material = MaterialParams { gamma_r: 0.0, chi1: 0.0, k_bnd: 0.0, m_bnd: 0.0, ..rock() };
    let mut cfg = ScenarioConfig {
        preset: Some("oscillator".into()),
        domain: DomainConfig { nx: 4, ny: 4, ..DomainConfig::default() },
        material,
        loading: LoadingConfig::default(),
        solver: SolverSettings {
            evolve: only(true, false, false),
            adaptive: false,
            newton_tol: 1e-14,
            ..SolverSettings::default()
        },
        outputs: OutputConfig { dir: "out/oscillator".into(), ledger_every: 200, snapshot_every: 2000, ..OutputConfig::default() },
        initial: InitialConfig { theta: 1.0, profile: Profile::Mode { amplitude: 1e-3 }, ..InitialConfig::default() },
    };
    // 200 steps per period of the lowest mode, 100 periods.
    let period = cfg
        .space()
        .map(|sp| Model::new(sp, cfg.material.clone(), cfg.boundary_data(), cfg.solver.clone()))
        .and_then(|m| lowest_mode(&m))
        .map(|(_, w)| 2.0 * std::f64::consts::PI / w)
        .unwrap_or(1.0);
    cfg.solver.dt = period / 200.0;
    cfg.solver.t_end = 100.0 * period;
    cfg
}

fn consolidation() -> ScenarioConfig {
    ScenarioConfig {
        preset: Some("consolidation".into()),
        domain: DomainConfig { nx: 8, ny: 8, dirichlet: vec![Side::Bottom], ..DomainConfig::default() },
        material: MaterialParams { m_bnd: 1.0, ..rock() },
        loading: LoadingConfig { gravity: [0.0, -0.1], mu_flat: 0.0, ..LoadingConfig::default() },
        solver: SolverSettings { dt: 2e-3, t_end: 0.5, evolve: only(true, true, true), ..SolverSettings::default() },
        outputs: OutputConfig { dir: "out/consolidation".into(), ..OutputConfig::default() },
        initial: InitialConfig { zeta: 0.5, theta: 1.0, ..InitialConfig::default() },
    }
}

/// Built-in scenarios.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    match name {
        "fault_shear" => Ok(fault_shear()),
        "heat_only" => Ok(heat_only()),
        "oscillator" => Ok(oscillator()),
        "consolidation" => Ok(consolidation()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Lowest vibration mode of the deformation linearized at the undeformed
/// rest state (P = 𝕀, zero scalars): dense solve of `K m = ω² ρ M m`.
/// Returns the mode scaled to unit max nodal value and `ω`.
pub fn lowest_mode(model: &Model) -> Result<(Vec<f64>, f64)> {
    let sp = &model.sp;
    let n = sp.n_nodes();
    let y = sp.identity_y();
    let p = vec![vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![1.0; n]];
    let zeros = vec![0.0; n];
    let fields = Fields {
        y: &y,
        p: &p,
        alpha: &zeros,
        phi: &zeros,
        zeta: &zeros,
        mu: &zeros,
        vartheta: &zeros,
        phi0: &zeros,
    };
    let mut k = assemble_tangent(sp, &fields, &model.mp)?;
    k.axpy(1.0, &model.y_quadratic);
    let nd = y.len();
    let dense = |rows: Vec<Vec<f64>>| DMatrix::from_fn(nd, nd, |i, j| rows[i][j]);
    let kd = dense(k.to_dense());
    let md = dense(model.ops.y_mass.to_dense()) * model.mp.rho;
    let chol = md.cholesky().ok_or(Error::SingularMatrix { det: 0.0 })?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularMatrix { det: 0.0 })?;
    let a = &l_inv * kd * l_inv.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
    if !(lmin > 0.0) {
        return Err(Error::SingularMatrix { det: lmin });
    }
    let m = l_inv.transpose() * eig.eigenvectors.column(imin);
    let values = (0..n).flat_map(|i| [m[i * 8], m[i * 8 + 4]]);
    let peak = values.fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    let mode = m.iter().map(|v| v / peak).collect();
    Ok((mode, lmin.sqrt()))
}
