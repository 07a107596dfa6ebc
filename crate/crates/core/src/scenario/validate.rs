use super::{Profile, ScenarioConfig, SNAPSHOT_FIELDS};
use crate::constitutive::{MaterialParams, Moduli, VarpiForm};
use crate::error::{Error, Result};
use crate::tensor::Mat;

fn fail<T>(label: &str, msg: String) -> Result<T> {
    Err(Error::Validation(format!("{label}: {msg}")))
}

fn positive(label: &str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        fail(label, format!("{name} must be positive, got {v}"))
    }
}

fn nonnegative(label: &str, name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        fail(label, format!("{name} must be nonnegative, got {v}"))
    }
}

fn spd(label: &str, name: &str, m: &[Vec<f64>], d: usize) -> Result<()> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return fail(label, format!("{name} must be a {d}×{d} matrix"));
    }
    let a = Mat::from_fn(d, |i, j| m[i][j]);
    if (a - a.transpose()).max_abs() > 1e-12 * a.max_abs() {
        return fail(label, format!("{name} must be symmetric"));
    }
    // 2×2 Sylvester criterion.
    if !(a[(0, 0)] > 0.0 && a.det() > 0.0) {
        return fail(label, format!("{name} must be positive definite"));
    }
    Ok(())
}

/// Checks the structural assumptions on the constitutive data. Each message
/// starts with the clause label listed in the README.
pub fn validate_material(mp: &MaterialParams) -> Result<()> {
    let d = mp.dim;
    if d != 2 {
        return fail("A.a", format!("only d = 2 is supported, got d = {d}"));
    }
    if !(mp.q > d as f64) {
        return fail("A.a", format!("q > d required, got q = {} with d = {d}", mp.q));
    }
    for (name, v) in [("g0", mp.g0), ("lambda0 + g0", mp.lambda0 + mp.g0)] {
        positive("A.d", name, v)?;
    }
    if !(mp.phi_cr > 0.0 && mp.phi_cr <= 1.0) {
        return fail("A.e", format!("phi_cr must lie in (0, 1], got {}", mp.phi_cr));
    }
    // λ ≥ −(2/d)G and G > 0 on a grid of (α, φ) ∈ [0,1] × [0, φ_cr).
    for ia in 0..=10 {
        for ip in 0..10 {
            let alpha = ia as f64 / 10.0;
            let phi = mp.phi_cr * ip as f64 / 10.0;
            let md = Moduli::at(alpha, phi, mp);
            let (lam, g) = (md.lambda[0], md.g[0]);
            if !(g > 0.0) {
                return fail("A.d", format!("G > 0 violated at α={alpha}, φ={phi} (G = {g})"));
            }
            if lam < -(2.0 / d as f64) * g {
                return fail("A.d", format!("λ ≥ −(2/d)G violated at α={alpha}, φ={phi}"));
            }
            if md.m[0] < 0.0 || md.gamma[0] < 0.0 {
                return fail("A.e", format!("m, γ must be nonnegative at α={alpha}, φ={phi}"));
            }
        }
    }
    for (name, v) in [("m0", mp.m0), ("m_min", mp.m_min), ("gamma_r", mp.gamma_r), ("chi1", mp.chi1)] {
        nonnegative("A.e", name, v)?;
    }
    positive("A.e", "eps_reg", mp.eps_reg)?;
    positive("A.e", "rho", mp.rho)?;
    for (name, v) in [
        ("kappa0", mp.kappa0),
        ("kappa1", mp.kappa1),
        ("kappa2", mp.kappa2),
        ("kappa3", mp.kappa3),
        ("kappa4", mp.kappa4),
        ("tau_rel", mp.tau_rel),
    ] {
        positive("A.f", name, v)?;
    }
    spd("A.g", "mobility", &mp.mobility, d)?;
    spd("A.g", "conductivity", &mp.conductivity, d)?;
    positive("A.i", "delta_varpi", mp.delta_varpi)?;
    if mp.varpi_form == VarpiForm::Smooth && !(mp.q * mp.delta_varpi < 2.0) {
        return fail("A.i", format!("the smooth barrier needs q·δ < 2, got {}", mp.q * mp.delta_varpi));
    }
    positive("A.j", "nu_pl", mp.nu_pl)?;
    nonnegative("A.j", "yield_stress", mp.yield_stress)?;
    positive("A.j", "yield_smoothing", mp.yield_smoothing)?;
    positive("A.k", "c0", mp.c0)?;
    positive("A.k", "c1", mp.c1)?;
    positive("A.k", "c2", mp.c2)?;
    positive("A.k", "d_phi", mp.d_phi)?;
    nonnegative("A.k", "n_phi", mp.n_phi)?;
    positive("A.l", "cv0", mp.cv0)?;
    if !(mp.cv_gain > -1.0 && mp.cv_gain.is_finite()) {
        return fail("A.l", format!("heat capacity must stay positive: cv_gain > −1, got {}", mp.cv_gain));
    }
    positive("A.l", "theta_ref", mp.theta_ref)?;
    for (name, v) in [("spring_n", mp.spring_n), ("m_bnd", mp.m_bnd), ("k_bnd", mp.k_bnd)] {
        nonnegative("A.c", name, v)?;
    }
    Ok(())
}

/// Full configuration check; the first violated assumption is reported.
pub fn validate(cfg: &ScenarioConfig) -> Result<()> {
    let dm = &cfg.domain;
    if dm.nx < 1 || dm.ny < 1 {
        return fail("domain", format!("need nx, ny ≥ 1, got {} × {}", dm.nx, dm.ny));
    }
    positive("domain", "lx", dm.lx)?;
    positive("domain", "ly", dm.ly)?;
    validate_material(&cfg.material)?;

    let ld = &cfg.loading;
    let finite = ld.shear_rate.iter().flatten().chain(&ld.center).chain(&ld.gravity).all(|v| v.is_finite());
    if !finite || !ld.mu_flat.is_finite() {
        return fail("A.c", "loading values must be finite".into());
    }
    nonnegative("A.c", "theta_flat", ld.theta_flat)?;

    let s = &cfg.solver;
    positive("solver", "dt", s.dt)?;
    nonnegative("solver", "t_end", s.t_end)?;
    positive("solver", "eps", s.eps)?;
    positive("solver", "tol_fp", s.tol_fp)?;
    positive("solver", "newton_tol", s.newton_tol)?;
    positive("solver", "det_floor", s.det_floor)?;
    nonnegative("solver", "tol_neg", s.tol_neg)?;
    if s.max_iter == 0 {
        return fail("solver", "max_iter must be at least 1".into());
    }
    if !(1..=10).contains(&s.gauss_points) {
        return fail("solver", format!("gauss_points must lie in 1..=10, got {}", s.gauss_points));
    }

    let o = &cfg.outputs;
    if o.ledger_every == 0 || o.snapshot_every == 0 {
        return fail("outputs", "ledger_every and snapshot_every must be at least 1".into());
    }
    if let Some(f) = o.fields.iter().find(|f| !SNAPSHOT_FIELDS.contains(&f.as_str())) {
        return fail("outputs", format!("unknown snapshot field `{f}`"));
    }

    let ic = &cfg.initial;
    if !(0.0..=1.0).contains(&ic.zeta) {
        return fail("A.b", format!("initial water content must satisfy 0 ≤ ζ0 ≤ 1, got ζ0 = {}", ic.zeta));
    }
    nonnegative("A.b", "initial temperature θ0", ic.theta)?;
    match ic.profile {
        Profile::Cosine { amplitude } if amplitude.abs() > ic.theta => {
            fail("A.b", format!("initial temperature must satisfy θ0 ≥ 0: |amplitude| {amplitude} exceeds θ0 {}", ic.theta))
        }
        Profile::FaultZone { core_half_width, damage_half_width, transition_width, .. }
            if !(core_half_width >= 0.0 && damage_half_width > core_half_width && transition_width > 0.0) =>
        {
            fail("initial", "fault zone widths must satisfy 0 ≤ core < damage and transition > 0".into())
        }
        _ => Ok(()),
    }
}
