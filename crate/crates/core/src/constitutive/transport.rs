use super::dissipation::{dissipation_d, dissipation_r};
use super::energy::PointState;
use super::params::{MaterialParams, Moduli, PullbackForm};
use crate::error::{Error, Result};
use crate::tensor::Mat;

fn pullback(p: &Mat, phi: f64, base: &Mat, mp: &MaterialParams) -> Result<Mat> {
    let det = p.det();
    if !(det > 0.0) {
        return Err(Error::NonpositivePlasticDeterminant { det, cell: None });
    }
    let inv = p
        .inverse()
        .map_err(|_| Error::NonpositivePlasticDeterminant { det, cell: None })?;
    let sigma = Moduli::at(0.0, phi, mp).sigma[0];
    let scale = sigma.powi(2 - mp.dim as i32)
        * match mp.pullback {
            PullbackForm::Derived => det,
            PullbackForm::Printed => 1.0 / det,
        };
    Ok((inv.transpose() * *base * inv).sym() * scale)
}

/// Effective hydraulic mobility 𝕄_eff(P, α, φ).
pub fn pullback_mobility(p: &Mat, _alpha: f64, phi: f64, mp: &MaterialParams) -> Result<Mat> {
    pullback(p, phi, &mp.mobility_mat(), mp)
}

/// Effective heat conductivity 𝕂_eff(P, φ, ζ, ϑ).
pub fn pullback_conductivity(
    p: &Mat,
    phi: f64,
    _zeta: f64,
    _vartheta: f64,
    mp: &MaterialParams,
) -> Result<Mat> {
    pullback(p, phi, &mp.conductivity_mat(), mp)
}

/// Rates entering the heat production.
#[derive(Clone, Copy, Debug)]
pub struct Rates {
    pub p_dot: Mat,
    pub alpha_dot: f64,
    pub phi_dot: f64,
    pub zeta_dot: f64,
    pub grad_mu: [f64; 3],
}

impl Rates {
    pub fn zero(d: usize) -> Self {
        Rates { p_dot: Mat::zeros(d), alpha_dot: 0.0, phi_dot: 0.0, zeta_dot: 0.0, grad_mu: [0.0; 3] }
    }
}

/// Itemized heat production.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HeatProduction {
    pub plastic: f64,
    pub damage: f64,
    pub water: f64,
    pub transport: f64,
    pub r: f64,
    pub r_eps: f64,
}

/// `r = ∂R(ṖP⁻¹):ṖP⁻¹ + ∂𝔇·(α̇,φ̇) + τζ̇² + 𝕄_eff∇μ·∇μ` and
/// `r_ε = r / (1 + ε(|ṖP⁻¹|² + α̇² + φ̇² + |∇μ|²))`.
pub fn heat_production(ps: &PointState, rates: &Rates, mp: &MaterialParams, eps: f64) -> Result<HeatProduction> {
    let d = mp.dim;
    let p_inv = ps
        .p
        .inverse()
        .map_err(|_| Error::NonpositivePlasticDeterminant { det: ps.p.det(), cell: None })?;
    let rho = rates.p_dot * p_inv;
    let (_, force) = dissipation_r(&rho, mp);
    let plastic = force.ddot(&rho);
    let (_, fd) = dissipation_d(ps.alpha, ps.phi, ps.phi0, rates.alpha_dot, rates.phi_dot, mp);
    let damage = fd[0] * rates.alpha_dot + fd[1] * rates.phi_dot;
    let water = mp.tau_rel * rates.zeta_dot * rates.zeta_dot;
    let m_eff = pullback_mobility(&ps.p, ps.alpha, ps.phi, mp)?;
    let g = &rates.grad_mu;
    let mut transport = 0.0;
    let mut g2 = 0.0;
    for i in 0..d {
        g2 += g[i] * g[i];
        for j in 0..d {
            transport += m_eff[(i, j)] * g[i] * g[j];
        }
    }
    let r = plastic + damage + water + transport;
    let denom = 1.0 + eps * (rho.norm2() + rates.alpha_dot.powi(2) + rates.phi_dot.powi(2) + g2);
    Ok(HeatProduction { plastic, damage, water, transport, r, r_eps: r / denom })
}

/// Derivative of the Moreau–Yosida regularization of the constraint ζ ∈ [0, 1].
pub fn yosida(zeta: f64, eps: f64) -> f64 {
    if zeta < 0.0 {
        zeta / eps
    } else if zeta > 1.0 {
        (zeta - 1.0) / eps
    } else {
        0.0
    }
}

/// Energy `dist(ζ, [0,1])² / (2ε)` whose derivative is [`yosida`].
pub fn yosida_energy(zeta: f64, eps: f64) -> f64 {
    let dist = if zeta < 0.0 { -zeta } else if zeta > 1.0 { zeta - 1.0 } else { 0.0 };
    0.5 * dist * dist / eps
}

/// Slope of [`yosida`].
pub fn yosida_slope(zeta: f64, eps: f64) -> f64 {
    if (0.0..=1.0).contains(&zeta) {
        0.0
    } else {
        1.0 / eps
    }
}
