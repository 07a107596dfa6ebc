use super::params::{MaterialParams, Moduli, VarpiForm};
use crate::error::{Error, Result};
use crate::tensor::{Mat, Tensor4};

/// Pointwise state at a quadrature point or node.
#[derive(Clone, Copy, Debug)]
pub struct PointState {
    /// Deformation gradient ∇y.
    pub f: Mat,
    /// Plastic strain.
    pub p: Mat,
    pub alpha: f64,
    pub phi: f64,
    pub zeta: f64,
    pub vartheta: f64,
    /// Initial porosity at the point (enters the healing rate).
    pub phi0: f64,
}

impl PointState {
    pub fn rest(d: usize) -> Self {
        PointState {
            f: Mat::identity(d),
            p: Mat::identity(d),
            alpha: 0.0,
            phi: 0.0,
            zeta: 0.0,
            vartheta: 0.0,
            phi0: 0.0,
        }
    }
}

/// Local parts of the driving forces: partial derivatives of Φ_M.
#[derive(Clone, Copy, Debug)]
pub struct DrivingForces {
    /// ∂Φ_M/∂(∇y) = σ ∂_{F_el}Φ_M P^{-T}.
    pub sigma_el: Mat,
    /// ∂Φ_M/∂P including the ϖ′(det P) det P P^{-T} term.
    pub sigma_in: Mat,
    pub p_age: f64,
    pub p_eff: f64,
    pub p_por: f64,
    /// Φ_M itself.
    pub energy: f64,
    /// ∂²Φ_M/∂ζ².
    pub zeta_curv: f64,
}

/// Green–Lagrange invariants: `(I1, I2, E_el)`.
pub fn invariants_of(f_el: &Mat) -> (f64, f64, Mat) {
    let d = f_el.dim();
    let e = (f_el.transpose() * *f_el - Mat::identity(d)) * 0.5;
    (e.trace(), e.norm2(), e)
}

/// Isochoricity penalty ϖ(a); +∞ for a ≤ 0.
pub fn varpi(a: f64, mp: &MaterialParams) -> f64 {
    if a <= 0.0 {
        return f64::INFINITY;
    }
    let (dl, q) = (mp.delta_varpi, mp.q);
    match mp.varpi_form {
        VarpiForm::Smooth => dl * a.powf(-q) + q * dl * (a - 1.0) + (a - 1.0).powi(2) / (2.0 * dl),
        VarpiForm::Kinked => dl / a.min(1.0).powf(q) + (a - 1.0).powi(2) / (2.0 * dl),
    }
}

/// ϖ′(a) for a > 0 (right derivative at the kink of the kinked form).
pub fn varpi_prime(a: f64, mp: &MaterialParams) -> f64 {
    let (dl, q) = (mp.delta_varpi, mp.q);
    match mp.varpi_form {
        VarpiForm::Smooth => -q * dl * a.powf(-q - 1.0) + q * dl + (a - 1.0) / dl,
        VarpiForm::Kinked => {
            let barrier = if a < 1.0 { -q * dl * a.powf(-q - 1.0) } else { 0.0 };
            barrier + (a - 1.0) / dl
        }
    }
}

/// ϖ″(a) for a > 0 (right value at the kink of the kinked form).
pub fn varpi_second(a: f64, mp: &MaterialParams) -> f64 {
    let (dl, q) = (mp.delta_varpi, mp.q);
    let barrier = q * (q + 1.0) * dl * a.powf(-q - 2.0);
    match mp.varpi_form {
        VarpiForm::Smooth => barrier + 1.0 / dl,
        VarpiForm::Kinked => {
            if a < 1.0 {
                barrier + 1.0 / dl
            } else {
                1.0 / dl
            }
        }
    }
}

fn plastic_inverse(p: &Mat) -> Result<(f64, Mat)> {
    let det = p.det();
    if !(det > 0.0) {
        return Err(Error::NonpositivePlasticDeterminant { det, cell: None });
    }
    match p.det_cof_inv() {
        Ok((det, _, inv)) => Ok((det, inv)),
        Err(_) => Err(Error::NonpositivePlasticDeterminant { det, cell: None }),
    }
}

/// Mechanical stored energy Φ_M(F_el, P, α, φ, ζ) with F_el = σ(φ) F P^{-1}.
pub fn stored_energy(ps: &PointState, mp: &MaterialParams) -> Result<f64> {
    let (det_p, p_inv) = plastic_inverse(&ps.p)?;
    let md = Moduli::at(ps.alpha, ps.phi, mp);
    let f_el = ps.f * p_inv * md.sigma[0];
    let (i1, i2, _) = invariants_of(&f_el);
    let s = 1.0 + mp.eps_reg * i2;
    let s4 = s.powf(0.25);
    let w = mp.beta * i1 - ps.zeta + ps.phi;
    Ok((0.5 * md.lambda[0] * i1 * i1 + md.g[0] * i2 + 0.5 * md.m[0] * w * w) / s4
        - md.gamma[0] * i1 * i2.sqrt() / s
        + varpi(det_p, mp)
        + md.chi[0])
}

/// Analytic partial derivatives of Φ_M with respect to ∇y, P, α, φ, ζ.
pub fn d_stored_energy(ps: &PointState, mp: &MaterialParams) -> Result<DrivingForces> {
    let d = mp.dim;
    let (det_p, p_inv) = plastic_inverse(&ps.p)?;
    let md = Moduli::at(ps.alpha, ps.phi, mp);
    let sig = md.sigma[0];
    let f_el = ps.f * p_inv * sig;
    let (i1, i2, e) = invariants_of(&f_el);
    let eps = mp.eps_reg;
    let s = 1.0 + eps * i2;
    let s4 = s.powf(0.25);
    let w = mp.beta * i1 - ps.zeta + ps.phi;
    let rt = i2.sqrt();
    let (lam, g, gam, m) = (md.lambda[0], md.g[0], md.gamma[0], md.m[0]);
    let quad = 0.5 * lam * i1 * i1 + g * i2 + 0.5 * m * w * w;

    let energy = quad / s4 - gam * i1 * rt / s + varpi(det_p, mp) + md.chi[0];

    // ∂Φ/∂E = a1 𝕀 + 2 a2 E, with the I1√I2 term split off to stay finite at E = 0.
    let a1 = (lam * i1 + m * mp.beta * w) / s4 - gam * rt / s;
    let a2 = g / s4 - 0.25 * eps * quad / (s4 * s) + gam * i1 * eps * rt / (s * s);
    let mut dphi_de = Mat::identity(d) * a1 + e * (2.0 * a2);
    if rt > 0.0 {
        dphi_de -= e * (gam * i1 / (rt * s));
    }
    let t = f_el * dphi_de;
    let p_inv_t = p_inv.transpose();

    let sigma_el = t * p_inv_t * sig;
    let sigma_in = -(f_el.transpose() * t * p_inv_t) + p_inv_t * (varpi_prime(det_p, mp) * det_p);

    let dpar = |k: usize| {
        (0.5 * md.lambda[k] * i1 * i1 + md.g[k] * i2 + 0.5 * md.m[k] * w * w) / s4
            - md.gamma[k] * i1 * rt / s
    };
    let p_age = dpar(1) + md.chi[1];
    let p_eff = dpar(2) + m * w / s4 + md.sigma[1] / sig * t.ddot(&f_el);
    let p_por = -m * w / s4;

    Ok(DrivingForces { sigma_el, sigma_in, p_age, p_eff, p_por, energy, zeta_curv: m / s4 })
}

/// ∂²Φ_M/∂ζ² = m(α,φ)/(1+εI2)^{1/4}.
pub fn zeta_curvature(ps: &PointState, mp: &MaterialParams) -> Result<f64> {
    let (_, p_inv) = plastic_inverse(&ps.p)?;
    let md = Moduli::at(ps.alpha, ps.phi, mp);
    let f_el = ps.f * p_inv * md.sigma[0];
    let (_, i2, _) = invariants_of(&f_el);
    Ok(md.m[0] / (1.0 + mp.eps_reg * i2).powf(0.25))
}

/// Tangent `∂σ_el/∂F` by central differences of the analytic stress.
pub fn stress_tangent(ps: &PointState, mp: &MaterialParams) -> Result<Tensor4> {
    let d = mp.dim;
    let scale = ps.f.max_abs().max(1.0);
    let h = 1e-6 * scale;
    let mut cols = [[Mat::zeros(d); 3]; 3];
    for k in 0..d {
        for l in 0..d {
            let mut plus = *ps;
            let mut minus = *ps;
            plus.f[(k, l)] += h;
            minus.f[(k, l)] -= h;
            let sp = d_stored_energy(&plus, mp)?.sigma_el;
            let sm = d_stored_energy(&minus, mp)?.sigma_el;
            cols[k][l] = (sp - sm) * (0.5 / h);
        }
    }
    Ok(Tensor4::from_fn(d, |i, j, k, l| 0.5 * (cols[k][l][(i, j)] + cols[i][j][(k, l)])))
}

/// Damage drive `γ_r I2 (ξ − ξ0)` with the strain-invariant ratio ξ = I1/√I2.
pub fn invariant_ratio_drive(i1: f64, i2: f64, mp: &MaterialParams) -> f64 {
    if i2 <= 0.0 {
        return 0.0;
    }
    mp.gamma_r * i2 * (i1 / i2.sqrt() - mp.xi0)
}
