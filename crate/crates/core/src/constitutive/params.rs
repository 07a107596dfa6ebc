use serde::{Deserialize, Serialize};

use crate::tensor::Mat;

/// Width of the C¹ transition layer used when clamping α and φ to [0, 1].
pub const CLAMP_LAYER: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarpiForm {
    /// `δ a^{-q} + qδ(a−1) + (a−1)²/(2δ)`: smooth, strictly convex, minimum δ at a = 1.
    Smooth,
    /// `δ / min(1,a)^q + (a−1)²/(2δ)`: kinked at a = 1.
    Kinked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaShape {
    /// `σ(φ) = exp(−φ/d)`
    Exp,
    /// `σ(φ) = 1 − φ/d`
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PullbackForm {
    /// `σ^{2−d} det P · P^{-T} 𝕄 P^{-1}`, identical to the Cof F route with F = P/σ.
    Derived,
    /// `σ^{2−d} P^{-T} 𝕄 P^{-1} / det P`.
    Printed,
}

/// Constitutive data. Units are SI in the defaults; presets are
/// nondimensionalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    pub dim: usize,
    pub lambda0: f64,
    pub lambda_r: f64,
    pub g0: f64,
    pub g_r: f64,
    pub gamma_r: f64,
    pub m0: f64,
    pub m_min: f64,
    /// When false, `m = α m0 (1 − φ/φ_cr)` without the floor.
    pub m_floor: bool,
    pub beta: f64,
    pub phi_cr: f64,
    pub eps_reg: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub tau_rel: f64,
    pub rho: f64,
    pub q: f64,
    pub delta_varpi: f64,
    pub varpi_form: VarpiForm,
    pub chi1: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub b: f64,
    pub xi0: f64,
    pub n_phi: f64,
    pub d_phi: f64,
    pub nu_pl: f64,
    /// Optional smoothed yield term `σ_y √(|dev ρ|² + η²)`; off when zero.
    pub yield_stress: f64,
    pub yield_smoothing: f64,
    pub mobility: Vec<Vec<f64>>,
    pub conductivity: Vec<Vec<f64>>,
    pub cv0: f64,
    /// `c_v(θ) = c_v0 (1 + gain θ/(1+θ))`; zero gives constant heat capacity.
    pub cv_gain: f64,
    pub theta_ref: f64,
    pub spring_n: f64,
    pub m_bnd: f64,
    pub k_bnd: f64,
    pub sigma_shape: SigmaShape,
    pub pullback: PullbackForm,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            dim: 2,
            lambda0: 3.0e10,
            lambda_r: 1.5e10,
            g0: 3.0e10,
            g_r: 2.0e10,
            gamma_r: 5.0e9,
            m0: 1.0e10,
            m_min: 1.0e8,
            m_floor: true,
            beta: 0.7,
            phi_cr: 0.6,
            eps_reg: 1e-2,
            kappa0: 1e4,
            kappa1: 1e4,
            kappa2: 1e4,
            kappa3: 1e4,
            kappa4: 1e4,
            tau_rel: 1e6,
            rho: 2700.0,
            q: 4.0,
            delta_varpi: 0.1,
            varpi_form: VarpiForm::Smooth,
            chi1: 1e6,
            c0: 1e-6,
            c1: 1e-7,
            c2: 0.5,
            b: 1.0,
            xi0: -0.8,
            n_phi: 1.0,
            d_phi: 1e-14,
            nu_pl: 1e12,
            yield_stress: 0.0,
            yield_smoothing: 1e-6,
            mobility: vec![vec![1e-12, 0.0], vec![0.0, 1e-12]],
            conductivity: vec![vec![3.0, 0.0], vec![0.0, 3.0]],
            cv0: 2.5e6,
            cv_gain: 0.0,
            theta_ref: 1.0,
            spring_n: 1e9,
            m_bnd: 0.0,
            k_bnd: 10.0,
            sigma_shape: SigmaShape::Exp,
            pullback: PullbackForm::Derived,
        }
    }
}

impl MaterialParams {
    pub fn mobility_mat(&self) -> Mat {
        Mat::from_fn(self.dim, |i, j| self.mobility[i][j])
    }

    pub fn conductivity_mat(&self) -> Mat {
        Mat::from_fn(self.dim, |i, j| self.conductivity[i][j])
    }
}

/// C¹ clamp of x to [0, 1]: identity inside, quadratic blend over a layer of
/// width [`CLAMP_LAYER`] outside, constant beyond. Returns (value, derivative).
pub fn clamp01(x: f64) -> (f64, f64) {
    let w = CLAMP_LAYER;
    if x < -w {
        (-0.5 * w, 0.0)
    } else if x < 0.0 {
        (x + x * x / (2.0 * w), 1.0 + x / w)
    } else if x <= 1.0 {
        (x, 1.0)
    } else if x < 1.0 + w {
        let t = x - 1.0;
        (x - t * t / (2.0 * w), 1.0 - t / w)
    } else {
        (1.0 + 0.5 * w, 0.0)
    }
}

/// Values of the (α, φ)-dependent moduli with their partial derivatives.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moduli {
    pub lambda: [f64; 3],
    pub g: [f64; 3],
    pub gamma: [f64; 3],
    pub m: [f64; 3],
    pub chi: [f64; 2],
    pub sigma: [f64; 2],
}

impl Moduli {
    /// Each array is `[value, ∂_α, ∂_φ]` (χ: `[value, ∂_α]`, σ: `[value, ∂_φ]`).
    pub fn at(alpha: f64, phi: f64, mp: &MaterialParams) -> Self {
        let (a, da) = clamp01(alpha);
        let (p, dp) = clamp01(phi);
        let f = 1.0 - p / mp.phi_cr;
        let df = -dp / mp.phi_cr;
        let lin = |base: f64, rate: f64| {
            let v = base - a * rate;
            [v * f, -rate * da * f, v * df]
        };
        let gv = a * mp.gamma_r;
        let mbase = if mp.m_floor { mp.m_min } else { 0.0 };
        let mv = mbase + a * mp.m0;
        let d = mp.dim as f64;
        let sigma = match mp.sigma_shape {
            SigmaShape::Exp => {
                let s = (-p / d).exp();
                [s, -s / d * dp]
            }
            SigmaShape::Linear => [1.0 - p / d, -dp / d],
        };
        Moduli {
            lambda: lin(mp.lambda0, mp.lambda_r),
            g: lin(mp.g0, mp.g_r),
            gamma: [gv * f, mp.gamma_r * da * f, gv * df],
            m: [mv * f, mp.m0 * da * f, mv * df],
            chi: [mp.chi1 * a * a, 2.0 * mp.chi1 * a * da],
            sigma,
        }
    }
}
