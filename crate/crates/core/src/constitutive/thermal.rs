use super::params::MaterialParams;
use crate::error::{Error, Result};

/// Floor applied to θ inside the entropy logarithm.
pub const THETA_FLOOR: f64 = 1e-12;

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for &(x, w) in &GL4 {
            s += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

pub fn heat_capacity(theta: f64, mp: &MaterialParams) -> f64 {
    let t = theta.max(0.0);
    mp.cv0 * (1.0 + mp.cv_gain * t / (1.0 + t))
}

/// Enthalpy `C_v(θ) = ∫_0^θ c_v(s) ds`.
pub fn enthalpy(theta: f64, mp: &MaterialParams) -> f64 {
    if mp.cv_gain == 0.0 {
        return mp.cv0 * theta;
    }
    integrate(|s| heat_capacity(s, mp), 0.0, theta, 32)
}

/// `C_v^{-1}(ϑ)` by safeguarded Newton iteration.
pub fn enthalpy_inverse(vartheta: f64, mp: &MaterialParams) -> f64 {
    if mp.cv_gain == 0.0 {
        return vartheta / mp.cv0;
    }
    if vartheta <= 0.0 {
        return 0.0;
    }
    // c_v ∈ [c_v0, c_v0(1+gain)] brackets the root.
    let (mut lo, mut hi) = (vartheta / (mp.cv0 * (1.0 + mp.cv_gain.max(0.0))), vartheta / mp.cv0);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let r = enthalpy(t, mp) - vartheta;
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let mut next = t - r / heat_capacity(t, mp);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.abs().max(1e-300) {
            return next;
        }
        t = next;
    }
    t
}

/// Entropy `η(θ) = ∫_{θ_ref}^θ c_v(s)/s ds`, with θ floored at [`THETA_FLOOR`].
pub fn entropy(theta: f64, mp: &MaterialParams) -> f64 {
    let t = theta.max(THETA_FLOOR);
    let base = mp.cv0 * (t / mp.theta_ref).ln();
    if mp.cv_gain == 0.0 {
        return base;
    }
    // The c_v0/s part is integrated exactly; the bounded remainder by quadrature.
    base + integrate(|s| mp.cv0 * mp.cv_gain / (1.0 + s), mp.theta_ref, t, 32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Temperature {
    Theta(f64),
    Vartheta(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalPack {
    pub theta: f64,
    pub vartheta: f64,
    pub cv: f64,
    pub eta: f64,
    /// Factor `1/c_v(θ)` mapping 𝕂_eff to the conductivity acting on ∇ϑ.
    pub conduction_scale: f64,
}

pub fn thermal_pack(t: Temperature, mp: &MaterialParams) -> Result<ThermalPack> {
    let (theta, vartheta) = match t {
        Temperature::Theta(th) => (th, enthalpy(th.max(0.0), mp)),
        Temperature::Vartheta(v) => (enthalpy_inverse(v, mp), v),
    };
    let raw = match t {
        Temperature::Theta(th) => th,
        Temperature::Vartheta(v) => v,
    };
    if !(raw >= 0.0) {
        return Err(Error::NonpositiveTemperature(raw));
    }
    let cv = heat_capacity(theta, mp);
    Ok(ThermalPack { theta, vartheta, cv, eta: entropy(theta, mp), conduction_scale: 1.0 / cv })
}

/// `θ/(1+εθ)`, applied to boundary temperatures.
pub fn regularize_boundary_temperature(theta: f64, eps: f64) -> f64 {
    theta / (1.0 + eps * theta)
}

/// `θ0/(1+εθ0)`, applied to the initial temperature.
pub fn regularize_initial_temperature(theta0: f64, eps: f64) -> f64 {
    regularize_boundary_temperature(theta0, eps)
}
