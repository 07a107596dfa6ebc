use super::params::MaterialParams;
use crate::tensor::Mat;

/// Plastic dissipation potential `R(ρ) = ½ν|ρ|²` (+ optional smoothed yield
/// term, shifted so that R(0) = 0). Returns `(R(ρ), ∂R(ρ))`.
pub fn dissipation_r(rho: &Mat, mp: &MaterialParams) -> (f64, Mat) {
    let mut value = 0.5 * mp.nu_pl * rho.norm2();
    let mut force = *rho * mp.nu_pl;
    if mp.yield_stress > 0.0 {
        let d = rho.dim();
        let dev = *rho - Mat::identity(d) * (rho.trace() / d as f64);
        let eta = mp.yield_smoothing;
        let root = (dev.norm2() + eta * eta).sqrt();
        value += mp.yield_stress * (root - eta);
        force += dev * (mp.yield_stress / root);
    }
    (value, force)
}

/// Healing-branch coefficient `e^{α/c2 + b(φ0 − φ)}`.
fn healing_factor(alpha: f64, phi: f64, phi0: f64, mp: &MaterialParams) -> f64 {
    (alpha / mp.c2 + mp.b * (phi0 - phi)).exp()
}

/// Damage/porosity dissipation potential 𝔇 and its rate gradient.
///
/// The porosity part uses the coefficient `d_φ^{-1/(n+1)}` so that its
/// gradient inverts exactly to the rate law `φ̇ = d_φ|A|ⁿA`.
pub fn dissipation_d(
    alpha: f64,
    phi: f64,
    phi0: f64,
    alpha_dot: f64,
    phi_dot: f64,
    mp: &MaterialParams,
) -> (f64, [f64; 2]) {
    let n = mp.n_phi;
    let coef = mp.d_phi.powf(-1.0 / (n + 1.0));
    let ap = phi_dot.abs();
    let v_phi = (n + 1.0) / (n + 2.0) * coef * ap.powf((n + 2.0) / (n + 1.0));
    let f_phi = coef * ap.powf(1.0 / (n + 1.0)) * phi_dot.signum();

    let (v_a, f_a) = if alpha_dot >= 0.0 {
        (alpha_dot * alpha_dot / (2.0 * mp.c0), alpha_dot / mp.c0)
    } else {
        let k = 1.0 / (mp.c1 * healing_factor(alpha, phi, phi0, mp));
        (0.5 * k * alpha_dot * alpha_dot, k * alpha_dot)
    };
    (v_a + v_phi, [f_a, f_phi])
}

/// Closed-form inverse of ∂𝔇: given `(A_α, A_φ) = −(p_age, p_eff)` (with
/// their gradient parts) returns `(α̇, φ̇)`.
pub fn invert_flow_rules(
    drive: [f64; 2],
    alpha: f64,
    phi: f64,
    phi0: f64,
    mp: &MaterialParams,
) -> (f64, f64) {
    let [a_alpha, a_phi] = drive;
    let alpha_dot = if a_alpha >= 0.0 {
        mp.c0 * a_alpha
    } else {
        mp.c1 * healing_factor(alpha, phi, phi0, mp) * a_alpha
    };
    let phi_dot = mp.d_phi * a_phi.abs().powf(mp.n_phi) * a_phi;
    (alpha_dot, phi_dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp() -> MaterialParams {
        MaterialParams { c0: 0.5, c1: 0.5, c2: 0.5, b: 0.0, nu_pl: 2.0, d_phi: 0.3, n_phi: 1.0, ..Default::default() }
    }

    #[test]
    fn r_closed_forms() {
        let mp = mp();
        let (v, f) = dissipation_r(&Mat::zeros(2), &mp);
        assert_eq!(v, 0.0);
        assert_eq!(f, Mat::zeros(2));
        let e11 = Mat::outer(&[1.0, 0.0], &[1.0, 0.0]);
        let (v, f) = dissipation_r(&e11, &mp);
        assert_eq!(v, 1.0);
        assert_eq!(f, e11 * 2.0);
        assert_eq!(f.ddot(&e11), 2.0 * v);
    }

    #[test]
    fn d_closed_forms() {
        let mp = mp();
        let (v, f) = dissipation_d(0.0, 0.0, 0.0, 0.0, 0.0, &mp);
        assert_eq!(v, 0.0);
        assert_eq!(f, [0.0, 0.0]);
        let (v, f) = dissipation_d(0.0, 0.0, 0.0, 1.0, 0.0, &mp);
        assert_eq!(v, 1.0);
        assert_eq!(f[0], 2.0);
    }

    #[test]
    fn flow_rule_branches() {
        let mp = mp();
        assert_eq!(invert_flow_rules([0.0, 0.0], 0.0, 0.0, 0.0, &mp), (0.0, 0.0));
        assert_eq!(invert_flow_rules([2.0, 0.0], 0.0, 0.0, 0.0, &mp).0, 1.0);
        assert_eq!(invert_flow_rules([-1.0, 0.0], 0.0, 0.0, 0.0, &mp).0, -0.5);
    }
}
