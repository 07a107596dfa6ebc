use proptest::prelude::*;
use thermoporo::constitutive::*;
use thermoporo::scenario::preset;
use thermoporo::tensor::Mat;

fn rock() -> MaterialParams {
    preset("fault_shear").unwrap().material
}

fn mat(v: [f64; 4]) -> Mat {
    Mat::new2(v[0], v[1], v[2], v[3])
}

prop_compose! {
    fn near_identity(amp: f64)(v in prop::array::uniform4(-1.0f64..1.0)) -> Mat {
        Mat::identity(2) + mat(v) * amp
    }
}

prop_compose! {
    fn admissible()(
        angle in 0.0f64..std::f64::consts::TAU,
        f in near_identity(0.15),
        p in near_identity(0.1),
        alpha in 0.05f64..0.95,
        phi_frac in 0.05f64..0.75,
        zeta in 0.0f64..1.0,
    ) -> PointState {
        PointState {
            f: Mat::rotation2(angle) * f,
            p,
            alpha,
            phi: phi_frac * rock().phi_cr,
            zeta,
            vartheta: 1.0,
            phi0: 0.1,
        }
    }
}

fn central(ps: &PointState, mp: &MaterialParams, bump: impl Fn(&mut PointState, f64)) -> f64 {
    let h = 1e-6;
    let (mut a, mut b) = (*ps, *ps);
    bump(&mut a, h);
    bump(&mut b, -h);
    (stored_energy(&a, mp).unwrap() - stored_energy(&b, mp).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn driving_forces_match_central_differences(ps in admissible()) {
        let mp = rock();
        let an = d_stored_energy(&ps, &mp).unwrap();
        let scale = an.sigma_el.max_abs().max(an.sigma_in.max_abs()).max(an.p_eff.abs()).max(1e-3);
        for i in 0..2 {
            for j in 0..2 {
                let fd = central(&ps, &mp, |s, h| s.f[(i, j)] += h);
                prop_assert!((fd - an.sigma_el[(i, j)]).abs() <= 1e-6 * scale);
                let fd = central(&ps, &mp, |s, h| s.p[(i, j)] += h);
                prop_assert!((fd - an.sigma_in[(i, j)]).abs() <= 1e-6 * scale);
            }
        }
        prop_assert!((central(&ps, &mp, |s, h| s.alpha += h) - an.p_age).abs() <= 1e-6 * scale);
        prop_assert!((central(&ps, &mp, |s, h| s.phi += h) - an.p_eff).abs() <= 1e-6 * scale);
        prop_assert!((central(&ps, &mp, |s, h| s.zeta += h) - an.p_por).abs() <= 1e-6 * scale);
        prop_assert!((an.energy - stored_energy(&ps, &mp).unwrap()).abs() <= 1e-14 * an.energy.abs().max(1.0));
    }

    #[test]
    fn frame_indifference(ps in admissible(), angle in 0.0f64..std::f64::consts::TAU) {
        let mp = rock();
        let r = Mat::rotation2(angle);
        let turned = PointState { f: r * ps.f, ..ps };
        let (e0, e1) = (stored_energy(&ps, &mp).unwrap(), stored_energy(&turned, &mp).unwrap());
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
        let s0 = d_stored_energy(&ps, &mp).unwrap().sigma_el;
        let s1 = d_stored_energy(&turned, &mp).unwrap().sigma_el;
        prop_assert!((s1 - r * s0).max_abs() <= 1e-12 * s0.max_abs().max(1e-300));
    }

    #[test]
    fn plastic_indifference(ps in admissible(), angle in 0.0f64..std::f64::consts::TAU) {
        let mp = rock();
        let r = Mat::rotation2(angle);
        let prior = PointState { f: ps.f * r, p: ps.p * r, ..ps };
        let (e0, e1) = (stored_energy(&ps, &mp).unwrap(), stored_energy(&prior, &mp).unwrap());
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
    }

    #[test]
    fn saint_venant_kirchhoff_limit(f in near_identity(0.3), zeta in 0.0f64..1.0) {
        let mp = MaterialParams { eps_reg: 0.0, m_floor: false, ..rock() };
        let ps = PointState { f, zeta, ..PointState::rest(2) };
        let e = (f.transpose() * f - Mat::identity(2)) * 0.5;
        let svk = 0.5 * mp.lambda0 * e.trace().powi(2) + mp.g0 * e.norm2();
        let got = stored_energy(&ps, &mp).unwrap() - varpi(1.0, &mp);
        prop_assert!((got - svk).abs() <= 1e-14 * svk.abs().max(1e-300));
    }

    #[test]
    fn plastic_dissipation_gradient(v in prop::array::uniform4(-1.0f64..1.0), yield_stress in 0.0f64..0.5) {
        let mp = MaterialParams { yield_stress, yield_smoothing: 1e-3, ..rock() };
        let rho = mat(v);
        let (r, force) = dissipation_r(&rho, &mp);
        prop_assert!(r >= 0.0);
        prop_assert!(force.ddot(&rho) >= r - 1e-15);
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..2 {
                let (mut a, mut b) = (rho, rho);
                a[(i, j)] += h;
                b[(i, j)] -= h;
                let fd = (dissipation_r(&a, &mp).0 - dissipation_r(&b, &mp).0) / (2.0 * h);
                prop_assert!((fd - force[(i, j)]).abs() <= 1e-6 * force.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn flow_rule_inversion_round_trip(
        ad in -2.0f64..2.0,
        pd in -2.0f64..2.0,
        alpha in 0.0f64..1.0,
        phi in 0.0f64..0.3,
    ) {
        let mp = rock();
        let (_, force) = dissipation_d(alpha, phi, 0.1, ad, pd, &mp);
        let (a2, p2) = invert_flow_rules(force, alpha, phi, 0.1, &mp);
        prop_assert!((a2 - ad).abs() <= 1e-10 * ad.abs().max(1e-3));
        prop_assert!((p2 - pd).abs() <= 1e-10 * pd.abs().max(1e-3));
        // Convex potentials with zero minimum: the force pairs nonnegatively with the rate.
        prop_assert!(force[0] * ad + force[1] * pd >= 0.0);
    }

    #[test]
    fn enthalpy_inverse_round_trip(theta in 0.0f64..50.0, gain in 0.0f64..2.0) {
        let mp = MaterialParams { cv0: 1.5, cv_gain: gain, ..rock() };
        let v = enthalpy(theta, &mp);
        prop_assert!(v >= 0.0);
        prop_assert!((enthalpy_inverse(v, &mp) - theta).abs() <= 1e-10 * theta.max(1.0));
    }

    #[test]
    fn entropy_is_increasing_and_concave_in_enthalpy(a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let mp = rock();
        let eta = |v: f64| entropy(enthalpy_inverse(v, &mp), &mp);
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(eta(hi) > eta(lo));
        prop_assert!(eta(0.5 * (lo + hi)) >= 0.5 * (eta(lo) + eta(hi)) - 1e-12);
    }

    #[test]
    fn derived_pullback_matches_cofactor_route(p in near_identity(0.2), phi in 0.0f64..0.4) {
        let mp = rock();
        let k = pullback_conductivity(&p, phi, 0.5, 1.0, &mp).unwrap();
        let sigma = Moduli::at(0.0, phi, &mp).sigma[0];
        let f = p * (1.0 / sigma);
        let c = f.cof();
        let direct = c * mp.conductivity_mat() * c.transpose() * (1.0 / f.det());
        prop_assert!((k - direct).max_abs() <= 1e-12 * direct.max_abs());
    }

    #[test]
    fn barrier_bounds(a in 1e-3f64..1.0) {
        let smooth = rock();
        let kinked = MaterialParams { varpi_form: VarpiForm::Kinked, ..rock() };
        let (d, q) = (smooth.delta_varpi, smooth.q);
        prop_assert!(varpi(a, &kinked) >= d / a.powf(q) * (1.0 - 1e-14));
        prop_assert!(varpi(a, &smooth) >= 0.5 * d / a.powf(q));
        prop_assert!(varpi(a, &smooth) >= varpi(1.0, &smooth));
    }

    #[test]
    fn penalty_is_monotone_and_vanishes_on_unit_interval(z in -2.0f64..3.0, eps in 1e-4f64..1.0) {
        let y = yosida(z, eps);
        if (0.0..=1.0).contains(&z) {
            prop_assert_eq!(y, 0.0);
            prop_assert_eq!(yosida_energy(z, eps), 0.0);
        } else {
            prop_assert!(y * (z - 0.5) > 0.0);
        }
        let h = 1e-7;
        let fd = (yosida_energy(z + h, eps) - yosida_energy(z - h, eps)) / (2.0 * h);
        prop_assert!((fd - y).abs() <= 1e-5 * y.abs().max(1.0));
    }
}

#[test]
fn rest_state_has_no_driving_force_except_barrier_constant() {
    let mp = MaterialParams { m_floor: false, ..rock() };
    let ps = PointState::rest(2);
    let d = d_stored_energy(&ps, &mp).unwrap();
    assert!(d.sigma_el.max_abs() < 1e-15);
    assert!(d.sigma_in.max_abs() < 1e-15);
    assert!((d.energy - varpi(1.0, &mp)).abs() < 1e-15);
}

#[test]
fn collapsed_plastic_strain_is_an_error() {
    let mp = rock();
    let ps = PointState { p: Mat::new2(1.0, 0.0, 0.0, -0.5), ..PointState::rest(2) };
    assert!(stored_energy(&ps, &mp).is_err());
    assert_eq!(varpi(0.0, &mp), f64::INFINITY);
}
