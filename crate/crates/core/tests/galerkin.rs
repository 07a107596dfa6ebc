use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoporo::constitutive::MaterialParams;
use thermoporo::galerkin::*;
use thermoporo::tensor::Mat;

fn params() -> MaterialParams {
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
        ..Default::default()
    }
}

struct Owned {
    y: Vec<f64>,
    p: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    phi: Vec<f64>,
    zeta: Vec<f64>,
    mu: Vec<f64>,
    vartheta: Vec<f64>,
    phi0: Vec<f64>,
}

impl Owned {
    fn rest(sp: &GalerkinSpace) -> Self {
        let n = sp.n_nodes();
        Owned {
            y: sp.identity_y(),
            p: vec![vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![1.0; n]],
            alpha: vec![0.0; n],
            phi: vec![0.0; n],
            zeta: vec![0.0; n],
            mu: vec![0.0; n],
            vartheta: vec![1.0; n],
            phi0: vec![0.0; n],
        }
    }

    fn random(sp: &GalerkinSpace, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::rest(sp);
        for v in s.y.iter_mut() {
            *v += 0.01 * (rng.random::<f64>() - 0.5);
        }
        for comp in s.p.iter_mut() {
            for v in comp.iter_mut() {
                *v += 0.05 * (rng.random::<f64>() - 0.5);
            }
        }
        for i in 0..sp.n_nodes() {
            s.alpha[i] = 0.2 + 0.5 * rng.random::<f64>();
            s.phi[i] = 0.1 + 0.2 * rng.random::<f64>();
            s.zeta[i] = 0.2 + 0.6 * rng.random::<f64>();
            s.mu[i] = rng.random::<f64>() - 0.5;
            s.vartheta[i] = 0.5 + rng.random::<f64>();
            s.phi0[i] = 0.2;
        }
        s
    }

    fn fields(&self) -> Fields<'_> {
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
}

fn space(n: usize) -> GalerkinSpace {
    build_space(n, n, 1.0, 1.0, &Side::ALL).unwrap()
}

#[test]
fn mass_rows_sum_to_cell_areas() {
    let sp = build_space(3, 2, 1.5, 0.8, &Side::ALL).unwrap();
    let ops = assemble_operators(&sp);
    let total: f64 = ops.lumped.iter().sum();
    assert!((total - 1.2).abs() < 1e-14);
    // Interior node of a uniform grid carries one cell area.
    let interior = sp.node(1, 1);
    assert!((ops.lumped[interior] - sp.grid.dx * sp.grid.dy).abs() < 1e-15);
    let perimeter: f64 = ops.boundary_lumped.iter().sum();
    assert!((perimeter - 2.0 * (1.5 + 0.8)).abs() < 1e-14);
    // The deformation mass reproduces ∫1 on each component.
    let ones = sp.interpolate_y(|_, _| [[1.0, 0.0, 0.0, 0.0], [0.0; 4]]);
    assert!((ops.y_mass.bilinear(&ones, &ones) - 1.2).abs() < 1e-13);
}

#[test]
fn operators_symmetric_and_definite() {
    let sp = space(3);
    let ops = assemble_operators(&sp);
    for m in [&ops.mass, &ops.stiffness, &ops.boundary_mass, &ops.y_mass, &ops.y_bending, &ops.y_boundary_mass] {
        assert!(m.asymmetry() < 1e-13);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let v: Vec<f64> = (0..sp.n_nodes()).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(ops.mass.bilinear(&v, &v) > 0.0);
        assert!(ops.stiffness.bilinear(&v, &v) >= -1e-14);
        let u: Vec<f64> = (0..sp.n_y_dofs()).map(|_| rng.random::<f64>() - 0.5).collect();
        assert!(ops.y_mass.bilinear(&u, &u) > 0.0);
        assert!(ops.y_bending.bilinear(&u, &u) >= -1e-12);
    }
    // Boundary mass restricted to boundary nodes is definite.
    let bn = sp.boundary_nodes();
    let v: Vec<f64> = (0..sp.n_nodes()).map(|i| if bn[i] { 1.0 + i as f64 } else { 0.0 }).collect();
    assert!(ops.boundary_mass.bilinear(&v, &v) > 0.0);
}

#[test]
fn bending_vanishes_on_affine_maps_and_matches_quadratic() {
    let sp = space(4);
    let ops = assemble_operators(&sp);
    let y = sp.identity_y();
    assert!(ops.y_bending.mul(&y).iter().all(|v| v.abs() < 1e-10));
    // y1 = x² / 2 has Hessian e1⊗e1: ∫|∇²y|² = area.
    let q = sp.interpolate_y(|x, _| [[0.5 * x * x, x, 0.0, 0.0], [0.0; 4]]);
    assert!((ops.y_bending.bilinear(&q, &q) - 1.0).abs() < 1e-12);
}

#[test]
fn prolongation_preserves_energy() {
    let mp = params();
    let c = space(2);
    let f = space(4);
    let s = Owned::random(&c, 3);
    let fine = Owned {
        y: c.prolong_y(&f, &s.y).unwrap(),
        p: s.p.iter().map(|v| c.prolong_scalar(&f, v).unwrap()).collect(),
        alpha: c.prolong_scalar(&f, &s.alpha).unwrap(),
        phi: c.prolong_scalar(&f, &s.phi).unwrap(),
        zeta: c.prolong_scalar(&f, &s.zeta).unwrap(),
        mu: c.prolong_scalar(&f, &s.mu).unwrap(),
        vartheta: c.prolong_scalar(&f, &s.vartheta).unwrap(),
        phi0: c.prolong_scalar(&f, &s.phi0).unwrap(),
    };
    let oc = assemble_operators(&c);
    let of = assemble_operators(&f);
    // Quadratic forms are polynomial, so the embedding is exact.
    let bc_ = oc.y_bending.bilinear(&s.y, &s.y);
    let bf = of.y_bending.bilinear(&fine.y, &fine.y);
    assert!((bc_ - bf).abs() <= 1e-12 * bc_.abs().max(1.0));
    let kc = oc.stiffness.bilinear(&s.alpha, &s.alpha);
    let kf = of.stiffness.bilinear(&fine.alpha, &fine.alpha);
    assert!((kc - kf).abs() <= 1e-12 * kc.abs().max(1.0));
    let qc = assemble_q_laplacian(&s.p, &c, &mp).energy;
    let qf = assemble_q_laplacian(&fine.p, &f, &mp).energy;
    assert!((qc - qf).abs() <= 1e-12 * qc.abs().max(1.0));
    // The stored energy is non-polynomial; the embedding only changes the
    // quadrature error.
    let ec = stored_energy_integral(&c, &s.fields(), &mp).unwrap();
    let ef = stored_energy_integral(&f, &fine.fields(), &mp).unwrap();
    assert!((ec - ef).abs() <= 1e-6 * ec.abs());
}

#[test]
fn q_laplacian_examples() {
    let mp = params();
    let sp = space(3);
    let s = Owned::rest(&sp);
    let ql = assemble_q_laplacian(&s.p, &sp, &mp);
    assert_eq!(ql.energy, 0.0);
    assert!(ql.action.iter().flatten().all(|&v| v == 0.0));

    let slope = 0.3;
    let mut p = s.p.clone();
    p[1] = sp.interpolate_scalar(|x, _| slope * x);
    let ql = assemble_q_laplacian(&p, &sp, &mp);
    let expect = mp.kappa1 / 4.0 * slope.powi(4);
    assert!((ql.energy - expect).abs() < 1e-15);
}

#[test]
fn q_laplacian_is_gradient_of_energy() {
    let mp = params();
    let sp = space(3);
    let s = Owned::random(&sp, 7);
    let mut p = s.p.clone();
    for (k, comp) in p.iter_mut().enumerate() {
        let smooth = sp.interpolate_scalar(|x, y| 0.2 * ((k + 1) as f64 * x).sin() * (2.0 * y).cos());
        for (v, w) in comp.iter_mut().zip(smooth) {
            *v += w;
        }
    }
    let ql = assemble_q_laplacian(&p, &sp, &mp);
    for k in 0..4 {
        for i in [0, 5, 7, 15] {
            let h = 1e-6;
            let mut pp = p.clone();
            pp[k][i] += h;
            let ep = assemble_q_laplacian(&pp, &sp, &mp).energy;
            pp[k][i] -= 2.0 * h;
            let em = assemble_q_laplacian(&pp, &sp, &mp).energy;
            let fd = (ep - em) / (2.0 * h);
            let a = ql.action[k][i];
            assert!((fd - a).abs() <= 1e-5 * a.abs().max(1e-8), "k={k} i={i} fd={fd} a={a}");
        }
    }
}

#[test]
fn mechanical_sweep_matches_energy_derivative() {
    let mp = params();
    let sp = space(2);
    let s = Owned::random(&sp, 11);
    let sw = mechanical_sweep(&sp, &s.fields(), &mp).unwrap();
    let e = |o: &Owned| stored_energy_integral(&sp, &o.fields(), &mp).unwrap();
    let h = 1e-6;
    for dof in [0, 9, 18, 40, 63] {
        let mut o = Owned::random(&sp, 11);
        o.y[dof] += h;
        let ep = e(&o);
        o.y[dof] -= 2.0 * h;
        let em = e(&o);
        let fd = (ep - em) / (2.0 * h);
        assert!((fd - sw.f_int[dof]).abs() <= 1e-6 * sw.f_int[dof].abs().max(1e-6), "dof {dof}");
    }
    for node in [0, 4, 8] {
        let mut o = Owned::random(&sp, 11);
        o.alpha[node] += h;
        let ep = e(&o);
        o.alpha[node] -= 2.0 * h;
        let fd = (ep - e(&o)) / (2.0 * h);
        assert!((fd - sw.load_alpha[node]).abs() <= 1e-6 * sw.load_alpha[node].abs().max(1e-6));
        let mut o = Owned::random(&sp, 11);
        o.p[1][node] += h;
        let ep = e(&o);
        o.p[1][node] -= 2.0 * h;
        let fd = (ep - e(&o)) / (2.0 * h);
        assert!((fd - sw.load_p[1][node]).abs() <= 1e-6 * sw.load_p[1][node].abs().max(1e-6));
    }
}

#[test]
fn tangent_matches_fd_of_internal_force() {
    let mp = params();
    let sp = space(2);
    let s = Owned::random(&sp, 5);
    let k = assemble_tangent(&sp, &s.fields(), &mp).unwrap();
    assert!(k.asymmetry() < 1e-6);
    let h = 1e-6;
    for dof in [3, 17, 44] {
        let mut o = Owned::random(&sp, 5);
        o.y[dof] += h;
        let fp = mechanical_sweep(&sp, &o.fields(), &mp).unwrap().f_int;
        o.y[dof] -= 2.0 * h;
        let fm = mechanical_sweep(&sp, &o.fields(), &mp).unwrap().f_int;
        for i in 0..sp.n_y_dofs() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            assert!((fd - k.get(i, dof)).abs() < 1e-5 * (1.0 + fd.abs()), "({i},{dof})");
        }
    }
}

fn mu_system_inputs(sp: &GalerkinSpace, s: &Owned, mp: &MaterialParams) -> (MechanicalSweep, CsrMatrix) {
    let sw = mechanical_sweep(sp, &s.fields(), mp).unwrap();
    let tc = transport_coefficients(sp, &s.fields(), mp).unwrap();
    (sw, weighted_stiffness(sp, &tc.mobility))
}

#[test]
fn mu_solve_matches_dense_direct_solve() {
    let mp = params();
    let sp = space(8);
    let ops = assemble_operators(&sp);
    let s = Owned::random(&sp, 21);
    let (sw, kmob) = mu_system_inputs(&sp, &s, &mp);
    let zeta_prev: Vec<f64> = s.zeta.iter().map(|z| z - 0.01).collect();
    for mode in [MuMode::Elimination, MuMode::Step { dt: 0.01, zeta_prev: &zeta_prev }] {
        let sys = MuSystem {
            sp: &sp,
            ops: &ops,
            k_mobility: &kmob,
            load_zeta: &sw.load_zeta,
            zeta_curv: &sw.zeta_curv,
            zeta: &s.zeta,
            mu_guess: &s.mu,
            mp: &mp,
            mu_flat: 0.3,
            eps: 1e-2,
            tol: 1e-13,
        };
        let sol = sys.solve(mode).unwrap();
        let a = sys.dense_operator(mode);
        let b = sys.dense_rhs(mode);
        let n = a.len();
        let am = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let chol = am.clone().cholesky().expect("SPD");
        let x = chol.solve(&nalgebra::DVector::from_vec(b));
        let scale = x.amax();
        for i in 0..n {
            assert!((x[i] - sol.mu[i]).abs() <= 1e-10 * scale, "{i}: {} vs {}", x[i], sol.mu[i]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let v = nalgebra::DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            assert!(v.dot(&(&am * &v)) > 0.0);
        }
    }
}

#[test]
fn mu_constant_state_solves_scalar_robin_balance() {
    let sp = space(3);
    let ops = assemble_operators(&sp);
    let s = Owned::rest(&sp);
    let bc = BoundaryData { mu_flat: 0.7, ..Default::default() };
    let (area, perim) = (1.0, 4.0);
    for mobility in [1.0, 1e8] {
        let mp = MaterialParams {
            beta: 0.0,
            m_floor: false,
            m0: 0.0,
            mobility: vec![vec![mobility, 0.0], vec![0.0, mobility]],
            ..params()
        };
        let sol = solve_chemical_potential(&s.fields(), MuMode::Elimination, &sp, &ops, &mp, &bc, 0.1).unwrap();
        // Tested with the constant: Σ (w/τ) μ + M_bnd ∫_Γ (μ − μ♭) = 0.
        let vol: f64 = (0..sp.n_nodes()).map(|i| ops.lumped[i] / mp.tau_rel * sol.mu[i]).sum();
        let bnd: f64 = (0..sp.n_nodes()).map(|i| mp.m_bnd * ops.boundary_lumped[i] * (sol.mu[i] - 0.7)).sum();
        // Roundoff in the transport operator scales with the mobility.
        assert!((vol + bnd).abs() < 1e-12 + 1e-14 * mobility, "{vol} {bnd}");
        if mobility > 1.0 {
            // Fast transport flattens μ onto the scalar Robin balance.
            let expect = mp.m_bnd * perim * 0.7 / (area / mp.tau_rel + mp.m_bnd * perim);
            for v in &sol.mu {
                assert!((v - expect).abs() < 1e-7, "{v} vs {expect}");
            }
        }
    }
}

#[test]
fn boundary_functional_examples() {
    let mp = params();
    let sp = space(3);
    let zero_y = vec![0.0; sp.n_y_dofs()];
    let n = sp.n_nodes();
    let bc = BoundaryData::default();
    let v = boundary_functionals(&zero_y, &vec![0.0; n], &vec![0.0; n], 0.0, &bc, &sp, &mp, 0.0);
    assert_eq!(v.spring_energy, 0.0);
    let c = sp.interpolate_y(|_, _| [[0.3, 0.0, 0.0, 0.0], [-0.4, 0.0, 0.0, 0.0]]);
    let v = boundary_functionals(&c, &vec![0.0; n], &vec![0.0; n], 0.0, &bc, &sp, &mp, 0.0);
    let expect = 0.5 * mp.spring_n * 0.25 * 4.0;
    assert!((v.spring_energy - expect).abs() < 1e-14);
}

#[test]
fn boundary_functionals_match_facet_oracle() {
    let mp = params();
    let sp = build_space(3, 2, 1.2, 0.7, &Side::ALL).unwrap();
    let s = Owned::random(&sp, 9);
    let bc = BoundaryData {
        velocity_gradient: Mat::new2(0.1, 0.3, -0.2, 0.05),
        center: [0.6, 0.35],
        mu_flat: 0.2,
        theta_flat: 1.3,
        ..Default::default()
    };
    let (t, eps) = (0.4, 0.05);
    let v = boundary_functionals(&s.y, &s.mu, &s.vartheta, t, &bc, &sp, &mp, eps);
    // Oracle: walk each side, 5-point Gauss per facet, pointwise evaluation.
    let gl = gauss_legendre_unit(5);
    let (mut spring, mut water, mut pair, mut rate) = (0.0, 0.0, 0.0, 0.0);
    let mut heat = 0.0;
    let (lx, ly) = (1.2, 0.7);
    let theta_b = 1.3 / (1.0 + eps * 1.3);
    let sides: [(usize, f64, Box<dyn Fn(f64) -> [f64; 2]>); 4] = [
        (3, lx / 3.0, Box::new(|s| [s, 0.0])),
        (3, lx / 3.0, Box::new(move |s| [s, ly])),
        (2, ly / 2.0, Box::new(|s| [0.0, s])),
        (2, ly / 2.0, Box::new(move |s| [lx, s])),
    ];
    for (cells, h, at) in &sides {
        for k in 0..*cells {
            for &(g, w) in &gl {
                let x = at((k as f64 + g) * h);
                let (yv, _) = sp.eval_y(&s.y, x[0], x[1]);
                let m = sp.eval_scalar(&s.mu, x[0], x[1]);
                let yf = bc.y_flat(x, t);
                let yr = bc.y_flat_rate(x);
                spring += w * h * 0.5 * mp.spring_n * (yv[0] * yv[0] + yv[1] * yv[1]);
                water += w * h * mp.m_bnd * (m - 0.2) * m;
                pair += w * h * mp.spring_n * (yf[0] * yv[0] + yf[1] * yv[1]);
                rate += w * h * mp.spring_n * (yr[0] * yv[0] + yr[1] * yv[1]);
            }
            for e in [0.0, 1.0] {
                let x = at((k as f64 + e) * h);
                let th = sp.eval_scalar(&s.vartheta, x[0], x[1]) / mp.cv0;
                heat += 0.5 * h * mp.k_bnd * (th - theta_b);
            }
        }
    }
    for (a, b) in [(v.spring_energy, spring), (v.water_outflow, water), (v.flat_pairing, pair), (v.flat_rate_pairing, rate), (v.heat_outflow, heat)] {
        assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn equilibrium_has_zero_residuals() {
    let mp = params();
    let sp = space(3);
    let ops = assemble_operators(&sp);
    let mut s = Owned::rest(&sp);
    // Stress-free: F = P = 𝕀, w = βI1 − ζ + φ = 0, μ = ∂_ζΦ = 0, ϑ uniform at θ♭.
    let mp = MaterialParams { spring_n: 0.0, chi1: 0.0, delta_varpi: 0.1, ..mp };
    s.vartheta = vec![mp.cv0 * 1.0; sp.n_nodes()];
    let bc = BoundaryData { theta_flat: 1.0, ..Default::default() };
    let r = assemble_residuals(&s.fields(), &FieldRates::zero(&sp), 0.0, &sp, &ops, &mp, &bc, 0.0).unwrap();
    // The damage drive at α = 0 comes from the moduli derivatives times zero strain.
    assert!(r.max_abs() < 1e-12, "{}", r.max_abs());
}

#[test]
fn heat_residual_of_manufactured_solution_converges_at_h2() {
    let mp = MaterialParams { k_bnd: 0.0, ..params() };
    let pi = std::f64::consts::PI;
    let exact = move |x: f64, _y: f64, t: f64| (pi * x).cos() * (-t).exp() + 2.0;
    // ϑ_t − Δϑ = s with ϑ = cos(πx)e^{-t} + 2.
    let source = move |x: f64, _y: f64, t: f64| (pi * pi - 1.0) * (pi * x).cos() * (-t).exp();
    let mut errs = vec![];
    for n in [4, 8, 16] {
        let sp = space(n);
        let ops = assemble_operators(&sp);
        let mut s = Owned::rest(&sp);
        let t = 0.3;
        s.vartheta = sp.interpolate_scalar(|x, y| exact(x, y, t));
        let mut rates = FieldRates::zero(&sp);
        rates.vartheta_dot = sp.interpolate_scalar(|x, y| -(exact(x, y, t) - 2.0));
        let bc = BoundaryData { heat_source: Some(std::sync::Arc::new(source)), ..Default::default() };
        let r = assemble_residuals(&s.fields(), &rates, t, &sp, &ops, &mp, &bc, 0.0).unwrap();
        // Discrete L² size of the residual: solve M e = r.
        let mut e = vec![0.0; sp.n_nodes()];
        pcg_csr(&ops.mass, &r.heat, &mut e, 1e-13, 10_000).unwrap();
        errs.push(ops.mass.bilinear(&e, &e).sqrt());
    }
    for k in 0..2 {
        let order = (errs[k] / errs[k + 1]).log2();
        assert!((1.8..=2.3).contains(&order), "orders {errs:?}");
    }
}

proptest! {
    #[test]
    fn mu_zeta_pairing_cancels(seed in 0u64..1000, n in 1usize..6) {
        let sp = space(n);
        let ops = assemble_operators(&sp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zd: Vec<f64> = (0..sp.n_nodes()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mu: Vec<f64> = (0..sp.n_nodes()).map(|_| (rng.random::<f64>() - 0.5) * 1e3).collect();
        let (a, b) = mu_zeta_pairing(&ops, &zd, &mu);
        let scale: f64 = (0..sp.n_nodes()).map(|i| (ops.lumped[i] * zd[i] * mu[i]).abs()).sum();
        prop_assert!((a + b).abs() <= 4.0 * f64::EPSILON * scale);
    }

    #[test]
    fn robin_matrices_positive(seed in 0u64..1000) {
        let sp = space(3);
        let ops = assemble_operators(&sp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bn = sp.boundary_nodes();
        let v: Vec<f64> = (0..sp.n_nodes()).map(|i| if bn[i] { rng.random::<f64>() - 0.5 } else { 0.0 }).collect();
        prop_assert!(ops.boundary_mass.bilinear(&v, &v) > 0.0);
    }
}
