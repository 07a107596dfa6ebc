//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a nonzero status if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use thermoporo::audits::{convergence_sweep, entropy_audit, heat_mms, indifference_suite, observed_orders};
use thermoporo::constitutive::{
    d_stored_energy, dissipation_d, dissipation_r, stored_energy, varpi, MaterialParams, PointState,
};
use thermoporo::galerkin::{
    mechanical_sweep, mu_zeta_pairing, transport_coefficients, weighted_stiffness, MuMode, MuSystem,
};
use thermoporo::scenario::{preset, run, ScenarioConfig};
use thermoporo::solver::Trajectory;
use thermoporo::tensor::Mat;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rock() -> MaterialParams {
    preset("fault_shear").unwrap().material
}

fn random_mat(rng: &mut ChaCha8Rng, amp: f64) -> Mat {
    Mat::from_fn(2, |_, _| amp * (2.0 * rng.random::<f64>() - 1.0))
}

fn admissible_state(rng: &mut ChaCha8Rng, mp: &MaterialParams) -> PointState {
    let r = Mat::rotation2(std::f64::consts::TAU * rng.random::<f64>());
    PointState {
        f: r * (Mat::identity(2) + random_mat(rng, 0.15)),
        p: Mat::identity(2) + random_mat(rng, 0.1),
        alpha: 0.05 + 0.9 * rng.random::<f64>(),
        phi: (0.05 + 0.7 * rng.random::<f64>()) * mp.phi_cr,
        zeta: rng.random::<f64>(),
        vartheta: 1.0,
        phi0: 0.1,
    }
}

/// `‖a − b‖∞ / ‖a‖∞` over paired gradient entries.
fn rel_inf(pairs: &[(f64, f64)]) -> f64 {
    let diff = pairs.iter().fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = pairs.iter().fold(0.0f64, |m, (a, _)| m.max(a.abs()));
    diff / scale.max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Outcome {
    let mp = rock();
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_m, mut worst_r, mut worst_d) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let ps = admissible_state(&mut rng, &mp);
        let an = d_stored_energy(&ps, &mp).unwrap();
        let phi = |s: &PointState| stored_energy(s, &mp).unwrap();
        let central = |plus: PointState, minus: PointState| (phi(&plus) - phi(&minus)) / (2.0 * h);
        let mut pairs = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let (mut a, mut b) = (ps, ps);
                a.f[(i, j)] += h;
                b.f[(i, j)] -= h;
                pairs.push((an.sigma_el[(i, j)], central(a, b)));
                let (mut a, mut b) = (ps, ps);
                a.p[(i, j)] += h;
                b.p[(i, j)] -= h;
                pairs.push((an.sigma_in[(i, j)], central(a, b)));
            }
        }
        pairs.push((an.p_age, central(PointState { alpha: ps.alpha + h, ..ps }, PointState { alpha: ps.alpha - h, ..ps })));
        pairs.push((an.p_eff, central(PointState { phi: ps.phi + h, ..ps }, PointState { phi: ps.phi - h, ..ps })));
        pairs.push((an.p_por, central(PointState { zeta: ps.zeta + h, ..ps }, PointState { zeta: ps.zeta - h, ..ps })));
        worst_m = worst_m.max(rel_inf(&pairs));

        let rho = random_mat(&mut rng, 1.0);
        let (_, force) = dissipation_r(&rho, &mp);
        let mut rp = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let (mut a, mut b) = (rho, rho);
                a[(i, j)] += h;
                b[(i, j)] -= h;
                rp.push((force[(i, j)], (dissipation_r(&a, &mp).0 - dissipation_r(&b, &mp).0) / (2.0 * h)));
            }
        }
        worst_r = worst_r.max(rel_inf(&rp));

        let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let ad = sign(&mut rng) * (0.1 + rng.random::<f64>());
        let pd = sign(&mut rng) * (0.1 + rng.random::<f64>());
        let dv = |a: f64, p: f64| dissipation_d(ps.alpha, ps.phi, ps.phi0, a, p, &mp).0;
        let (_, fd) = dissipation_d(ps.alpha, ps.phi, ps.phi0, ad, pd, &mp);
        let dp = [
            (fd[0], (dv(ad + h, pd) - dv(ad - h, pd)) / (2.0 * h)),
            (fd[1], (dv(ad, pd + h) - dv(ad, pd - h)) / (2.0 * h)),
        ];
        worst_d = worst_d.max(rel_inf(&dp));
    }
    let worst = worst_m.max(worst_r).max(worst_d);
    outcome(
        worst <= 1e-6,
        format!("max rel FD error: stored {worst_m:.2e}, plastic dissipation {worst_r:.2e}, damage/porosity dissipation {worst_d:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let r = indifference_suite(&rock(), 1000, 2).unwrap();
    outcome(
        r.max() <= 1e-12,
        format!(
            "frame {:.2e}, plastic {:.2e}, gradient terms {:.2e}, flow-rule two routes {:.2e}",
            r.frame, r.plastic, r.gradient, r.flow_rule
        ),
    )
}

fn criterion_3() -> Outcome {
    let mp = MaterialParams { eps_reg: 0.0, m_floor: false, ..rock() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f = Mat::identity(2) + random_mat(&mut rng, 0.3);
        let ps = PointState { f, zeta: rng.random::<f64>(), ..PointState::rest(2) };
        let e = (f.transpose() * f - Mat::identity(2)) * 0.5;
        let svk = 0.5 * mp.lambda0 * e.trace().powi(2) + mp.g0 * e.norm2();
        // The barrier contributes the constant ϖ(1) at P = 𝕀.
        let got = stored_energy(&ps, &mp).unwrap() - varpi(1.0, &mp);
        worst = worst.max((got - svk).abs() / svk.abs().max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-14, format!("max rel deviation {worst:.2e} over 100 strains"))
}

struct Runs {
    min_vartheta: f64,
    det: Vec<(String, f64, f64, f64, f64)>,
}

impl Runs {
    fn record(&mut self, label: &str, cfg: &ScenarioConfig, traj: &Trajectory) {
        let mut mv = traj.final_state.vartheta.iter().copied().fold(f64::INFINITY, f64::min);
        for r in &traj.ledger {
            mv = mv.min(r.min_vartheta);
        }
        self.min_vartheta = self.min_vartheta.min(mv);
        let md = traj.steps.iter().map(|s| s.min_det_p).fold(f64::INFINITY, f64::min);
        let bmin = traj.ledger.iter().map(|r| r.energies.barrier).fold(f64::INFINITY, f64::min);
        let bmax = traj.ledger.iter().map(|r| r.energies.barrier).fold(f64::NEG_INFINITY, f64::max);
        self.det.push((label.to_string(), md, cfg.solver.det_floor, bmin, bmax));
    }
}

fn criterion_4(runs: &mut Runs) -> Outcome {
    let base = preset("fault_shear").unwrap();
    let start = Instant::now();
    let mut res = Vec::new();
    for k in 0..3 {
        let mut cfg = base.clone();
        cfg.solver.dt = base.solver.dt / (1 << k) as f64;
        cfg.outputs.snapshot_every = usize::MAX;
        let (_, traj) = run(&cfg).unwrap();
        runs.record(&format!("fault_shear dt={:e}", cfg.solver.dt), &cfg, &traj);
        res.push(traj.ledger.last().unwrap().residual_total);
    }
    let secs = start.elapsed().as_secs_f64();
    let ratios = [res[1] / res[0], res[2] / res[1]];
    let pass = ratios.iter().all(|r| (0.4..=0.6).contains(r)) && secs < 300.0;
    outcome(
        pass,
        format!(
            "residuals {:.3e} {:.3e} {:.3e}, ratios {:.3} {:.3}, runtime {secs:.0} s",
            res[0], res[1], res[2], ratios[0], ratios[1]
        ),
    )
}

fn criterion_5(runs: &mut Runs) -> Outcome {
    let cfg = preset("oscillator").unwrap();
    let (_, traj) = run(&cfg).unwrap();
    runs.record("oscillator", &cfg, &traj);
    let e0 = traj.ledger[0].energies.total();
    let drift = traj.ledger.iter().map(|r| ((r.energies.total() - e0) / e0).abs()).fold(0.0, f64::max);
    let periods = cfg.solver.t_end / (cfg.solver.dt * 200.0);
    outcome(drift <= 1e-6, format!("max rel energy drift {drift:.2e} over {periods:.0} periods"))
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let mut cfg = preset("fault_shear").unwrap();
    cfg.material.k_bnd = 0.0;
    cfg.outputs.snapshot_every = usize::MAX;
    let (model, traj) = run(&cfg).unwrap();
    runs.record("fault_shear k_bnd=0", &cfg, &traj);
    let a = entropy_audit(&traj, &model).unwrap();
    outcome(
        a.max_decrease <= 1e-8 && a.min_production_integrand >= 0.0,
        format!("max entropy decrease {:.2e}, min production integrand {:.2e}", a.max_decrease, a.min_production_integrand),
    )
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let mut cfg = preset("fault_shear").unwrap();
    cfg.solver.t_end = 0.1;
    let eps = [1e-1, 1e-2, 1e-3];
    let sweep = convergence_sweep(&cfg, 0, &eps, 0, 1).unwrap();
    let zv: Vec<f64> = sweep.eps_runs.iter().map(|r| r.max_zeta_violation).collect();
    for r in &sweep.eps_runs {
        runs.min_vartheta = runs.min_vartheta.min(r.min_vartheta);
    }
    outcome(
        zv.windows(2).all(|w| w[1] < w[0]),
        format!("max ζ-violation {:.3e} {:.3e} {:.3e} for ε = 1e-1, 1e-2, 1e-3", zv[0], zv[1], zv[2]),
    )
}

fn criterion_9(runs: &mut Runs) -> Outcome {
    let heat = preset("heat_only").unwrap();
    let levels = heat_mms(&heat, &[4, 8, 16], 0.5).unwrap();
    let orders = observed_orders(&levels);
    let mms_ok = orders.iter().all(|o| (o - 2.0).abs() <= 0.2);

    let mut full = preset("fault_shear").unwrap();
    full.domain.nx = 8;
    full.domain.ny = 8;
    full.solver.t_end = 0.05;
    let sweep = convergence_sweep(&full, 3, &[], 0, 1).unwrap();
    for r in &sweep.h_runs {
        runs.min_vartheta = runs.min_vartheta.min(r.min_vartheta);
    }
    let (d1, d2) = (sweep.h_differences[0], sweep.h_differences[1]);
    let pairs = [
        (d1.y_h2, d2.y_h2),
        (d1.p_w1q, d2.p_w1q),
        (d1.alpha_h1, d2.alpha_h1),
        (d1.phi_h1, d2.phi_h1),
        (d1.zeta_h1, d2.zeta_h1),
        (d1.mu_h1, d2.mu_h1),
    ];
    let monotone = pairs.iter().all(|(a, b)| b < a);
    outcome(
        mms_ok && monotone,
        format!(
            "heat L² orders {:.3} {:.3}; refinement differences 8→16→32 (y, P, α, φ, ζ, μ): {}",
            orders[0],
            orders[1],
            pairs.iter().map(|(a, b)| format!("{a:.2e}>{b:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut cfg = preset("fault_shear").unwrap();
    cfg.domain.nx = 8;
    cfg.domain.ny = 8;
    let (model, mut s) = cfg.build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for v in s.y.iter_mut() {
        *v += 0.01 * (rng.random::<f64>() - 0.5);
    }
    for i in 0..model.sp.n_nodes() {
        s.zeta[i] = 0.2 + 0.6 * rng.random::<f64>();
        s.mu[i] = rng.random::<f64>() - 0.5;
    }
    let (sp, ops, mp) = (&model.sp, &model.ops, &model.mp);
    let sw = mechanical_sweep(sp, &s.fields(), mp).unwrap();
    let tc = transport_coefficients(sp, &s.fields(), mp).unwrap();
    let kmob = weighted_stiffness(sp, &tc.mobility);
    let zeta_prev: Vec<f64> = s.zeta.iter().map(|z| z - 0.01).collect();
    let (mut worst, mut spd) = (0.0f64, true);
    for mode in [MuMode::Elimination, MuMode::Step { dt: 0.01, zeta_prev: &zeta_prev }] {
        let sys = MuSystem {
            sp,
            ops,
            k_mobility: &kmob,
            load_zeta: &sw.load_zeta,
            zeta_curv: &sw.zeta_curv,
            zeta: &s.zeta,
            mu_guess: &s.mu,
            mp,
            mu_flat: cfg.loading.mu_flat,
            eps: cfg.solver.eps,
            tol: 1e-14,
        };
        let sol = sys.solve(mode).unwrap();
        let a = sys.dense_operator(mode);
        let n = a.len();
        let am = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
        spd &= (0..n).all(|i| (0..n).all(|j| (a[i][j] - a[j][i]).abs() <= 1e-14 * am.amax()));
        for _ in 0..100 {
            let v = nalgebra::DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            spd &= v.dot(&(&am * &v)) > 0.0;
        }
        let Some(chol) = am.clone().cholesky() else {
            return outcome(false, "dense μ operator is not positive definite".into());
        };
        let x = chol.solve(&nalgebra::DVector::from_vec(sys.dense_rhs(mode)));
        let err = (0..n).fold(0.0f64, |m, i| m.max((x[i] - sol.mu[i]).abs())) / x.amax().max(f64::MIN_POSITIVE);
        worst = worst.max(err);
    }
    outcome(spd && worst <= 1e-10, format!("SPD checks {}, max rel deviation from dense solve {worst:.2e}", if spd { "ok" } else { "failed" }))
}

fn criterion_11(runs: &mut Runs) -> Outcome {
    for name in ["heat_only", "consolidation"] {
        let cfg = preset(name).unwrap();
        let (_, traj) = run(&cfg).unwrap();
        runs.record(name, &cfg, &traj);
    }
    let pass = runs.det.iter().all(|(_, md, floor, _, _)| md >= floor);
    let detail = runs
        .det
        .iter()
        .map(|(l, md, _, b0, b1)| format!("{l}: min det P {md:.4}, ϖ energy [{b0:.4e}, {b1:.4e}]"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let sp = thermoporo::galerkin::build_space(n, n, 1.0, 1.0, &thermoporo::galerkin::Side::ALL).unwrap();
        let ops = thermoporo::galerkin::assemble_operators(&sp);
        for _ in 0..100 {
            let zd: Vec<f64> = (0..sp.n_nodes()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let mu: Vec<f64> = (0..sp.n_nodes()).map(|_| 1e3 * (rng.random::<f64>() - 0.5)).collect();
            let (a, b) = mu_zeta_pairing(&ops, &zd, &mu);
            let scale: f64 = (0..sp.n_nodes()).map(|i| (ops.lumped[i] * zd[i] * mu[i]).abs()).sum();
            worst = worst.max((a + b).abs() / (f64::EPSILON * scale));
        }
    }
    outcome(worst <= 4.0, format!("max |transport + potential| = {worst:.2} ulp of Σ|w μ ζ̇|"))
}

fn main() {
    let mut runs = Runs { min_vartheta: f64::INFINITY, det: Vec::new() };
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "derivative fidelity", criterion_1()));
    results.push((2, "indifference", criterion_2()));
    results.push((3, "St. Venant-Kirchhoff reduction", criterion_3()));
    results.push((4, "energy ledger dt-halving", criterion_4(&mut runs)));
    results.push((5, "conservative oscillator", criterion_5(&mut runs)));
    results.push((6, "second law", criterion_6(&mut runs)));
    results.push((8, "constraint penalization", criterion_8(&mut runs)));
    results.push((9, "Galerkin convergence", criterion_9(&mut runs)));
    results.push((10, "index-1 μ elimination", criterion_10()));
    results.push((11, "plastic determinant", criterion_11(&mut runs)));
    results.push((12, "±μζ̇ cancellation", criterion_12()));
    let mv = runs.min_vartheta;
    results.push((7, "temperature positivity", outcome(mv >= -1e-10, format!("min nodal ϑ over all runs {mv:.4e}"))));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (k, name, o) in &results {
        println!("criterion {k:2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
