//! Refinement sweeps along one axis at a time and the manufactured-solution
//! study of the heat equation.

use crate::constitutive::{enthalpy, enthalpy_inverse, heat_capacity, pullback_conductivity};
use crate::error::{Error, Result};
use crate::galerkin::{assemble_operators, gauss_legendre_unit, AssembledOperators, GalerkinSpace};
use crate::scenario::{run, ScenarioConfig};
use crate::solver::{march, State, Trajectory};
use crate::tensor::Mat;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

/// Norms used to compare runs: `H²` for `y`, `W^{1,q}` for `P`, `H¹` for
/// the scalar fields.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldNorms {
    pub y_l2: f64,
    pub y_h2: f64,
    pub p_w1q: f64,
    pub alpha_h1: f64,
    pub phi_h1: f64,
    pub zeta_h1: f64,
    pub mu_h1: f64,
}

impl FieldNorms {
    pub fn max(&self) -> f64 {
        [self.y_l2, self.y_h2, self.p_w1q, self.alpha_h1, self.phi_h1, self.zeta_h1, self.mu_h1].into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub eps: f64,
    pub steps: usize,
    pub rejections: usize,
    pub final_residual: f64,
    pub max_residual: f64,
    pub max_zeta_violation: f64,
    pub min_det_p: f64,
    pub min_vartheta: f64,
    /// Norms of the terminal state.
    pub norms: FieldNorms,
    /// Largest norms over the snapshots (the `μ` entry is `‖μ‖_{L²(0,T;H¹)}`).
    pub monitors: FieldNorms,
    pub final_state: State,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    pub h_runs: Vec<SweepRun>,
    pub eps_runs: Vec<SweepRun>,
    pub dt_runs: Vec<SweepRun>,
    /// Terminal differences of successive mesh levels on the finest space.
    pub h_differences: Vec<FieldNorms>,
    /// Terminal differences `(i, j, ‖u_i − u_j‖)` of every pair of mesh
    /// levels `i < j`, on the finest space.
    pub h_pair_differences: Vec<(usize, usize, FieldNorms)>,
    /// Terminal differences of successive time-step levels.
    pub dt_differences: Vec<FieldNorms>,
}

fn scalar_h1(ops: &AssembledOperators, v: &[f64]) -> f64 {
    (ops.mass.bilinear(v, v) + ops.stiffness.bilinear(v, v)).max(0.0).sqrt()
}

fn y_h2(ops: &AssembledOperators, v: &[f64]) -> f64 {
    (ops.y_mass.bilinear(v, v) + ops.y_bending.bilinear(v, v)).max(0.0).sqrt()
}

fn p_w1q(sp: &GalerkinSpace, p: &[Vec<f64>], q: f64) -> f64 {
    let mut total = 0.0;
    for c in 0..sp.n_cells() {
        let nodes = sp.cell_nodes(c);
        for k in 0..sp.n_quad() {
            let (val, grad) = (&sp.cell.q1_val[k], &sp.cell.q1_grad[k]);
            let (mut v2, mut g2) = (0.0, 0.0);
            for comp in p {
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for a in 0..4 {
                    v += comp[nodes[a]] * val[a];
                    g[0] += comp[nodes[a]] * grad[a][0];
                    g[1] += comp[nodes[a]] * grad[a][1];
                }
                v2 += v * v;
                g2 += g[0] * g[0] + g[1] * g[1];
            }
            total += sp.cell.weights[k] * (v2.powf(0.5 * q) + g2.powf(0.5 * q));
        }
    }
    total.powf(1.0 / q)
}

fn norms(sp: &GalerkinSpace, ops: &AssembledOperators, s: &State, q: f64) -> FieldNorms {
    FieldNorms {
        y_l2: ops.y_mass.bilinear(&s.y, &s.y).max(0.0).sqrt(),
        y_h2: y_h2(ops, &s.y),
        p_w1q: p_w1q(sp, &s.p, q),
        alpha_h1: scalar_h1(ops, &s.alpha),
        phi_h1: scalar_h1(ops, &s.phi),
        zeta_h1: scalar_h1(ops, &s.zeta),
        mu_h1: scalar_h1(ops, &s.mu),
    }
}

/// Embeds a state into a refined space.
fn prolong(coarse: &GalerkinSpace, fine: &GalerkinSpace, s: &State) -> Result<State> {
    let sc = |v: &Vec<f64>| coarse.prolong_scalar(fine, v);
    Ok(State {
        t: s.t,
        y: coarse.prolong_y(fine, &s.y)?,
        v: coarse.prolong_y(fine, &s.v)?,
        p: s.p.iter().map(sc).collect::<Result<_>>()?,
        alpha: sc(&s.alpha)?,
        phi: sc(&s.phi)?,
        zeta: sc(&s.zeta)?,
        mu: sc(&s.mu)?,
        vartheta: sc(&s.vartheta)?,
        phi0: sc(&s.phi0)?,
    })
}

fn difference(a: &State, b: &State) -> State {
    let sub = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(u, v)| u - v).collect::<Vec<f64>>();
    State {
        t: a.t,
        y: sub(&a.y, &b.y),
        v: sub(&a.v, &b.v),
        p: a.p.iter().zip(&b.p).map(|(x, y)| sub(x, y)).collect(),
        alpha: sub(&a.alpha, &b.alpha),
        phi: sub(&a.phi, &b.phi),
        zeta: sub(&a.zeta, &b.zeta),
        mu: sub(&a.mu, &b.mu),
        vartheta: sub(&a.vartheta, &b.vartheta),
        phi0: sub(&a.phi0, &b.phi0),
    }
}

fn summarize(cfg: &ScenarioConfig, traj: Trajectory, sp: &GalerkinSpace) -> SweepRun {
    let ops = assemble_operators(sp);
    let mut mu_sq = 0.0;
    for w in traj.snapshots.windows(2) {
        let (a, b) = (scalar_h1(&ops, &w[0].mu), scalar_h1(&ops, &w[1].mu));
        mu_sq += 0.5 * (w[1].t - w[0].t) * (a * a + b * b);
    }
    let q = cfg.material.q;
    let mut monitors = FieldNorms::default();
    for s in traj.snapshots.iter().chain(std::iter::once(&traj.final_state)) {
        let n = norms(sp, &ops, s, q);
        monitors.y_l2 = monitors.y_l2.max(n.y_l2);
        monitors.y_h2 = monitors.y_h2.max(n.y_h2);
        monitors.p_w1q = monitors.p_w1q.max(n.p_w1q);
        monitors.alpha_h1 = monitors.alpha_h1.max(n.alpha_h1);
        monitors.phi_h1 = monitors.phi_h1.max(n.phi_h1);
        monitors.zeta_h1 = monitors.zeta_h1.max(n.zeta_h1);
    }
    monitors.mu_h1 = mu_sq.sqrt();
    let fold = |f: fn(&crate::solver::LedgerRow) -> f64, init: f64, op: fn(f64, f64) -> f64| {
        traj.ledger.iter().map(f).fold(init, op)
    };
    SweepRun {
        nx: cfg.domain.nx,
        ny: cfg.domain.ny,
        dt: cfg.solver.dt,
        eps: cfg.solver.eps,
        steps: traj.steps.len(),
        rejections: traj.rejections,
        final_residual: traj.ledger.last().map_or(0.0, |r| r.residual_total),
        max_residual: fold(|r| r.residual_total, 0.0, f64::max),
        max_zeta_violation: fold(|r| r.zeta_violation, 0.0, f64::max),
        min_det_p: traj.steps.iter().map(|s| s.min_det_p).fold(f64::INFINITY, f64::min),
        min_vartheta: fold(|r| r.min_vartheta, f64::INFINITY, f64::min),
        norms: norms(sp, &ops, &traj.final_state, q),
        monitors,
        final_state: traj.final_state,
    }
}

/// Runs every configuration on up to `threads` worker threads, keeping the
/// input order.
fn run_all(cfgs: &[ScenarioConfig], threads: usize) -> Result<Vec<SweepRun>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SweepRun>>>> = Mutex::new((0..cfgs.len()).map(|_| None).collect());
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::SeqCst);
        if k >= cfgs.len() {
            break;
        }
        let out = cfgs[k].space().and_then(|sp| run(&cfgs[k]).map(|(_, traj)| summarize(&cfgs[k], traj, &sp)));
        slots.lock().unwrap_or_else(|e| e.into_inner())[k] = Some(out);
    };
    std::thread::scope(|s| {
        for _ in 1..threads.clamp(1, cfgs.len().max(1)) {
            s.spawn(worker);
        }
        worker();
    });
    slots.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().map(|r| r.expect("every job ran")).collect()
}

fn snapshot_cadence(cfg: &mut ScenarioConfig) {
    let steps = (cfg.solver.t_end / cfg.solver.dt).ceil().max(1.0) as usize;
    cfg.outputs.snapshot_every = (steps / 50).max(1);
}

/// Refines the base scenario along each axis separately: `h_levels` mesh
/// levels (base mesh and its dyadic refinements) at the base time step and
/// ε, one run per entry of `eps_list` on the base mesh, and `dt_levels`
/// dyadic time-step levels on the base mesh.
pub fn convergence_sweep(
    base: &ScenarioConfig,
    h_levels: usize,
    eps_list: &[f64],
    dt_levels: usize,
    threads: usize,
) -> Result<SweepResult> {
    let mut cfgs = Vec::new();
    for k in 0..h_levels {
        let mut c = base.clone();
        c.domain.nx = base.domain.nx << k;
        c.domain.ny = base.domain.ny << k;
        cfgs.push(c);
    }
    for &eps in eps_list {
        let mut c = base.clone();
        c.solver.eps = eps;
        cfgs.push(c);
    }
    for k in 0..dt_levels {
        let mut c = base.clone();
        c.solver.dt = base.solver.dt / (1u64 << k) as f64;
        cfgs.push(c);
    }
    for c in cfgs.iter_mut() {
        snapshot_cadence(c);
        crate::scenario::validate(c)?;
    }
    let mut runs = run_all(&cfgs, threads)?.into_iter();
    let h_runs: Vec<SweepRun> = runs.by_ref().take(h_levels).collect();
    let eps_runs: Vec<SweepRun> = runs.by_ref().take(eps_list.len()).collect();
    let dt_runs: Vec<SweepRun> = runs.collect();

    let mut h_differences = Vec::new();
    let mut h_pair_differences = Vec::new();
    if let Some(finest) = cfgs.get(h_levels.wrapping_sub(1)).filter(|_| h_levels > 1) {
        let fine = finest.space()?;
        let fine_ops = assemble_operators(&fine);
        let lifted: Vec<State> = h_runs
            .iter()
            .zip(&cfgs)
            .map(|(r, c)| prolong(&c.space()?, &fine, &r.final_state))
            .collect::<Result<_>>()?;
        for i in 0..lifted.len() {
            for j in i + 1..lifted.len() {
                let d = norms(&fine, &fine_ops, &difference(&lifted[j], &lifted[i]), base.material.q);
                if j == i + 1 {
                    h_differences.push(d);
                }
                h_pair_differences.push((i, j, d));
            }
        }
    }
    let sp = base.space()?;
    let ops = assemble_operators(&sp);
    let dt_differences = dt_runs
        .windows(2)
        .map(|w| norms(&sp, &ops, &difference(&w[1].final_state, &w[0].final_state), base.material.q))
        .collect();
    Ok(SweepResult { h_runs, eps_runs, dt_runs, h_differences, h_pair_differences, dt_differences })
}

impl SweepResult {
    /// Largest ratio of a time-sup monitor on a refined mesh to its value on
    /// the base mesh.
    pub fn monitor_growth(&self) -> f64 {
        let Some(first) = self.h_runs.first() else { return 1.0 };
        let b = first.monitors;
        let base = [b.y_l2, b.y_h2, b.p_w1q, b.alpha_h1, b.phi_h1, b.zeta_h1, b.mu_h1];
        let mut worst = 1.0f64;
        for r in &self.h_runs[1..] {
            let m = r.monitors;
            let cur = [m.y_l2, m.y_h2, m.p_w1q, m.alpha_h1, m.phi_h1, m.zeta_h1, m.mu_h1];
            for (c, b) in cur.iter().zip(&base) {
                if *b > 0.0 {
                    worst = worst.max(c / b);
                }
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MmsLevel {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    /// `‖θ_h − θ‖_{L²}` at the final time.
    pub l2_error: f64,
}

/// Heat equation with the exact temperature
/// `θ = θ0 + a e^{−t} cos(πx/Lx) cos(πy/Ly)` and the matching source, on
/// `n × n` meshes with `dt ∝ h²`. Only the heat block may evolve and the
/// boundary must be insulated.
pub fn heat_mms(base: &ScenarioConfig, levels: &[usize], amplitude: f64) -> Result<Vec<MmsLevel>> {
    let ev = base.solver.evolve;
    if base.material.k_bnd != 0.0 || !ev.heat || ev.mechanics || ev.plastic || ev.damage || ev.porosity || ev.water {
        return Err(Error::Validation("heat MMS needs k_bnd = 0 and only the heat block evolving".into()));
    }
    let n0 = *levels.first().ok_or_else(|| Error::Validation("no MMS levels".into()))?;
    let (lx, ly) = (base.domain.lx, base.domain.ly);
    let theta0 = base.initial.theta;
    let pi = std::f64::consts::PI;
    let (kx, ky) = (pi / lx, pi / ly);
    let mp = base.material.clone();
    let k: Mat = pullback_conductivity(&Mat::identity(2), base.initial.phi, 0.0, 0.0, &mp)?;
    let exact = move |x: f64, y: f64, t: f64| theta0 + amplitude * (-t).exp() * (kx * x).cos() * (ky * y).cos();

    let mut out = Vec::new();
    for &n in levels {
        let mut cfg = base.clone();
        cfg.domain.nx = n;
        cfg.domain.ny = n;
        cfg.solver.dt = base.solver.dt * (n0 as f64 / n as f64).powi(2);
        cfg.outputs.snapshot_every = usize::MAX;
        cfg.outputs.ledger_every = usize::MAX;
        let (mut model, mut state) = cfg.build()?;
        for i in 0..model.sp.n_nodes() {
            let [x, y] = model.sp.node_coords(i);
            state.vartheta[i] = enthalpy(exact(x, y, 0.0), &mp);
        }
        let mps = mp.clone();
        model.bc.heat_source = Some(Arc::new(move |x: f64, y: f64, t: f64| {
            let u = amplitude * (-t).exp() * (kx * x).cos() * (ky * y).cos();
            let uxy = amplitude * (-t).exp() * kx * ky * (kx * x).sin() * (ky * y).sin();
            -heat_capacity(exact(x, y, t), &mps) * u + (k[(0, 0)] * kx * kx + k[(1, 1)] * ky * ky) * u
                - (k[(0, 1)] + k[(1, 0)]) * uxy
        }));
        let traj = march(&model, state, &cfg.march_options())?;
        let s = &traj.final_state;
        let theta: Vec<f64> = s.vartheta.iter().map(|&v| enthalpy_inverse(v.max(0.0), &mp)).collect();
        let sp = &model.sp;
        let rule = gauss_legendre_unit(5);
        let mut err2 = 0.0;
        for c in 0..sp.n_cells() {
            let [x0, y0] = sp.cell_origin(c);
            for &(a, wa) in &rule {
                for &(b, wb) in &rule {
                    let (x, y) = (x0 + a * sp.grid.dx, y0 + b * sp.grid.dy);
                    let e = sp.eval_scalar(&theta, x, y) - exact(x, y, s.t);
                    err2 += wa * wb * sp.grid.dx * sp.grid.dy * e * e;
                }
            }
        }
        out.push(MmsLevel { n, h: lx / n as f64, dt: cfg.solver.dt, l2_error: err2.sqrt() });
    }
    Ok(out)
}

/// Observed orders `log(e_k/e_{k+1}) / log(h_k/h_{k+1})`.
pub fn observed_orders(levels: &[MmsLevel]) -> Vec<f64> {
    levels.windows(2).map(|w| (w[0].l2_error / w[1].l2_error).ln() / (w[0].h / w[1].h).ln()).collect()
}
