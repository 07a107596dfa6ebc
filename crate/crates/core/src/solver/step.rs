use super::{Model, State};
use crate::constitutive::{dissipation_r, enthalpy_inverse, invert_flow_rules, varpi_second, HeatProduction};
use crate::error::{Error, Result};
use crate::galerkin::{
    assemble_q_laplacian, assemble_tangent, mechanical_sweep, nodal_heat_production, pcg, transport_coefficients,
    weighted_stiffness, FieldRates, Fields, MechanicalSweep, MuMode, MuSystem, SkylineCholesky,
};
use crate::tensor::Mat;

const NEWTON_MAX: usize = 30;
const NEWTON_REFRESH: usize = 8;
const CG_TOL: f64 = 1e-13;

/// Energy exchanged during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Increments {
    /// `dt Σ w r`.
    pub dissipation: f64,
    /// `dt Σ w r_ε`, the part returned as heat.
    pub heat: f64,
    pub work_gravity: f64,
    /// Spring work of the moving boundary datum, by parts in time.
    pub work_spring: f64,
    pub flux_water: f64,
    /// Boundary heat inflow plus the volumetric source.
    pub flux_heat: f64,
}

impl std::ops::AddAssign for Increments {
    fn add_assign(&mut self, o: Self) {
        self.dissipation += o.dissipation;
        self.heat += o.heat;
        self.work_gravity += o.work_gravity;
        self.work_spring += o.work_spring;
        self.flux_water += o.flux_water;
        self.flux_heat += o.flux_heat;
    }
}

#[derive(Clone, Debug)]
pub struct StepReport {
    /// End time of the step.
    pub t: f64,
    pub dt: f64,
    pub fp_iterations: usize,
    pub newton_iterations: usize,
    pub cg_plastic: usize,
    pub cg_water: usize,
    pub cg_heat: usize,
    pub zeta_violation: f64,
    pub min_det_p: f64,
    pub min_det_cell: usize,
    pub varpi_energy: f64,
    pub min_vartheta: f64,
    pub increments: Increments,
}

/// Per-node data of an accepted step.
#[derive(Clone, Debug)]
pub struct StepDetail {
    pub heat_production: Vec<HeatProduction>,
    /// Rates of the step; the acceleration is `(v' − vⁿ)/dt`.
    pub rates: FieldRates,
}

/// Midpoint fields at which the step equations are collocated: `y` at the
/// midpoint, every other field at the new time level.
pub fn midpoint_y(old: &State, new: &State) -> Vec<f64> {
    old.y.iter().zip(&new.y).map(|(a, b)| 0.5 * (a + b)).collect()
}

pub fn midpoint_fields<'a>(y_mid: &'a [f64], new: &'a State) -> Fields<'a> {
    Fields { y: y_mid, ..new.fields() }
}

struct Factor {
    dt: f64,
    chol: SkylineCholesky,
}

/// Rates of the last accepted step, used to extrapolate the first iterate.
struct Trend {
    t_end: f64,
    accel: Vec<f64>,
    rates: State,
}

/// Advances a [`State`] by one step. Holds the factored deformation
/// Jacobian between steps.
pub struct Stepper<'m> {
    model: &'m Model,
    factor: Option<Factor>,
    trend: Option<Trend>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Relative update test `|x − x_prev| ≤ tol |x − x_old| + 1e-13 max(1, |x|)`.
fn settled(x: &[f64], prev: &[f64], old: &[f64], tol: f64) -> (bool, f64) {
    let mut upd = 0.0f64;
    let mut span = 0.0f64;
    for i in 0..x.len() {
        upd = upd.max((x[i] - prev[i]).abs());
        span = span.max((x[i] - old[i]).abs());
    }
    let scale = max_abs(x).max(1.0);
    (upd <= tol * span + 1e-13 * scale, upd / scale)
}

fn nodal_p(p: &[Vec<f64>], i: usize) -> Mat {
    Mat::new2(p[0][i], p[1][i], p[2][i], p[3][i])
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m Model) -> Self {
        Stepper { model, factor: None, trend: None }
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    /// One step of length `dt` from `old`. No retries.
    pub fn step(&mut self, old: &State, dt: f64) -> Result<(State, StepReport, StepDetail)> {
        let m = self.model;
        let (sp, mp, ops) = (&m.sp, &m.mp, &m.ops);
        let ev = m.settings.evolve;
        let eps = m.settings.eps;
        let tol = m.settings.tol_fp;
        let nn = sp.n_nodes();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        let t1 = old.t + dt;
        let tm = old.t + 0.5 * dt;

        let mut x = old.clone();
        x.t = t1;
        let trend = self.trend.take().filter(|tr| tr.t_end == old.t);
        if ev.mechanics {
            for (i, y) in x.y.iter_mut().enumerate() {
                *y += dt * old.v[i] + trend.as_ref().map_or(0.0, |tr| 0.5 * dt * dt * tr.accel[i]);
            }
        }
        if let Some(tr) = &trend {
            let r = &tr.rates;
            let ext = |x: &mut Vec<f64>, rate: &[f64]| x.iter_mut().zip(rate).for_each(|(v, d)| *v += dt * d);
            for c in 0..4 {
                ext(&mut x.p[c], &r.p[c]);
            }
            ext(&mut x.alpha, &r.alpha);
            ext(&mut x.phi, &r.phi);
            ext(&mut x.zeta, &r.zeta);
            ext(&mut x.mu, &r.mu);
            ext(&mut x.vartheta, &r.vartheta);
        }

        let mut report = StepReport {
            t: t1,
            dt,
            fp_iterations: 0,
            newton_iterations: 0,
            cg_plastic: 0,
            cg_water: 0,
            cg_heat: 0,
            zeta_violation: 0.0,
            min_det_p: 0.0,
            min_det_cell: 0,
            varpi_energy: 0.0,
            min_vartheta: 0.0,
            increments: Increments::default(),
        };
        let mut zeta_dot = vec![0.0; nn];
        let mut mobility: Option<Vec<Mat>> = None;
        let nonlinear_loop = ev.any_internal() || (ev.heat && mp.cv_gain != 0.0);
        let mut converged = false;
        let mut last_update = f64::INFINITY;

        for k in 0..m.settings.max_iter {
            report.fp_iterations = k + 1;
            let prev = x.clone();
            let y_mid = midpoint_y(old, &x);
            let sweep = mechanical_sweep(sp, &midpoint_fields(&y_mid, &x), mp)?;
            self.check_det(&sweep)?;
            let tc = if ev.water || ev.heat { Some(transport_coefficients(sp, &x.fields(), mp)?) } else { None };

            if ev.water {
                let mob = &tc.as_ref().expect("coefficients").mobility;
                let k_mob = weighted_stiffness(sp, mob);
                let sol = MuSystem {
                    sp,
                    ops,
                    k_mobility: &k_mob,
                    load_zeta: &sweep.load_zeta,
                    zeta_curv: &sweep.zeta_curv,
                    zeta: &x.zeta,
                    mu_guess: &x.mu,
                    mp,
                    mu_flat: m.bc.mu_flat,
                    eps,
                    tol: CG_TOL,
                }
                .solve(MuMode::Step { dt, zeta_prev: &old.zeta })?;
                report.cg_water += sol.report.iterations;
                x.mu = sol.mu;
                x.zeta = sol.zeta;
                zeta_dot = sol.zeta_dot;
                mobility = Some(mob.clone());
            }

            if ev.plastic {
                let (p_new, its) = self.solve_plastic(old, &prev, &sweep, dt)?;
                report.cg_plastic += its;
                x.p = p_new;
            }

            if ev.damage || ev.porosity {
                let ka = ops.stiffness.mul(&prev.alpha);
                let kp = ops.stiffness.mul(&prev.phi);
                for i in 0..nn {
                    let w = ops.lumped[i];
                    let drive = [
                        -(sweep.load_alpha[i] + mp.kappa2 * ka[i]) / w,
                        -(sweep.load_phi[i] + mp.kappa3 * kp[i]) / w,
                    ];
                    let (ad, pd) = invert_flow_rules(drive, prev.alpha[i], prev.phi[i], prev.phi0[i], mp);
                    if ev.damage {
                        x.alpha[i] = old.alpha[i] + dt * ad;
                    }
                    if ev.porosity {
                        x.phi[i] = old.phi[i] + dt * pd;
                    }
                }
            }

            if ev.mechanics {
                report.newton_iterations += if nonlinear_loop {
                    let refresh = k == NEWTON_REFRESH;
                    self.newton_update(old, &mut x, &y_mid, &sweep.f_int, dt, tm, refresh)?;
                    1
                } else {
                    self.solve_momentum(old, &mut x, dt, tm)?
                };
            }

            if ev.heat {
                let tc = tc.as_ref().expect("coefficients");
                let rates = rates_of(old, &x, &zeta_dot, dt);
                let hp = nodal_heat_production(sp, ops, &x.fields(), &rates, &tc.mobility, mp, eps)?;
                let (vt, its) = self.solve_heat(old, &x, &tc.conduction, &hp, dt, tm)?;
                report.cg_heat += its;
                x.vartheta = vt;
            }

            if !nonlinear_loop {
                converged = true;
                break;
            }
            let mut ok = true;
            let mut worst = 0.0f64;
            let mut check = |a: &[f64], b: &[f64], c: &[f64]| {
                let (good, upd) = settled(a, b, c, tol);
                ok &= good;
                worst = worst.max(upd);
            };
            check(&x.y, &prev.y, &old.y);
            for r in 0..4 {
                check(&x.p[r], &prev.p[r], &old.p[r]);
            }
            check(&x.alpha, &prev.alpha, &old.alpha);
            check(&x.phi, &prev.phi, &old.phi);
            check(&x.zeta, &prev.zeta, &old.zeta);
            check(&x.mu, &prev.mu, &old.mu);
            check(&x.vartheta, &prev.vartheta, &old.vartheta);
            last_update = worst;
            if ok {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::FixedPointDivergence { iterations: report.fp_iterations, update: last_update });
        }

        if ev.mechanics {
            x.v = (0..x.y.len()).map(|i| 2.0 * (x.y[i] - old.y[i]) / dt - old.v[i]).collect();
        }
        let y_mid = midpoint_y(old, &x);
        let sweep = mechanical_sweep(sp, &midpoint_fields(&y_mid, &x), mp)?;
        self.check_det(&sweep)?;
        let final_sweep = mechanical_sweep(sp, &x.fields(), mp)?;
        self.check_det(&final_sweep)?;
        report.min_det_p = final_sweep.min_det_p;
        report.min_det_cell = final_sweep.min_det_cell;
        report.varpi_energy = final_sweep.varpi_energy;

        let mut rates = rates_of(old, &x, &zeta_dot, dt);
        rates.accel = (0..x.v.len()).map(|i| (x.v[i] - old.v[i]) / dt).collect();
        let mob = match mobility {
            Some(mob) => mob,
            None => transport_coefficients(sp, &x.fields(), mp)?.mobility,
        };
        let hp = nodal_heat_production(sp, ops, &x.fields(), &rates, &mob, mp, eps)?;
        report.increments = self.increments(old, &x, &y_mid, &hp, dt, tm);
        report.zeta_violation = x.zeta_violation();
        report.min_vartheta = x.min_vartheta();
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect() };
        self.trend = Some(Trend {
            t_end: x.t,
            accel: rates.accel.clone(),
            rates: State {
                t: dt,
                y: Vec::new(),
                v: Vec::new(),
                p: (0..4).map(|c| diff(&x.p[c], &old.p[c])).collect(),
                alpha: diff(&x.alpha, &old.alpha),
                phi: diff(&x.phi, &old.phi),
                zeta: diff(&x.zeta, &old.zeta),
                mu: diff(&x.mu, &old.mu),
                vartheta: diff(&x.vartheta, &old.vartheta),
                phi0: Vec::new(),
            },
        });
        Ok((x, report, StepDetail { heat_production: hp, rates }))
    }

    fn check_det(&self, sweep: &MechanicalSweep) -> Result<()> {
        if !(sweep.min_det_p >= self.model.settings.det_floor) {
            return Err(Error::NonpositivePlasticDeterminant {
                det: sweep.min_det_p,
                cell: Some(sweep.min_det_cell),
            });
        }
        Ok(())
    }

    /// Solve of the plastic flow rule with the viscous term implicit, the
    /// q-Laplacian weights lagged, and the stiff barrier curvature
    /// `ϖ″(det P) Cof P ⊗ Cof P` added on both sides at the current iterate.
    fn solve_plastic(
        &self,
        old: &State,
        x: &State,
        sweep: &MechanicalSweep,
        dt: f64,
    ) -> Result<(Vec<Vec<f64>>, usize)> {
        let m = self.model;
        let (sp, mp, ops) = (&m.sp, &m.mp, &m.ops);
        let nn = sp.n_nodes();
        let ql = assemble_q_laplacian(&x.p, sp, mp);
        let coef: Vec<Mat> = ql.weights.iter().map(|&w| Mat::scalar(2, w)).collect();
        let k_q = weighted_stiffness(sp, &coef);
        let fixed = &sp.dirichlet_nodes;

        // Per free node: X ↦ c X B + h (Cof : X) Cof.
        let mut b_mats = Vec::with_capacity(nn);
        let mut cofs = Vec::with_capacity(nn);
        let mut h = vec![0.0; nn];
        let mut c = vec![0.0; nn];
        let mut rhs = vec![vec![0.0; nn]; 4];
        let mut known = vec![vec![0.0; nn]; 4];
        for i in 0..nn {
            let pk = nodal_p(&x.p, i);
            let pn = nodal_p(&old.p, i);
            let inv = pk
                .inverse()
                .map_err(|_| Error::NonpositivePlasticDeterminant { det: pk.det(), cell: None })?;
            let inv_t = inv.transpose();
            let b = inv * inv_t;
            let cof = pk.cof();
            c[i] = ops.lumped[i] * mp.nu_pl / dt;
            h[i] = ops.lumped[i] * varpi_second(pk.det(), mp);
            let rho = (pk - pn) * (1.0 / dt) * inv;
            let (_, force) = dissipation_r(&rho, mp);
            let extra = (force - rho * mp.nu_pl) * inv_t;
            let target = pn * b * c[i] + cof * (h[i] * cof.ddot(&pk));
            for r in 0..2 {
                for s in 0..2 {
                    let k = r * 2 + s;
                    if fixed[i] {
                        known[k][i] = old.p[k][i];
                        rhs[k][i] = old.p[k][i];
                    } else {
                        rhs[k][i] = target[(r, s)] - sweep.load_p[k][i] - extra[(r, s)];
                    }
                }
            }
            b_mats.push(b);
            cofs.push(cof);
        }
        for k in 0..4 {
            let kk = k_q.mul(&known[k]);
            for i in 0..nn {
                if !fixed[i] {
                    rhs[k][i] -= kk[i];
                }
            }
        }
        let kd = k_q.diagonal();
        let mut diag = vec![0.0; 4 * nn];
        for i in 0..nn {
            for r in 0..2 {
                for s in 0..2 {
                    let cf = cofs[i][(r, s)];
                    diag[(r * 2 + s) * nn + i] =
                        if fixed[i] { 1.0 } else { c[i] * b_mats[i][(s, s)] + h[i] * cf * cf + kd[i] };
                }
            }
        }
        let apply = |v: &[f64], o: &mut [f64]| {
            let mut free = v.to_vec();
            for k in 0..4 {
                for i in 0..nn {
                    if fixed[i] {
                        free[k * nn + i] = 0.0;
                    }
                }
                k_q.matvec(&free[k * nn..(k + 1) * nn], &mut o[k * nn..(k + 1) * nn]);
            }
            for i in 0..nn {
                if fixed[i] {
                    for k in 0..4 {
                        o[k * nn + i] = v[k * nn + i];
                    }
                    continue;
                }
                let xm = Mat::new2(v[i], v[nn + i], v[2 * nn + i], v[3 * nn + i]);
                let y = xm * b_mats[i] * c[i] + cofs[i] * (h[i] * cofs[i].ddot(&xm));
                o[i] += y[(0, 0)];
                o[nn + i] += y[(0, 1)];
                o[2 * nn + i] += y[(1, 0)];
                o[3 * nn + i] += y[(1, 1)];
            }
        };
        let flat_rhs: Vec<f64> = rhs.concat();
        let mut sol: Vec<f64> = x.p.concat();
        let rep = pcg(apply, &diag, &flat_rhs, &mut sol, CG_TOL, 40 * nn + 100)?;
        let out = (0..4).map(|k| sol[k * nn..(k + 1) * nn].to_vec()).collect();
        Ok((out, rep.iterations))
    }

    fn refresh_factor(&mut self, fields: &Fields, dt: f64) -> Result<()> {
        let m = self.model;
        let (sp, mp, ops) = (&m.sp, &m.mp, &m.ops);
        let mut j = assemble_tangent(sp, fields, mp)?;
        j.axpy(1.0, &m.y_quadratic);
        let mut j = j.scaled(0.5);
        j.axpy(2.0 * mp.rho / (dt * dt), &ops.y_mass);
        self.factor = Some(Factor { dt, chol: SkylineCholesky::factor(&j)? });
        Ok(())
    }

    /// One modified-Newton correction of the midpoint momentum balance,
    /// given the internal force at the current midpoint. Returns the size of
    /// the correction and of `y − yⁿ`.
    #[allow(clippy::too_many_arguments)]
    fn newton_update(
        &mut self,
        old: &State,
        x: &mut State,
        y_mid: &[f64],
        f_int: &[f64],
        dt: f64,
        tm: f64,
        refresh: bool,
    ) -> Result<(f64, f64)> {
        let m = self.model;
        let (mp, ops, loads) = (&m.mp, &m.ops, &m.loads);
        let nd = x.y.len();
        let stale = self.factor.as_ref().is_none_or(|f| f.dt != dt);
        if stale || refresh {
            self.refresh_factor(&midpoint_fields(y_mid, x), dt)?;
        }
        let a = 2.0 * mp.rho / (dt * dt);
        let inertia: Vec<f64> = (0..nd).map(|i| x.y[i] - old.y[i] - dt * old.v[i]).collect();
        let mi = ops.y_mass.mul(&inertia);
        let kq = m.y_quadratic.mul(y_mid);
        let res: Vec<f64> = (0..nd)
            .map(|i| {
                a * mi[i] + f_int[i] + kq[i]
                    - loads.flat0[i]
                    - tm * loads.flat1[i]
                    - loads.gravity[i]
            })
            .collect();
        let delta = self.factor.as_ref().expect("factor present").chol.solve(&res);
        let mut span = 0.0f64;
        for i in 0..nd {
            x.y[i] -= delta[i];
            span = span.max((x.y[i] - old.y[i]).abs());
        }
        let step = max_abs(&delta);
        if !step.is_finite() {
            return Err(Error::SolverDivergence { iterations: 1, residual: step });
        }
        Ok((step, span))
    }

    /// Modified Newton for the midpoint momentum balance at fixed internal
    /// variables.
    fn solve_momentum(&mut self, old: &State, x: &mut State, dt: f64, tm: f64) -> Result<usize> {
        let m = self.model;
        for it in 0..NEWTON_MAX {
            let y_mid = midpoint_y(old, x);
            let sweep = mechanical_sweep(&m.sp, &midpoint_fields(&y_mid, x), &m.mp)?;
            let (step, span) = self.newton_update(old, x, &y_mid, &sweep.f_int, dt, tm, it == NEWTON_REFRESH)?;
            if step <= m.settings.newton_tol * span + 1e-12 * max_abs(&x.y).max(1.0) {
                return Ok(it + 1);
            }
        }
        Err(Error::SolverDivergence { iterations: NEWTON_MAX, residual: f64::NAN })
    }

    /// Backward-Euler heat step with lumped capacity; conduction and the
    /// boundary chord `θ ≈ s ϑ` are lagged at the current iterate.
    fn solve_heat(
        &self,
        old: &State,
        x: &State,
        conduction: &[Mat],
        hp: &[HeatProduction],
        dt: f64,
        t_src: f64,
    ) -> Result<(Vec<f64>, usize)> {
        let m = self.model;
        let (sp, mp, ops) = (&m.sp, &m.mp, &m.ops);
        let nn = sp.n_nodes();
        let eps = m.settings.eps;
        let k_cond = weighted_stiffness(sp, conduction);
        let theta_b = m.bc.theta_flat_eps(eps);
        let chord = heat_chord(&x.vartheta, mp);
        let mut shift = vec![0.0; nn];
        let mut rhs = vec![0.0; nn];
        for i in 0..nn {
            let w = ops.lumped[i];
            let wb = mp.k_bnd * ops.boundary_lumped[i];
            let [px, py] = sp.node_coords(i);
            let src = m.bc.heat_source.as_ref().map_or(0.0, |f| f(px, py, t_src));
            shift[i] = w / dt + wb * chord[i];
            rhs[i] = w * old.vartheta[i] / dt + w * hp[i].r_eps + w * src + wb * theta_b;
        }
        let mut diag = k_cond.diagonal();
        for i in 0..nn {
            diag[i] += shift[i];
        }
        let mut sol = x.vartheta.clone();
        let rep = pcg(
            |v, o| {
                k_cond.matvec(v, o);
                for i in 0..nn {
                    o[i] += shift[i] * v[i];
                }
            },
            &diag,
            &rhs,
            &mut sol,
            CG_TOL,
            20 * nn + 100,
        )?;
        Ok((sol, rep.iterations))
    }

    fn increments(
        &self,
        old: &State,
        new: &State,
        y_mid: &[f64],
        hp: &[HeatProduction],
        dt: f64,
        t_src: f64,
    ) -> Increments {
        let m = self.model;
        let (sp, mp, ops, loads) = (&m.sp, &m.mp, &m.ops, &m.loads);
        let eps = m.settings.eps;
        let nd = new.y.len();
        let dy: Vec<f64> = (0..nd).map(|i| new.y[i] - old.y[i]).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let flat = |t: f64, y: &[f64]| dot(&loads.flat0, y) + t * dot(&loads.flat1, y);
        let mut inc = Increments {
            work_gravity: dot(&loads.gravity, &dy),
            work_spring: flat(new.t, &new.y) - flat(old.t, &old.y) - dt * dot(&loads.flat1, y_mid),
            ..Default::default()
        };
        let ev = m.settings.evolve;
        if ev.water {
            let bm = ops.boundary_mass.mul(&new.mu);
            let f_gamma: f64 = (0..new.mu.len())
                .map(|i| mp.m_bnd * m.bc.mu_flat * ops.boundary_lumped[i] * new.mu[i])
                .sum();
            inc.flux_water = dt * (f_gamma - mp.m_bnd * dot(&new.mu, &bm));
        }
        let theta_b = m.bc.theta_flat_eps(eps);
        let chord = heat_chord(&new.vartheta, mp);
        for i in 0..sp.n_nodes() {
            let w = ops.lumped[i];
            inc.dissipation += dt * w * hp[i].r;
            inc.heat += dt * w * hp[i].r_eps;
            if ev.heat {
                let [px, py] = sp.node_coords(i);
                let src = m.bc.heat_source.as_ref().map_or(0.0, |f| f(px, py, t_src));
                let wb = mp.k_bnd * ops.boundary_lumped[i];
                inc.flux_heat += dt * (w * src + wb * (theta_b - chord[i] * new.vartheta[i]));
            }
        }
        if !ev.heat {
            inc.heat = 0.0;
        }
        inc
    }
}

/// `θ/ϑ` per node (`1/c_v0` where ϑ ≤ 0).
fn heat_chord(vartheta: &[f64], mp: &crate::constitutive::MaterialParams) -> Vec<f64> {
    vartheta
        .iter()
        .map(|&v| if v > 0.0 { enthalpy_inverse(v, mp) / v } else { 1.0 / mp.cv0 })
        .collect()
}

fn rates_of(old: &State, new: &State, zeta_dot: &[f64], dt: f64) -> FieldRates {
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / dt).collect() };
    FieldRates {
        accel: vec![0.0; new.y.len()],
        p_dot: (0..4).map(|r| diff(&new.p[r], &old.p[r])).collect(),
        alpha_dot: diff(&new.alpha, &old.alpha),
        phi_dot: diff(&new.phi, &old.phi),
        zeta_dot: zeta_dot.to_vec(),
        vartheta_dot: diff(&new.vartheta, &old.vartheta),
    }
}

/// Difference-quotient rates of an accepted step, with the acceleration
/// `(v' − vⁿ)/dt` of the midpoint rule.
pub fn step_rates(old: &State, new: &State) -> FieldRates {
    let dt = new.t - old.t;
    let zeta_dot: Vec<f64> = new.zeta.iter().zip(&old.zeta).map(|(a, b)| (a - b) / dt).collect();
    let mut rates = rates_of(old, new, &zeta_dot, dt);
    rates.accel = new.v.iter().zip(&old.v).map(|(a, b)| (a - b) / dt).collect();
    rates
}
