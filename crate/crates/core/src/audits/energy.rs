//! Energy and entropy ledgers recomputed by quadrature code that does not
//! share assembly kernels or cached tables with the solver.

use crate::constitutive::{
    enthalpy_inverse, entropy, stored_energy, varpi, yosida_energy, PointState, THETA_FLOOR,
};
use crate::error::Result;
use crate::galerkin::{gauss_legendre_unit, hermite_2d, q1_2d, GalerkinSpace, Side, Y_DOFS_PER_NODE};
use crate::solver::{Increments, Model, State, Trajectory};
use crate::tensor::Mat;

/// Energy items of one state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuditEnergies {
    pub kinetic: f64,
    pub stored: f64,
    pub barrier: f64,
    pub bending: f64,
    pub plastic_gradient: f64,
    pub damage_gradient: f64,
    pub porosity_gradient: f64,
    pub water_gradient: f64,
    pub penalty: f64,
    pub spring: f64,
    pub thermal: f64,
    pub entropy: f64,
}

impl AuditEnergies {
    pub fn mechanical(&self) -> f64 {
        self.stored
            + self.bending
            + self.plastic_gradient
            + self.damage_gradient
            + self.porosity_gradient
            + self.water_gradient
            + self.penalty
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.mechanical() + self.spring + self.thermal
    }
}

/// Local Hermite coefficients of one deformation component on a cell.
fn cell_coeffs(sp: &GalerkinSpace, v: &[f64], c: usize, comp: usize) -> [f64; 16] {
    let (i, j) = (c % sp.grid.nx, c / sp.grid.nx);
    let corners = [sp.node(i, j), sp.node(i + 1, j), sp.node(i, j + 1), sp.node(i + 1, j + 1)];
    let mut out = [0.0; 16];
    for (k, &n) in corners.iter().enumerate() {
        for d in 0..4 {
            out[4 * k + d] = v[n * Y_DOFS_PER_NODE + comp * 4 + d];
        }
    }
    out
}

/// Independent itemized energies of `s`.
pub fn audit_energies(model: &Model, s: &State) -> Result<AuditEnergies> {
    let sp = &model.sp;
    let mp = &model.mp;
    let eps = model.settings.eps;
    let (dx, dy) = (sp.grid.dx, sp.grid.dy);
    let rule = gauss_legendre_unit(sp.gauss_points);
    let mut e = AuditEnergies::default();
    let mut nodal_weight = vec![0.0; sp.n_nodes()];

    for c in 0..sp.n_cells() {
        let (ci, cj) = (c % sp.grid.nx, c / sp.grid.nx);
        let nodes = [sp.node(ci, cj), sp.node(ci + 1, cj), sp.node(ci, cj + 1), sp.node(ci + 1, cj + 1)];
        let yc = [cell_coeffs(sp, &s.y, c, 0), cell_coeffs(sp, &s.y, c, 1)];
        let vc = [cell_coeffs(sp, &s.v, c, 0), cell_coeffs(sp, &s.v, c, 1)];
        for &(xi, wx) in &rule {
            for &(eta, wy) in &rule {
                let w = wx * wy * dx * dy;
                let h = hermite_2d(xi, eta, dx, dy);
                let (phi, grad) = q1_2d(xi, eta, dx, dy);
                let at = |v: &[f64]| (0..4).map(|a| v[nodes[a]] * phi[a]).sum::<f64>();
                let grad_of = |v: &[f64]| {
                    let mut g = [0.0; 2];
                    for a in 0..4 {
                        g[0] += v[nodes[a]] * grad[a][0];
                        g[1] += v[nodes[a]] * grad[a][1];
                    }
                    g
                };
                let mut f = Mat::zeros(2);
                let mut vel = [0.0; 2];
                let mut hess2 = 0.0;
                for comp in 0..2 {
                    let mut hs = [0.0; 3];
                    for l in 0..16 {
                        f[(comp, 0)] += yc[comp][l] * h.grad[l][0];
                        f[(comp, 1)] += yc[comp][l] * h.grad[l][1];
                        vel[comp] += vc[comp][l] * h.val[l];
                        for k in 0..3 {
                            hs[k] += yc[comp][l] * h.hess[l][k];
                        }
                    }
                    hess2 += hs[0] * hs[0] + 2.0 * hs[1] * hs[1] + hs[2] * hs[2];
                }
                let p = Mat::new2(at(&s.p[0]), at(&s.p[1]), at(&s.p[2]), at(&s.p[3]));
                let ps = PointState {
                    f,
                    p,
                    alpha: at(&s.alpha),
                    phi: at(&s.phi),
                    zeta: at(&s.zeta),
                    vartheta: at(&s.vartheta),
                    phi0: at(&s.phi0),
                };
                e.kinetic += w * 0.5 * mp.rho * (vel[0] * vel[0] + vel[1] * vel[1]);
                e.stored += w * stored_energy(&ps, mp)?;
                e.barrier += w * varpi(p.det(), mp);
                e.bending += w * 0.5 * mp.kappa0 * hess2;
                let gp: f64 = s.p.iter().map(|comp| grad_of(comp)).map(|g| g[0] * g[0] + g[1] * g[1]).sum();
                e.plastic_gradient += w * mp.kappa1 / mp.q * gp.powf(0.5 * mp.q);
                let sq = |g: [f64; 2]| g[0] * g[0] + g[1] * g[1];
                e.damage_gradient += w * 0.5 * mp.kappa2 * sq(grad_of(&s.alpha));
                e.porosity_gradient += w * 0.5 * mp.kappa3 * sq(grad_of(&s.phi));
                e.water_gradient += w * 0.5 * mp.kappa4 * sq(grad_of(&s.zeta));
                for a in 0..4 {
                    nodal_weight[nodes[a]] += w * phi[a];
                }
            }
        }
    }

    for (i, &w) in nodal_weight.iter().enumerate() {
        e.thermal += w * s.vartheta[i];
        e.entropy += w * entropy(enthalpy_inverse(s.vartheta[i].max(0.0), mp), mp);
        e.penalty += w * yosida_energy(s.zeta[i], eps);
    }

    // ½N∫_Γ|y|² along the four sides.
    let (lx, ly) = (sp.grid.lx, sp.grid.ly);
    for side in Side::ALL {
        let (n_edges, len) = match side {
            Side::Bottom | Side::Top => (sp.grid.nx, dx),
            Side::Left | Side::Right => (sp.grid.ny, dy),
        };
        for k in 0..n_edges {
            for &(s01, wq) in &rule {
                let u = (k as f64 + s01) * len;
                let (x, y) = match side {
                    Side::Bottom => (u, 0.0),
                    Side::Top => (u, ly),
                    Side::Left => (0.0, u),
                    Side::Right => (lx, u),
                };
                let (val, _) = sp.eval_y(&s.y, x, y);
                e.spring += wq * len * 0.5 * mp.spring_n * (val[0] * val[0] + val[1] * val[1]);
            }
        }
    }
    Ok(e)
}

#[derive(Clone, Debug)]
pub struct EnergyLedgerRow {
    pub t: f64,
    pub energies: AuditEnergies,
    /// Cumulative exchange terms integrated by the stepper.
    pub exchange: Increments,
    /// `|E(t) − E(0) − W − F_w − F_h + D − H|` with the audited energies.
    pub residual: f64,
    /// Largest deviation of an energy item from the solver's ledger,
    /// relative to `max(1, |E|)`.
    pub kernel_mismatch: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub rows: Vec<EnergyLedgerRow>,
    pub max_residual: f64,
    pub max_kernel_mismatch: f64,
    /// Cumulative dissipation never decreases along the ledger.
    pub dissipation_monotone: bool,
}

/// Recomputes the energy at every snapshot that has a ledger row and checks
/// the total energy identity and the solver's own energy items.
pub fn energy_audit(traj: &Trajectory, model: &Model) -> Result<EnergyLedger> {
    let mut out = EnergyLedger { dissipation_monotone: true, ..Default::default() };
    let mut e0 = None;
    for s in &traj.snapshots {
        let Some(row) = traj.ledger.iter().find(|r| r.t == s.t) else { continue };
        let a = audit_energies(model, s)?;
        let base = *e0.get_or_insert(a.total());
        let c = &row.cumulative;
        let residual = (a.total() - base - c.work_gravity - c.work_spring - c.flux_water - c.flux_heat
            + (c.dissipation - c.heat))
            .abs();
        let sv = &row.energies;
        let scale = sv.total().abs().max(1.0);
        let pairs = [
            (a.kinetic, sv.kinetic),
            (a.stored, sv.stored),
            (a.barrier, sv.barrier),
            (a.bending, sv.bending),
            (a.plastic_gradient, sv.plastic_gradient),
            (a.damage_gradient, sv.damage_gradient),
            (a.porosity_gradient, sv.porosity_gradient),
            (a.water_gradient, sv.water_gradient),
            (a.penalty, sv.penalty),
            (a.spring, sv.spring),
            (a.thermal, sv.thermal),
            (a.entropy, sv.entropy),
        ];
        let mismatch = pairs.iter().fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale));
        out.max_residual = out.max_residual.max(residual);
        out.max_kernel_mismatch = out.max_kernel_mismatch.max(mismatch);
        out.rows.push(EnergyLedgerRow { t: s.t, energies: a, exchange: *c, residual, kernel_mismatch: mismatch });
    }
    out.dissipation_monotone = traj.ledger.windows(2).all(|w| w[1].cumulative.dissipation >= w[0].cumulative.dissipation);
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct EntropyRow {
    pub t: f64,
    /// `∫ η(θ)`.
    pub total: f64,
    /// Production rate of the step ending at `t`.
    pub production: f64,
    /// Smallest nodal production integrand of that step.
    pub production_min: f64,
    /// Entropy inflow rate through the boundary, `∫_Γ K_bnd (θ♭ − θ)/θ`.
    pub boundary_flux: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EntropyAudit {
    pub rows: Vec<EntropyRow>,
    /// Largest decrease `S(t_k) − S(t_{k+1})` between output steps (≤ 0 when
    /// entropy never decreases).
    pub max_decrease: f64,
    pub min_production_integrand: f64,
}

/// Entropy series over the ledger rows.
pub fn entropy_audit(traj: &Trajectory, model: &Model) -> Result<EntropyAudit> {
    let mp = &model.mp;
    let theta_b = model.bc.theta_flat_eps(model.settings.eps);
    let snapshot_at = |t: f64| traj.snapshots.iter().find(|s| s.t == t);
    let mut out = EntropyAudit { max_decrease: f64::NEG_INFINITY, min_production_integrand: f64::INFINITY, ..Default::default() };
    for (k, row) in traj.ledger.iter().enumerate() {
        let boundary_flux = match snapshot_at(row.t) {
            Some(s) => (0..model.sp.n_nodes())
                .map(|i| {
                    let th = enthalpy_inverse(s.vartheta[i].max(0.0), mp).max(THETA_FLOOR);
                    mp.k_bnd * model.ops.boundary_lumped[i] * (theta_b - th) / th
                })
                .sum(),
            None => f64::NAN,
        };
        out.rows.push(EntropyRow {
            t: row.t,
            total: row.energies.entropy,
            production: row.entropy_production,
            production_min: row.entropy_production_min,
            boundary_flux,
        });
        if k > 0 {
            out.max_decrease = out.max_decrease.max(traj.ledger[k - 1].energies.entropy - row.energies.entropy);
            out.min_production_integrand = out.min_production_integrand.min(row.entropy_production_min);
        }
    }
    Ok(out)
}
