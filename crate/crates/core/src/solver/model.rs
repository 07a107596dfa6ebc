use super::{SolverSettings, State};
use crate::constitutive::{
    enthalpy, enthalpy_inverse, entropy, regularize_initial_temperature, yosida_energy, HeatProduction,
    MaterialParams, THETA_FLOOR,
};
use crate::error::{Error, Result};
use crate::galerkin::{
    assemble_operators, assemble_q_laplacian, boundary_functionals, deformation_loads, mechanical_sweep,
    nodal_gradient_energy, solve_chemical_potential, transport_coefficients, AssembledOperators, BoundaryData, CsrMatrix, DeformationLoads, GalerkinSpace, MuMode,
};
use crate::tensor::Mat;

/// Everything that stays fixed during a run.
#[derive(Clone, Debug)]
pub struct Model {
    pub sp: GalerkinSpace,
    pub ops: AssembledOperators,
    pub mp: MaterialParams,
    pub bc: BoundaryData,
    pub settings: SolverSettings,
    pub loads: DeformationLoads,
    /// `κ0 K_∇² + N M_Γ`, the quadratic part of the deformation energy.
    pub y_quadratic: CsrMatrix,
}

/// Itemized energy of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyItems {
    pub kinetic: f64,
    /// `∫ Φ_M`, including the barrier and χ terms.
    pub stored: f64,
    /// `∫ ϖ(det P)`, already contained in `stored`.
    pub barrier: f64,
    pub bending: f64,
    pub plastic_gradient: f64,
    pub damage_gradient: f64,
    pub porosity_gradient: f64,
    pub water_gradient: f64,
    /// `Σ w_i dist(ζ_i, [0,1])² / (2ε)`.
    pub penalty: f64,
    pub spring: f64,
    pub thermal: f64,
    pub entropy: f64,
    pub min_det_p: f64,
}

impl EnergyItems {
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

impl Model {
    pub fn new(sp: GalerkinSpace, mp: MaterialParams, bc: BoundaryData, settings: SolverSettings) -> Self {
        let ops = assemble_operators(&sp);
        let loads = deformation_loads(&sp, &mp, &bc);
        let mut y_quadratic = ops.y_bending.scaled(mp.kappa0);
        y_quadratic.axpy(mp.spring_n, &ops.y_boundary_mass);
        Model { sp, ops, mp, bc, settings, loads, y_quadratic }
    }

    pub fn energies(&self, s: &State) -> Result<EnergyItems> {
        let mp = &self.mp;
        let ops = &self.ops;
        let eps = self.settings.eps;
        let sweep = mechanical_sweep(&self.sp, &s.fields(), mp)?;
        let ql = assemble_q_laplacian(&s.p, &self.sp, mp);
        let half = |k: f64, v: &[f64]| 0.5 * k * ops.stiffness.bilinear(v, v);
        let mut thermal = 0.0;
        let mut ent = 0.0;
        let mut penalty = 0.0;
        for i in 0..self.sp.n_nodes() {
            let w = ops.lumped[i];
            thermal += w * s.vartheta[i];
            ent += w * entropy(enthalpy_inverse(s.vartheta[i].max(0.0), mp), mp);
            penalty += w * yosida_energy(s.zeta[i], eps);
        }
        Ok(EnergyItems {
            kinetic: 0.5 * mp.rho * ops.y_mass.bilinear(&s.v, &s.v),
            stored: sweep.energy,
            barrier: sweep.varpi_energy,
            bending: 0.5 * mp.kappa0 * ops.y_bending.bilinear(&s.y, &s.y),
            plastic_gradient: ql.energy,
            damage_gradient: half(mp.kappa2, &s.alpha),
            porosity_gradient: half(mp.kappa3, &s.phi),
            water_gradient: half(mp.kappa4, &s.zeta),
            penalty,
            spring: 0.5 * mp.spring_n * ops.y_boundary_mass.bilinear(&s.y, &s.y),
            thermal,
            entropy: ent,
            min_det_p: sweep.min_det_p,
        })
    }

    /// Entropy production `Σ w r/θ + Σ (∫𝕂_eff∇θ·∇θ φ_i)/θ_i²` and the
    /// smallest nodal integrand, for the given nodal heat production.
    pub fn entropy_production(&self, s: &State, hp: &[HeatProduction]) -> Result<(f64, f64)> {
        let mp = &self.mp;
        let tc = transport_coefficients(&self.sp, &s.fields(), mp)?;
        let theta: Vec<f64> = s.vartheta.iter().map(|&v| enthalpy_inverse(v.max(0.0), mp)).collect();
        let (cond, _) = nodal_gradient_energy(&self.sp, &tc.conductivity, &theta);
        let mut total = 0.0;
        let mut min = f64::INFINITY;
        for i in 0..self.sp.n_nodes() {
            let th = theta[i].max(THETA_FLOOR);
            let w = self.ops.lumped[i];
            let r = hp.get(i).map_or(0.0, |h| h.r);
            let local = r / th + cond[i] / (w * th * th);
            min = min.min(local);
            total += w * local;
        }
        Ok((total, min))
    }

    /// `∫_Γ N y♭(t)·y`, the pairing entering the by-parts spring work.
    pub fn flat_pairing(&self, s: &State) -> f64 {
        let n = self.sp.n_nodes();
        boundary_functionals(&s.y, &vec![0.0; n], &vec![0.0; n], s.t, &self.bc, &self.sp, &self.mp, 0.0).flat_pairing
    }
}

/// Prescribed initial data as nodal values (deformation as Hermite
/// coefficients).
#[derive(Clone, Debug)]
pub struct InitialFields {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
}

impl InitialFields {
    /// Undeformed, at rest, `P = 𝕀`, uniform scalars.
    pub fn uniform(sp: &GalerkinSpace, alpha: f64, phi: f64, zeta: f64, theta: f64) -> Self {
        let n = sp.n_nodes();
        InitialFields {
            y: sp.identity_y(),
            v: vec![0.0; sp.n_y_dofs()],
            p: vec![vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![1.0; n]],
            alpha: vec![alpha; n],
            phi: vec![phi; n],
            zeta: vec![zeta; n],
            theta: vec![theta; n],
        }
    }
}

/// Checks the initial data, regularizes the temperature (`θ0/(1+εθ0)`, then
/// the enthalpy), and computes the consistent initial chemical potential by
/// the elimination solve.
pub fn apply_initial_conditions(init: InitialFields, model: &Model) -> Result<State> {
    let sp = &model.sp;
    let mp = &model.mp;
    let eps = model.settings.eps;
    let n = sp.n_nodes();
    let lens = [init.alpha.len(), init.phi.len(), init.zeta.len(), init.theta.len()];
    if lens.iter().any(|&l| l != n) || init.p.len() != 4 || init.p.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInitialData("scalar initial fields must have one value per node".into()));
    }
    if init.y.len() != sp.n_y_dofs() || init.v.len() != sp.n_y_dofs() {
        return Err(Error::InvalidInitialData("deformation initial data has the wrong length".into()));
    }
    for i in 0..n {
        let z = init.zeta[i];
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::InvalidInitialData(format!(
                "A.b: initial water content must satisfy 0 ≤ ζ0 ≤ 1, got ζ0 = {z} at node {i}"
            )));
        }
        let th = init.theta[i];
        if !(th >= 0.0 && th.is_finite()) {
            return Err(Error::InvalidInitialData(format!(
                "A.b: initial temperature must satisfy θ0 ≥ 0, got θ0 = {th} at node {i}"
            )));
        }
        let p = Mat::new2(init.p[0][i], init.p[1][i], init.p[2][i], init.p[3][i]);
        if !(p.det() > 0.0) {
            return Err(Error::InvalidInitialData(format!(
                "A.b: initial plastic strain needs det P0 > 0, got {} at node {i}",
                p.det()
            )));
        }
        for (name, v) in [("α0", init.alpha[i]), ("φ0", init.phi[i])] {
            if !v.is_finite() {
                return Err(Error::InvalidInitialData(format!("A.b: {name} is not finite at node {i}")));
            }
        }
    }
    let vartheta: Vec<f64> =
        init.theta.iter().map(|&th| enthalpy(regularize_initial_temperature(th, eps), mp)).collect();
    let mut state = State {
        t: 0.0,
        y: init.y,
        v: init.v,
        p: init.p,
        phi0: init.phi.clone(),
        alpha: init.alpha,
        phi: init.phi,
        zeta: init.zeta,
        mu: vec![0.0; n],
        vartheta,
    };
    if model.settings.evolve.water {
        let sol =
            solve_chemical_potential(&state.fields(), MuMode::Elimination, sp, &model.ops, mp, &model.bc, eps)?;
        state.mu = sol.mu;
    }
    Ok(state)
}
