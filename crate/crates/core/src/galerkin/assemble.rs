//! Weak-form assembly on a [`GalerkinSpace`].

use std::fmt;
use std::sync::Arc;

use super::space::{GalerkinSpace, Side};
use super::sparse::{dot, pcg, CgReport, CsrMatrix};
use crate::constitutive::{
    d_stored_energy, dissipation_d, dissipation_r, enthalpy_inverse, heat_capacity, pullback_conductivity,
    pullback_mobility, regularize_boundary_temperature, stored_energy, stress_tangent, varpi, yosida,
    HeatProduction, MaterialParams, PointState,
};
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Borrowed coefficient vectors of every field.
#[derive(Clone, Copy)]
pub struct Fields<'a> {
    pub y: &'a [f64],
    /// Plastic strain components, index `r·d + c`.
    pub p: &'a [Vec<f64>],
    pub alpha: &'a [f64],
    pub phi: &'a [f64],
    pub zeta: &'a [f64],
    pub mu: &'a [f64],
    pub vartheta: &'a [f64],
    pub phi0: &'a [f64],
}

/// Time derivatives of every field in coefficient form.
#[derive(Clone, Debug)]
pub struct FieldRates {
    /// Acceleration coefficients in the deformation space.
    pub accel: Vec<f64>,
    pub p_dot: Vec<Vec<f64>>,
    pub alpha_dot: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub zeta_dot: Vec<f64>,
    pub vartheta_dot: Vec<f64>,
}

impl FieldRates {
    pub fn zero(sp: &GalerkinSpace) -> Self {
        let n = sp.n_nodes();
        FieldRates {
            accel: vec![0.0; sp.n_y_dofs()],
            p_dot: vec![vec![0.0; n]; 4],
            alpha_dot: vec![0.0; n],
            phi_dot: vec![0.0; n],
            zeta_dot: vec![0.0; n],
            vartheta_dot: vec![0.0; n],
        }
    }
}

pub type HeatSource = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Boundary and volume loading.
///
/// The boundary deformation is affine in time, `y♭(x, t) = x + t G (x − x_c)`.
#[derive(Clone)]
pub struct BoundaryData {
    pub velocity_gradient: Mat,
    pub center: [f64; 2],
    /// Gravitational acceleration; the body force is `ρ g`.
    pub gravity: [f64; 2],
    pub mu_flat: f64,
    pub theta_flat: f64,
    /// Optional volumetric heat source `s(x, y, t)` added to the heat equation.
    pub heat_source: Option<HeatSource>,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("velocity_gradient", &self.velocity_gradient)
            .field("center", &self.center)
            .field("gravity", &self.gravity)
            .field("mu_flat", &self.mu_flat)
            .field("theta_flat", &self.theta_flat)
            .field("heat_source", &self.heat_source.is_some())
            .finish()
    }
}

impl Default for BoundaryData {
    fn default() -> Self {
        BoundaryData {
            velocity_gradient: Mat::zeros(2),
            center: [0.0, 0.0],
            gravity: [0.0, 0.0],
            mu_flat: 0.0,
            theta_flat: 0.0,
            heat_source: None,
        }
    }
}

impl BoundaryData {
    pub fn y_flat(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let r = self.y_flat_rate(x);
        [x[0] + t * r[0], x[1] + t * r[1]]
    }

    pub fn y_flat_rate(&self, x: [f64; 2]) -> [f64; 2] {
        let g = &self.velocity_gradient;
        let (u, v) = (x[0] - self.center[0], x[1] - self.center[1]);
        [g[(0, 0)] * u + g[(0, 1)] * v, g[(1, 0)] * u + g[(1, 1)] * v]
    }

    pub fn theta_flat_eps(&self, eps: f64) -> f64 {
        regularize_boundary_temperature(self.theta_flat, eps)
    }
}

/// State-independent matrices.
#[derive(Clone, Debug)]
pub struct AssembledOperators {
    pub mass: CsrMatrix,
    pub lumped: Vec<f64>,
    pub stiffness: CsrMatrix,
    pub boundary_mass: CsrMatrix,
    /// Trapezoidal boundary weights (row sums of the boundary mass).
    pub boundary_lumped: Vec<f64>,
    pub y_mass: CsrMatrix,
    /// `∫ ∇²y ⋮ ∇²ỹ`.
    pub y_bending: CsrMatrix,
    /// `∫_Γ y·ỹ`.
    pub y_boundary_mass: CsrMatrix,
}

pub fn assemble_operators(sp: &GalerkinSpace) -> AssembledOperators {
    let nq = sp.n_quad();
    let mut mass = CsrMatrix::from_pattern(&sp.scalar_pattern);
    let mut stiffness = mass.clone();
    let mut boundary_mass = mass.clone();
    let mut y_mass = CsrMatrix::from_pattern(&sp.y_pattern);
    let mut y_bending = y_mass.clone();
    let mut y_boundary_mass = y_mass.clone();

    let mut m_loc = [[0.0; 4]; 4];
    let mut k_loc = [[0.0; 4]; 4];
    let mut ym_loc = [[0.0; 16]; 16];
    let mut yb_loc = [[0.0; 16]; 16];
    for q in 0..nq {
        let w = sp.cell.weights[q];
        let (v, g) = (&sp.cell.q1_val[q], &sp.cell.q1_grad[q]);
        for a in 0..4 {
            for b in 0..4 {
                m_loc[a][b] += w * v[a] * v[b];
                k_loc[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        let h = &sp.cell.herm[q];
        for a in 0..16 {
            for b in 0..16 {
                ym_loc[a][b] += w * h.val[a] * h.val[b];
                let (ha, hb) = (h.hess[a], h.hess[b]);
                yb_loc[a][b] += w * (ha[0] * hb[0] + 2.0 * ha[1] * hb[1] + ha[2] * hb[2]);
            }
        }
    }
    for c in 0..sp.n_cells() {
        let nodes = sp.cell_nodes(c);
        for a in 0..4 {
            for b in 0..4 {
                mass.add(nodes[a], nodes[b], m_loc[a][b]);
                stiffness.add(nodes[a], nodes[b], k_loc[a][b]);
            }
        }
        for comp in 0..2 {
            let dofs = sp.cell_y_dofs(c, comp);
            for a in 0..16 {
                for b in 0..16 {
                    y_mass.add(dofs[a], dofs[b], ym_loc[a][b]);
                    y_bending.add(dofs[a], dofs[b], yb_loc[a][b]);
                }
            }
        }
    }
    for &(c, side) in &sp.boundary_facets {
        let et = &sp.edge[side.index()];
        let nodes = sp.cell_nodes(c);
        for (q, &w) in et.weights.iter().enumerate() {
            let v = &et.q1_val[q];
            let h = &et.herm_val[q];
            for a in 0..4 {
                for b in 0..4 {
                    let val = w * v[a] * v[b];
                    if val != 0.0 {
                        boundary_mass.add(nodes[a], nodes[b], val);
                    }
                }
            }
            for comp in 0..2 {
                let dofs = sp.cell_y_dofs(c, comp);
                for a in 0..16 {
                    if h[a] == 0.0 {
                        continue;
                    }
                    for b in 0..16 {
                        if h[b] != 0.0 {
                            y_boundary_mass.add(dofs[a], dofs[b], w * h[a] * h[b]);
                        }
                    }
                }
            }
        }
    }
    let ones = vec![1.0; sp.n_nodes()];
    let lumped = mass.mul(&ones);
    let boundary_lumped = boundary_mass.mul(&ones);
    AssembledOperators { mass, lumped, stiffness, boundary_mass, boundary_lumped, y_mass, y_bending, y_boundary_mass }
}

/// Fields gathered on one cell.
struct CellData {
    nodes: [usize; 4],
    y: [[f64; 16]; 2],
}

fn gather(sp: &GalerkinSpace, y: &[f64], c: usize) -> CellData {
    let mut yl = [[0.0; 16]; 2];
    for (comp, row) in yl.iter_mut().enumerate() {
        for (l, &dof) in sp.cell_y_dofs(c, comp).iter().enumerate() {
            row[l] = y[dof];
        }
    }
    CellData { nodes: sp.cell_nodes(c), y: yl }
}

fn interp(nodes: &[usize; 4], v: &[f64], phi: &[f64; 4]) -> f64 {
    v[nodes[0]] * phi[0] + v[nodes[1]] * phi[1] + v[nodes[2]] * phi[2] + v[nodes[3]] * phi[3]
}

/// Q1 gradient in difference form, exactly zero on constant data.
fn interp_grad(nodes: &[usize; 4], v: &[f64], g: &[[f64; 2]; 4]) -> [f64; 2] {
    let [v0, v1, v2, v3] = nodes.map(|n| v[n]);
    [(v1 - v0) * g[1][0] + (v3 - v2) * g[3][0], (v2 - v0) * g[2][1] + (v3 - v1) * g[3][1]]
}

fn deformation_gradient(cd: &CellData, sp: &GalerkinSpace, q: usize) -> Mat {
    let h = &sp.cell.herm[q];
    let mut f = Mat::zeros(2);
    for comp in 0..2 {
        for l in 0..16 {
            f[(comp, 0)] += cd.y[comp][l] * h.grad[l][0];
            f[(comp, 1)] += cd.y[comp][l] * h.grad[l][1];
        }
    }
    f
}

fn point_state(cd: &CellData, fields: &Fields, sp: &GalerkinSpace, q: usize) -> PointState {
    let phi = &sp.cell.q1_val[q];
    let n = &cd.nodes;
    let p = Mat::new2(
        interp(n, &fields.p[0], phi),
        interp(n, &fields.p[1], phi),
        interp(n, &fields.p[2], phi),
        interp(n, &fields.p[3], phi),
    );
    PointState {
        f: deformation_gradient(cd, sp, q),
        p,
        alpha: interp(n, fields.alpha, phi),
        phi: interp(n, fields.phi, phi),
        zeta: interp(n, fields.zeta, phi),
        vartheta: interp(n, fields.vartheta, phi),
        phi0: interp(n, fields.phi0, phi),
    }
}

/// Pointwise state at quadrature point `q` of cell `c`.
pub fn quad_point_state(sp: &GalerkinSpace, fields: &Fields, c: usize, q: usize) -> PointState {
    point_state(&gather(sp, fields.y, c), fields, sp, q)
}

fn locate_error(e: Error, c: usize, q: usize) -> Error {
    match e {
        Error::NonpositivePlasticDeterminant { det, .. } => Error::NonpositivePlasticDeterminant { det, cell: Some(c) },
        Error::SingularMatrix { .. } => Error::QuadratureOverflow { cell: c, point: q },
        other => other,
    }
}

/// Everything obtained from one pass of Φ_M derivatives over all
/// quadrature points.
#[derive(Clone, Debug)]
pub struct MechanicalSweep {
    /// `∫ ∂_∇yΦ_M ⋮ ∇ỹ` per deformation dof.
    pub f_int: Vec<f64>,
    /// `∫ ∂_PΦ_M φ_i` per component `r·d + c`.
    pub load_p: Vec<Vec<f64>>,
    pub load_alpha: Vec<f64>,
    pub load_phi: Vec<f64>,
    pub load_zeta: Vec<f64>,
    /// `∫ ∂²_ζΦ_M φ_i`.
    pub zeta_curv: Vec<f64>,
    /// `∫ Φ_M`.
    pub energy: f64,
    /// `∫ ϖ(det P)` (barrier energy).
    pub varpi_energy: f64,
    pub min_det_p: f64,
    pub min_det_cell: usize,
}

pub fn mechanical_sweep(sp: &GalerkinSpace, fields: &Fields, mp: &MaterialParams) -> Result<MechanicalSweep> {
    let nn = sp.n_nodes();
    let mut out = MechanicalSweep {
        f_int: vec![0.0; sp.n_y_dofs()],
        load_p: vec![vec![0.0; nn]; 4],
        load_alpha: vec![0.0; nn],
        load_phi: vec![0.0; nn],
        load_zeta: vec![0.0; nn],
        zeta_curv: vec![0.0; nn],
        energy: 0.0,
        varpi_energy: 0.0,
        min_det_p: f64::INFINITY,
        min_det_cell: 0,
    };
    for c in 0..sp.n_cells() {
        let cd = gather(sp, fields.y, c);
        let ydofs = [sp.cell_y_dofs(c, 0), sp.cell_y_dofs(c, 1)];
        for q in 0..sp.n_quad() {
            let w = sp.cell.weights[q];
            let ps = point_state(&cd, fields, sp, q);
            let det = ps.p.det();
            if det < out.min_det_p {
                out.min_det_p = det;
                out.min_det_cell = c;
            }
            let df = d_stored_energy(&ps, mp).map_err(|e| locate_error(e, c, q))?;
            let curv = df.zeta_curv;
            if !(df.energy.is_finite() && df.sigma_el.is_finite() && df.sigma_in.is_finite()) {
                return Err(Error::QuadratureOverflow { cell: c, point: q });
            }
            out.energy += w * df.energy;
            out.varpi_energy += w * varpi(det, mp);
            let h = &sp.cell.herm[q];
            for comp in 0..2 {
                let (s0, s1) = (df.sigma_el[(comp, 0)] * w, df.sigma_el[(comp, 1)] * w);
                for l in 0..16 {
                    out.f_int[ydofs[comp][l]] += s0 * h.grad[l][0] + s1 * h.grad[l][1];
                }
            }
            let phi = &sp.cell.q1_val[q];
            for a in 0..4 {
                let (n, wa) = (cd.nodes[a], w * phi[a]);
                for r in 0..2 {
                    for s in 0..2 {
                        out.load_p[r * 2 + s][n] += wa * df.sigma_in[(r, s)];
                    }
                }
                out.load_alpha[n] += wa * df.p_age;
                out.load_phi[n] += wa * df.p_eff;
                out.load_zeta[n] += wa * df.p_por;
                out.zeta_curv[n] += wa * curv;
            }
        }
    }
    Ok(out)
}

/// `∫ Φ_M` alone.
pub fn stored_energy_integral(sp: &GalerkinSpace, fields: &Fields, mp: &MaterialParams) -> Result<f64> {
    let mut e = 0.0;
    for c in 0..sp.n_cells() {
        let cd = gather(sp, fields.y, c);
        for q in 0..sp.n_quad() {
            let ps = point_state(&cd, fields, sp, q);
            e += sp.cell.weights[q] * stored_energy(&ps, mp).map_err(|err| locate_error(err, c, q))?;
        }
    }
    Ok(e)
}

/// Tangent `∫ ∂²Φ_M/∂F² [∇δy, ∇ỹ]` on the deformation pattern.
pub fn assemble_tangent(sp: &GalerkinSpace, fields: &Fields, mp: &MaterialParams) -> Result<CsrMatrix> {
    let mut k = CsrMatrix::from_pattern(&sp.y_pattern);
    for c in 0..sp.n_cells() {
        let cd = gather(sp, fields.y, c);
        let mut loc = [[0.0; 32]; 32];
        for q in 0..sp.n_quad() {
            let w = sp.cell.weights[q];
            let ps = point_state(&cd, fields, sp, q);
            let t = stress_tangent(&ps, mp).map_err(|e| locate_error(e, c, q))?;
            let g = &sp.cell.herm[q].grad;
            for i in 0..2 {
                for kk in 0..2 {
                    let a = [
                        [t.get(i, 0, kk, 0) * w, t.get(i, 0, kk, 1) * w],
                        [t.get(i, 1, kk, 0) * w, t.get(i, 1, kk, 1) * w],
                    ];
                    for la in 0..16 {
                        let ga = g[la];
                        let ra = [ga[0] * a[0][0] + ga[1] * a[1][0], ga[0] * a[0][1] + ga[1] * a[1][1]];
                        let row = &mut loc[i * 16 + la];
                        for lb in 0..16 {
                            row[kk * 16 + lb] += ra[0] * g[lb][0] + ra[1] * g[lb][1];
                        }
                    }
                }
            }
        }
        let dofs = [sp.cell_y_dofs(c, 0), sp.cell_y_dofs(c, 1)];
        for i in 0..32 {
            for j in 0..32 {
                k.add(dofs[i / 16][i % 16], dofs[j / 16][j % 16], loc[i][j]);
            }
        }
    }
    Ok(k)
}

/// Scalar stiffness `∫ A(x) ∇u·∇ũ` with one coefficient per quadrature point.
pub fn weighted_stiffness(sp: &GalerkinSpace, coef: &[Mat]) -> CsrMatrix {
    let nq = sp.n_quad();
    let mut k = CsrMatrix::from_pattern(&sp.scalar_pattern);
    for c in 0..sp.n_cells() {
        let nodes = sp.cell_nodes(c);
        let mut loc = [[0.0; 4]; 4];
        for q in 0..nq {
            let a = &coef[c * nq + q];
            let w = sp.cell.weights[q];
            let g = &sp.cell.q1_grad[q];
            for i in 0..4 {
                let ag = [a[(0, 0)] * g[i][0] + a[(1, 0)] * g[i][1], a[(0, 1)] * g[i][0] + a[(1, 1)] * g[i][1]];
                for j in 0..4 {
                    loc[i][j] += w * (ag[0] * g[j][0] + ag[1] * g[j][1]);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                k.add(nodes[i], nodes[j], loc[i][j]);
            }
        }
    }
    k
}

/// The κ1 plastic-gradient term.
#[derive(Clone, Debug)]
pub struct QLaplacian {
    /// `∫ κ1|∇P|^{q−2} ∇P_rc·∇φ_i` per component.
    pub action: Vec<Vec<f64>>,
    /// `κ1|∇P|^{q−2}` per quadrature point (cell-major).
    pub weights: Vec<f64>,
    /// `∫ (κ1/q)|∇P|^q`.
    pub energy: f64,
}

pub fn assemble_q_laplacian(p: &[Vec<f64>], sp: &GalerkinSpace, mp: &MaterialParams) -> QLaplacian {
    let nn = sp.n_nodes();
    let nq = sp.n_quad();
    let mut out = QLaplacian { action: vec![vec![0.0; nn]; 4], weights: vec![0.0; sp.n_cells() * nq], energy: 0.0 };
    for c in 0..sp.n_cells() {
        let nodes = sp.cell_nodes(c);
        for q in 0..nq {
            let g = &sp.cell.q1_grad[q];
            let grads: Vec<[f64; 2]> = p.iter().map(|comp| interp_grad(&nodes, comp, g)).collect();
            let norm2: f64 = grads.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
            let weight = if norm2 > 0.0 { mp.kappa1 * norm2.powf(0.5 * (mp.q - 2.0)) } else { 0.0 };
            out.weights[c * nq + q] = weight;
            let w = sp.cell.weights[q];
            out.energy += w * mp.kappa1 / mp.q * norm2.powf(0.5 * mp.q);
            for (k, gp) in grads.iter().enumerate() {
                for a in 0..4 {
                    out.action[k][nodes[a]] += w * weight * (gp[0] * g[a][0] + gp[1] * g[a][1]);
                }
            }
        }
    }
    out
}

/// Pulled-back transport tensors per quadrature point (cell-major).
#[derive(Clone, Debug)]
pub struct TransportCoefficients {
    pub mobility: Vec<Mat>,
    /// Conductivity acting on ∇ϑ, i.e. 𝕂_eff / c_v(θ).
    pub conduction: Vec<Mat>,
    /// 𝕂_eff acting on ∇θ.
    pub conductivity: Vec<Mat>,
}

pub fn transport_coefficients(
    sp: &GalerkinSpace,
    fields: &Fields,
    mp: &MaterialParams,
) -> Result<TransportCoefficients> {
    let nq = sp.n_quad();
    let total = sp.n_cells() * nq;
    let mut out = TransportCoefficients {
        mobility: Vec::with_capacity(total),
        conduction: Vec::with_capacity(total),
        conductivity: Vec::with_capacity(total),
    };
    for c in 0..sp.n_cells() {
        let cd = gather(sp, fields.y, c);
        for q in 0..nq {
            let ps = point_state(&cd, fields, sp, q);
            let m = pullback_mobility(&ps.p, ps.alpha, ps.phi, mp).map_err(|e| locate_error(e, c, q))?;
            let k = pullback_conductivity(&ps.p, ps.phi, ps.zeta, ps.vartheta, mp).map_err(|e| locate_error(e, c, q))?;
            let theta = enthalpy_inverse(ps.vartheta.max(0.0), mp);
            out.mobility.push(m);
            out.conduction.push(k * (1.0 / heat_capacity(theta, mp)));
            out.conductivity.push(k);
        }
    }
    Ok(out)
}

/// `∫ A∇u·∇u φ_i` and `∫ |∇u|² φ_i` per node.
pub fn nodal_gradient_energy(sp: &GalerkinSpace, coef: &[Mat], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nq = sp.n_quad();
    let mut weighted = vec![0.0; sp.n_nodes()];
    let mut plain = vec![0.0; sp.n_nodes()];
    for c in 0..sp.n_cells() {
        let nodes = sp.cell_nodes(c);
        for q in 0..nq {
            let g = interp_grad(&nodes, u, &sp.cell.q1_grad[q]);
            let a = &coef[c * nq + q];
            let e = a[(0, 0)] * g[0] * g[0] + (a[(0, 1)] + a[(1, 0)]) * g[0] * g[1] + a[(1, 1)] * g[1] * g[1];
            let e2 = g[0] * g[0] + g[1] * g[1];
            let w = sp.cell.weights[q];
            let phi = &sp.cell.q1_val[q];
            for k in 0..4 {
                weighted[nodes[k]] += w * e * phi[k];
                plain[nodes[k]] += w * e2 * phi[k];
            }
        }
    }
    (weighted, plain)
}

/// Chemical-potential solve modes.
#[derive(Clone, Copy, Debug)]
pub enum MuMode<'a> {
    /// Index-1 elimination at fixed ζ: `μ = ∂_ζΦ − κ4Δζ + 𝔑_ε(ζ) + τ div(𝕄∇μ)`.
    Elimination,
    /// One implicit step of length `dt` from `zeta_prev`, linearized about
    /// the current ζ iterate.
    Step { dt: f64, zeta_prev: &'a [f64] },
}

#[derive(Clone, Debug)]
pub struct MuSolution {
    pub mu: Vec<f64>,
    /// Water content after the step (equal to the input ζ in elimination mode).
    pub zeta: Vec<f64>,
    /// `ζ̇` consistent with μ through the transport equation.
    pub zeta_dot: Vec<f64>,
    pub report: CgReport,
}

/// Inputs of the μ system, in lumped nodal form.
pub struct MuSystem<'a> {
    pub sp: &'a GalerkinSpace,
    pub ops: &'a AssembledOperators,
    /// `∫ 𝕄_eff ∇μ·∇μ̃`.
    pub k_mobility: &'a CsrMatrix,
    /// `∫ ∂_ζΦ φ_i`.
    pub load_zeta: &'a [f64],
    /// `∫ ∂²_ζΦ φ_i`.
    pub zeta_curv: &'a [f64],
    pub zeta: &'a [f64],
    pub mu_guess: &'a [f64],
    pub mp: &'a MaterialParams,
    pub mu_flat: f64,
    pub eps: f64,
    pub tol: f64,
}

impl MuSystem<'_> {
    /// `A_M μ = K_𝕄 μ + M_bnd M_Γ μ`.
    pub fn apply_transport(&self, x: &[f64], out: &mut [f64]) {
        self.k_mobility.matvec(x, out);
        if self.mp.m_bnd != 0.0 {
            let b = self.ops.boundary_mass.mul(x);
            for (o, v) in out.iter_mut().zip(b) {
                *o += self.mp.m_bnd * v;
            }
        }
    }

    fn boundary_source(&self) -> Vec<f64> {
        self.ops.boundary_lumped.iter().map(|&w| self.mp.m_bnd * self.mu_flat * w).collect()
    }

    /// Solves for μ and the new ζ. Returns the diagonal `w/W` of the
    /// operator as well, for callers that need the assembled matrix.
    pub fn solve(&self, mode: MuMode) -> Result<MuSolution> {
        let n = self.sp.n_nodes();
        let w = &self.ops.lumped;
        let kz = self.ops.stiffness.mul(self.zeta);
        let f_gamma = self.boundary_source();
        let tau = self.mp.tau_rel;
        let (zeta_prev, dt) = match mode {
            MuMode::Elimination => (self.zeta, 0.0),
            MuMode::Step { dt, zeta_prev } => (zeta_prev, dt),
        };
        // c = b(ζᵏ) + D(ζⁿ − ζᵏ) + κ4Kζᵏ, W = τ + D dt / w.
        let mut c = vec![0.0; n];
        let mut big_w = vec![0.0; n];
        for i in 0..n {
            let d_i = self.zeta_curv[i] + w[i] * crate::constitutive::yosida_slope(self.zeta[i], self.eps);
            let b_i = self.load_zeta[i] + w[i] * yosida(self.zeta[i], self.eps);
            c[i] = b_i + d_i * (zeta_prev[i] - self.zeta[i]) + self.mp.kappa4 * kz[i];
            big_w[i] = tau + d_i * dt / w[i];
        }
        if big_w.iter().any(|&x| !(x > 0.0)) {
            // No rate term: μ is the lumped projection of c.
            let mu: Vec<f64> = (0..n).map(|i| c[i] / w[i]).collect();
            return Ok(MuSolution {
                mu,
                zeta: self.zeta.to_vec(),
                zeta_dot: vec![0.0; n],
                report: CgReport { iterations: 0, residual: 0.0 },
            });
        }
        let diag_shift: Vec<f64> = (0..n).map(|i| w[i] / big_w[i]).collect();
        let rhs: Vec<f64> = (0..n).map(|i| c[i] / big_w[i] + f_gamma[i]).collect();
        let mut diag = self.k_mobility.diagonal();
        let bdiag = self.ops.boundary_mass.diagonal();
        for i in 0..n {
            diag[i] += diag_shift[i] + self.mp.m_bnd * bdiag[i];
        }
        let mut mu = self.mu_guess.to_vec();
        let report = pcg(
            |x, out| {
                self.apply_transport(x, out);
                for i in 0..n {
                    out[i] += diag_shift[i] * x[i];
                }
            },
            &diag,
            &rhs,
            &mut mu,
            self.tol,
            20 * n + 100,
        )?;
        let mut am = vec![0.0; n];
        self.apply_transport(&mu, &mut am);
        let zeta_dot: Vec<f64> = (0..n).map(|i| (f_gamma[i] - am[i]) / w[i]).collect();
        let zeta = match mode {
            MuMode::Elimination => self.zeta.to_vec(),
            MuMode::Step { dt, zeta_prev } => (0..n).map(|i| zeta_prev[i] + dt * zeta_dot[i]).collect(),
        };
        Ok(MuSolution { mu, zeta, zeta_dot, report })
    }

    /// The SPD operator `diag(w/W) + A_M` as a dense matrix.
    pub fn dense_operator(&self, mode: MuMode) -> Vec<Vec<f64>> {
        let n = self.sp.n_nodes();
        let w = &self.ops.lumped;
        let dt = match mode {
            MuMode::Elimination => 0.0,
            MuMode::Step { dt, .. } => dt,
        };
        let mut a = self.k_mobility.to_dense();
        let b = self.ops.boundary_mass.to_dense();
        for i in 0..n {
            let d_i = self.zeta_curv[i] + w[i] * crate::constitutive::yosida_slope(self.zeta[i], self.eps);
            let big_w = self.mp.tau_rel + d_i * dt / w[i];
            for j in 0..n {
                a[i][j] += self.mp.m_bnd * b[i][j];
            }
            a[i][i] += w[i] / big_w;
        }
        a
    }

    /// Right-hand side matching [`MuSystem::dense_operator`].
    pub fn dense_rhs(&self, mode: MuMode) -> Vec<f64> {
        let n = self.sp.n_nodes();
        let w = &self.ops.lumped;
        let kz = self.ops.stiffness.mul(self.zeta);
        let f_gamma = self.boundary_source();
        let (zeta_prev, dt) = match mode {
            MuMode::Elimination => (self.zeta, 0.0),
            MuMode::Step { dt, zeta_prev } => (zeta_prev, dt),
        };
        (0..n)
            .map(|i| {
                let d_i = self.zeta_curv[i] + w[i] * crate::constitutive::yosida_slope(self.zeta[i], self.eps);
                let b_i = self.load_zeta[i] + w[i] * yosida(self.zeta[i], self.eps);
                let c = b_i + d_i * (zeta_prev[i] - self.zeta[i]) + self.mp.kappa4 * kz[i];
                c / (self.mp.tau_rel + d_i * dt / w[i]) + f_gamma[i]
            })
            .collect()
    }
}

/// Solves the discrete chemical-potential system for the given fields.
pub fn solve_chemical_potential(
    fields: &Fields,
    mode: MuMode,
    sp: &GalerkinSpace,
    ops: &AssembledOperators,
    mp: &MaterialParams,
    bc: &BoundaryData,
    eps: f64,
) -> Result<MuSolution> {
    let sweep = mechanical_sweep(sp, fields, mp)?;
    let tc = transport_coefficients(sp, fields, mp)?;
    let k_mob = weighted_stiffness(sp, &tc.mobility);
    MuSystem {
        sp,
        ops,
        k_mobility: &k_mob,
        load_zeta: &sweep.load_zeta,
        zeta_curv: &sweep.zeta_curv,
        zeta: fields.zeta,
        mu_guess: fields.mu,
        mp,
        mu_flat: bc.mu_flat,
        eps,
        tol: 1e-12,
    }
    .solve(mode)
}

/// The two appearances of the water-content/potential pairing: the
/// `⟨ζ̇, μ̃⟩` term of the transport equation tested with μ̃ = μ, and the
/// `−⟨μ, ζ̃⟩` term of the potential equation tested with ζ̃ = ζ̇. Both use
/// the one lumped mass of the shared scalar space.
pub fn mu_zeta_pairing(ops: &AssembledOperators, zeta_dot: &[f64], mu: &[f64]) -> (f64, f64) {
    let w = &ops.lumped;
    let transport_term: f64 = (0..w.len()).map(|i| (w[i] * zeta_dot[i]) * mu[i]).sum();
    let potential_term: f64 = (0..w.len()).map(|i| -(w[i] * mu[i]) * zeta_dot[i]).sum();
    (transport_term, potential_term)
}

/// Boundary integrals of the current state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BoundaryValues {
    /// `∫_Γ ½N|y|²`.
    pub spring_energy: f64,
    /// `∫_Γ M_bnd(μ − μ♭)μ`.
    pub water_outflow: f64,
    /// `∫_Γ K_bnd(θ − θ♭ε)`, trapezoidal along facets.
    pub heat_outflow: f64,
    /// `∫_Γ N y♭(t)·y`.
    pub flat_pairing: f64,
    /// `∫_Γ N ẏ♭·y`.
    pub flat_rate_pairing: f64,
}

/// Boundary functionals; the by-parts spring work over `[t0, t1]` is
/// `flat_pairing(t1) − flat_pairing(t0) − ∫ flat_rate_pairing dt`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_functionals(
    y: &[f64],
    mu: &[f64],
    vartheta: &[f64],
    t: f64,
    bc: &BoundaryData,
    sp: &GalerkinSpace,
    mp: &MaterialParams,
    eps: f64,
) -> BoundaryValues {
    let mut out = BoundaryValues::default();
    let theta_b = bc.theta_flat_eps(eps);
    for &(c, side) in &sp.boundary_facets {
        let et = &sp.edge[side.index()];
        let nodes = sp.cell_nodes(c);
        let dofs = [sp.cell_y_dofs(c, 0), sp.cell_y_dofs(c, 1)];
        for (q, &w) in et.weights.iter().enumerate() {
            let h = &et.herm_val[q];
            let mut yv = [0.0; 2];
            for comp in 0..2 {
                for l in 0..16 {
                    yv[comp] += y[dofs[comp][l]] * h[l];
                }
            }
            let x = sp.edge_point_coords(c, side, q);
            let yf = bc.y_flat(x, t);
            let yr = bc.y_flat_rate(x);
            out.spring_energy += w * 0.5 * mp.spring_n * (yv[0] * yv[0] + yv[1] * yv[1]);
            out.flat_pairing += w * mp.spring_n * (yf[0] * yv[0] + yf[1] * yv[1]);
            out.flat_rate_pairing += w * mp.spring_n * (yr[0] * yv[0] + yr[1] * yv[1]);
            let m = interp(&nodes, mu, &et.q1_val[q]);
            out.water_outflow += w * mp.m_bnd * (m - bc.mu_flat) * m;
        }
        // Trapezoid: the two facet end nodes, half the facet length each.
        let (len, ends) = facet_ends(sp, c, side);
        for n in ends {
            let theta = enthalpy_inverse(vartheta[n].max(0.0), mp);
            out.heat_outflow += 0.5 * len * mp.k_bnd * (theta - theta_b);
        }
    }
    out
}

fn facet_ends(sp: &GalerkinSpace, c: usize, side: Side) -> (f64, [usize; 2]) {
    let n = sp.cell_nodes(c);
    match side {
        Side::Bottom => (sp.grid.dx, [n[0], n[1]]),
        Side::Top => (sp.grid.dx, [n[2], n[3]]),
        Side::Left => (sp.grid.dy, [n[0], n[2]]),
        Side::Right => (sp.grid.dy, [n[1], n[3]]),
    }
}

/// Constant and time-linear load vectors in the deformation space.
#[derive(Clone, Debug)]
pub struct DeformationLoads {
    /// `∫ ρ g·ỹ`.
    pub gravity: Vec<f64>,
    /// `∫_Γ N x·ỹ`.
    pub flat0: Vec<f64>,
    /// `∫_Γ N G(x − x_c)·ỹ`; the spring load at time t is `flat0 + t flat1`.
    pub flat1: Vec<f64>,
}

pub fn deformation_loads(sp: &GalerkinSpace, mp: &MaterialParams, bc: &BoundaryData) -> DeformationLoads {
    let n = sp.n_y_dofs();
    let mut out = DeformationLoads { gravity: vec![0.0; n], flat0: vec![0.0; n], flat1: vec![0.0; n] };
    if bc.gravity != [0.0, 0.0] {
        for c in 0..sp.n_cells() {
            let dofs = [sp.cell_y_dofs(c, 0), sp.cell_y_dofs(c, 1)];
            for q in 0..sp.n_quad() {
                let w = sp.cell.weights[q] * mp.rho;
                let h = &sp.cell.herm[q];
                for comp in 0..2 {
                    for l in 0..16 {
                        out.gravity[dofs[comp][l]] += w * bc.gravity[comp] * h.val[l];
                    }
                }
            }
        }
    }
    for &(c, side) in &sp.boundary_facets {
        let et = &sp.edge[side.index()];
        let dofs = [sp.cell_y_dofs(c, 0), sp.cell_y_dofs(c, 1)];
        for (q, &w) in et.weights.iter().enumerate() {
            let x = sp.edge_point_coords(c, side, q);
            let r = bc.y_flat_rate(x);
            let h = &et.herm_val[q];
            for comp in 0..2 {
                for l in 0..16 {
                    out.flat0[dofs[comp][l]] += w * mp.spring_n * x[comp] * h[l];
                    out.flat1[dofs[comp][l]] += w * mp.spring_n * r[comp] * h[l];
                }
            }
        }
    }
    out
}

/// Nodal rates and heat production, all evaluated at nodes with the lumped
/// quadrature used by the stepper. The transport part uses
/// `∫ 𝕄_eff∇μ·∇μ φ_i / w_i` so that its lumped integral equals `μᵀK_𝕄μ`.
#[allow(clippy::too_many_arguments)]
pub fn nodal_heat_production(
    sp: &GalerkinSpace,
    ops: &AssembledOperators,
    fields: &Fields,
    rates: &FieldRates,
    mobility: &[Mat],
    mp: &MaterialParams,
    eps: f64,
) -> Result<Vec<HeatProduction>> {
    let (trans, grad2) = nodal_gradient_energy(sp, mobility, fields.mu);
    let mut out = Vec::with_capacity(sp.n_nodes());
    for i in 0..sp.n_nodes() {
        let p = Mat::new2(fields.p[0][i], fields.p[1][i], fields.p[2][i], fields.p[3][i]);
        let p_dot = Mat::new2(rates.p_dot[0][i], rates.p_dot[1][i], rates.p_dot[2][i], rates.p_dot[3][i]);
        let p_inv = p
            .inverse()
            .map_err(|_| Error::NonpositivePlasticDeterminant { det: p.det(), cell: None })?;
        let rho = p_dot * p_inv;
        let (_, force) = dissipation_r(&rho, mp);
        let plastic = force.ddot(&rho);
        let (ad, pd) = (rates.alpha_dot[i], rates.phi_dot[i]);
        let (_, fd) = dissipation_d(fields.alpha[i], fields.phi[i], fields.phi0[i], ad, pd, mp);
        let damage = fd[0] * ad + fd[1] * pd;
        let water = mp.tau_rel * rates.zeta_dot[i] * rates.zeta_dot[i];
        let w = ops.lumped[i];
        let transport = trans[i] / w;
        let r = plastic + damage + water + transport;
        let denom = 1.0 + eps * (rho.norm2() + ad * ad + pd * pd + grad2[i] / w);
        out.push(HeatProduction { plastic, damage, water, transport, r, r_eps: r / denom });
    }
    Ok(out)
}

/// Residual of every semi-discrete weak equation, one entry per test function.
#[derive(Clone, Debug)]
pub struct ResidualVectors {
    pub momentum: Vec<f64>,
    pub plastic: Vec<Vec<f64>>,
    pub damage: Vec<f64>,
    pub porosity: Vec<f64>,
    /// Transport equation of the water content.
    pub water: Vec<f64>,
    /// Chemical-potential relation.
    pub potential: Vec<f64>,
    pub heat: Vec<f64>,
}

impl ResidualVectors {
    pub fn max_abs(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut out = m(&self.momentum).max(m(&self.damage)).max(m(&self.porosity));
        out = out.max(m(&self.water)).max(m(&self.potential)).max(m(&self.heat));
        self.plastic.iter().fold(out, |a, v| a.max(m(v)))
    }
}

/// Spatial weak residuals of the regularized system at time `t` for the
/// given coefficients and rates, with lumped mass on all first-order terms.
#[allow(clippy::too_many_arguments)]
pub fn assemble_residuals(
    fields: &Fields,
    rates: &FieldRates,
    t: f64,
    sp: &GalerkinSpace,
    ops: &AssembledOperators,
    mp: &MaterialParams,
    bc: &BoundaryData,
    eps: f64,
) -> Result<ResidualVectors> {
    let nn = sp.n_nodes();
    let w = &ops.lumped;
    let sweep = mechanical_sweep(sp, fields, mp)?;
    let loads = deformation_loads(sp, mp, bc);

    let ma = ops.y_mass.mul(&rates.accel);
    let k2 = ops.y_bending.mul(fields.y);
    let sg = ops.y_boundary_mass.mul(fields.y);
    let momentum: Vec<f64> = (0..sp.n_y_dofs())
        .map(|i| {
            mp.rho * ma[i] + sweep.f_int[i] + mp.kappa0 * k2[i] + mp.spring_n * sg[i]
                - loads.flat0[i]
                - t * loads.flat1[i]
                - loads.gravity[i]
        })
        .collect();

    let ql = assemble_q_laplacian(fields.p, sp, mp);
    let mut plastic = vec![vec![0.0; nn]; 4];
    for i in 0..nn {
        if sp.dirichlet_nodes[i] {
            continue;
        }
        let p = Mat::new2(fields.p[0][i], fields.p[1][i], fields.p[2][i], fields.p[3][i]);
        let p_dot = Mat::new2(rates.p_dot[0][i], rates.p_dot[1][i], rates.p_dot[2][i], rates.p_dot[3][i]);
        let p_inv = p
            .inverse()
            .map_err(|_| Error::NonpositivePlasticDeterminant { det: p.det(), cell: None })?;
        let (_, force) = dissipation_r(&(p_dot * p_inv), mp);
        let visc = force * p_inv.transpose();
        for r in 0..2 {
            for s in 0..2 {
                let k = r * 2 + s;
                plastic[k][i] = w[i] * visc[(r, s)] + sweep.load_p[k][i] + ql.action[k][i];
            }
        }
    }

    let ka = ops.stiffness.mul(fields.alpha);
    let kp = ops.stiffness.mul(fields.phi);
    let kz = ops.stiffness.mul(fields.zeta);
    let mut damage = vec![0.0; nn];
    let mut porosity = vec![0.0; nn];
    let mut potential = vec![0.0; nn];
    for i in 0..nn {
        let (_, fd) =
            dissipation_d(fields.alpha[i], fields.phi[i], fields.phi0[i], rates.alpha_dot[i], rates.phi_dot[i], mp);
        damage[i] = w[i] * fd[0] + sweep.load_alpha[i] + mp.kappa2 * ka[i];
        porosity[i] = w[i] * fd[1] + sweep.load_phi[i] + mp.kappa3 * kp[i];
        potential[i] = -w[i] * fields.mu[i]
            + sweep.load_zeta[i]
            + w[i] * yosida(fields.zeta[i], eps)
            + mp.kappa4 * kz[i]
            + mp.tau_rel * w[i] * rates.zeta_dot[i];
    }

    let tc = transport_coefficients(sp, fields, mp)?;
    let k_mob = weighted_stiffness(sp, &tc.mobility);
    let mut water = k_mob.mul(fields.mu);
    let bm = ops.boundary_mass.mul(fields.mu);
    for i in 0..nn {
        water[i] += w[i] * rates.zeta_dot[i] + mp.m_bnd * (bm[i] - bc.mu_flat * ops.boundary_lumped[i]);
    }

    let k_cond = weighted_stiffness(sp, &tc.conduction);
    let hp = nodal_heat_production(sp, ops, fields, rates, &tc.mobility, mp, eps)?;
    let mut heat = k_cond.mul(fields.vartheta);
    let theta_b = bc.theta_flat_eps(eps);
    for i in 0..nn {
        let theta = enthalpy_inverse(fields.vartheta[i].max(0.0), mp);
        let [x, y] = sp.node_coords(i);
        let src = bc.heat_source.as_ref().map_or(0.0, |s| s(x, y, t));
        heat[i] += w[i] * (rates.vartheta_dot[i] - hp[i].r_eps - src)
            + mp.k_bnd * ops.boundary_lumped[i] * (theta - theta_b);
    }

    Ok(ResidualVectors { momentum, plastic, damage, porosity, water, potential, heat })
}

/// Squared L²-type norm `vᵀ M_L^{-1} v` of a residual over the scalar space.
pub fn dual_norm_lumped(ops: &AssembledOperators, v: &[f64]) -> f64 {
    v.iter().zip(&ops.lumped).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
}

/// Euclidean norm helper.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
