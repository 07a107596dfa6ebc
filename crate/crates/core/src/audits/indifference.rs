use crate::constitutive::{d_stored_energy, dissipation_r, stored_energy, MaterialParams, PointState};
use crate::error::Result;
use crate::galerkin::{assemble_operators, build_space, Side, Y_DOFS_PER_NODE};
use crate::tensor::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest relative violation of each symmetry over the sampled states.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IndifferenceReport {
    pub samples: usize,
    /// `Φ_M(RF, P) = Φ_M(F, P)` and `σ_el(RF) = R σ_el(F)`.
    pub frame: f64,
    /// `Φ_M(FΠ, PΠ) = Φ_M(F, P)`.
    pub plastic: f64,
    /// Bending and spring energies under a constant rotation of `y`.
    pub gradient: f64,
    /// Flow rule tested with `Ṗ̃` against the rewritten rule tested with
    /// `Ṗ̃P⁻¹`, for the dissipative and the stored-energy parts.
    pub flow_rule: f64,
}

impl IndifferenceReport {
    pub fn max(&self) -> f64 {
        self.frame.max(self.plastic).max(self.gradient).max(self.flow_rule)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn rel_mat(a: &Mat, b: &Mat) -> f64 {
    (*a - *b).max_abs() / a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE)
}

fn random_mat(rng: &mut ChaCha8Rng, base: Mat, amp: f64) -> Mat {
    base + Mat::from_fn(2, |_, _| amp * (2.0 * rng.random::<f64>() - 1.0))
}

fn random_state(rng: &mut ChaCha8Rng, mp: &MaterialParams) -> PointState {
    let r = Mat::rotation2(std::f64::consts::TAU * rng.random::<f64>());
    PointState {
        f: r * random_mat(rng, Mat::identity(2), 0.1),
        p: random_mat(rng, Mat::identity(2), 0.1),
        alpha: rng.random::<f64>(),
        phi: 0.8 * mp.phi_cr * rng.random::<f64>(),
        zeta: rng.random::<f64>(),
        vartheta: 1.0,
        phi0: 0.0,
    }
}

/// Runs the symmetry checks on `samples` random states and rotations.
pub fn indifference_suite(mp: &MaterialParams, samples: usize, seed: u64) -> Result<IndifferenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = IndifferenceReport { samples, ..Default::default() };
    for _ in 0..samples {
        let ps = random_state(&mut rng, mp);
        let rot = Mat::rotation2(std::f64::consts::TAU * rng.random::<f64>());
        let e = stored_energy(&ps, mp)?;
        let df = d_stored_energy(&ps, mp)?;

        let turned = PointState { f: rot * ps.f, ..ps };
        let dr = d_stored_energy(&turned, mp)?;
        rep.frame = rep.frame.max(rel(stored_energy(&turned, mp)?, e)).max(rel_mat(&dr.sigma_el, &(rot * df.sigma_el)));

        let prior = PointState { f: ps.f * rot, p: ps.p * rot, ..ps };
        rep.plastic = rep.plastic.max(rel(stored_energy(&prior, mp)?, e));

        let p_dot = random_mat(&mut rng, Mat::zeros(2), 1.0);
        let test = random_mat(&mut rng, Mat::zeros(2), 1.0);
        let p_inv = ps.p.inverse()?;
        let (_, force) = dissipation_r(&(p_dot * p_inv), mp);
        // Both pairings can cancel to near zero; scale by the factor norms.
        let tp = test.norm() * p_inv.norm();
        let direct = (force * p_inv.transpose()).ddot(&test);
        let rewritten = force.ddot(&(test * p_inv));
        let stress_direct = df.sigma_in.ddot(&test);
        let stress_rewritten = (df.sigma_in * ps.p.transpose()).ddot(&(test * p_inv));
        let scale_r = force.norm() * tp;
        let scale_s = df.sigma_in.norm() * ps.p.norm() * tp;
        rep.flow_rule = rep
            .flow_rule
            .max((direct - rewritten).abs() / scale_r.max(f64::MIN_POSITIVE))
            .max((stress_direct - stress_rewritten).abs() / scale_s.max(f64::MIN_POSITIVE));
    }

    // Constant rotation of a random deformation on a small grid.
    let sp = build_space(3, 3, 1.0, 1.0, &[Side::Bottom, Side::Top])?;
    let ops = assemble_operators(&sp);
    let mut y = sp.identity_y();
    for v in y.iter_mut() {
        *v += 0.05 * (2.0 * rng.random::<f64>() - 1.0);
    }
    let bending = ops.y_bending.bilinear(&y, &y);
    let spring = ops.y_boundary_mass.bilinear(&y, &y);
    for _ in 0..samples.clamp(1, 100) {
        let rot = Mat::rotation2(std::f64::consts::TAU * rng.random::<f64>());
        let mut yr = y.clone();
        for n in 0..sp.n_nodes() {
            for k in 0..4 {
                let (a, b) = (y[n * Y_DOFS_PER_NODE + k], y[n * Y_DOFS_PER_NODE + 4 + k]);
                yr[n * Y_DOFS_PER_NODE + k] = rot[(0, 0)] * a + rot[(0, 1)] * b;
                yr[n * Y_DOFS_PER_NODE + 4 + k] = rot[(1, 0)] * a + rot[(1, 1)] * b;
            }
        }
        rep.gradient = rep
            .gradient
            .max(rel(ops.y_bending.bilinear(&yr, &yr), bending))
            .max(rel(ops.y_boundary_mass.bilinear(&yr, &yr), spring));
    }
    Ok(rep)
}
