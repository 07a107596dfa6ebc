use crate::constitutive::yosida;
use crate::error::Result;
use crate::galerkin::{assemble_residuals, dual_norm_lumped, ResidualVectors};
use crate::solver::{midpoint_fields, midpoint_y, step_rates, Model, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dual-norm surrogates of the weak residuals of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakResiduals {
    pub momentum: f64,
    pub plastic: f64,
    pub damage: f64,
    pub porosity: f64,
    pub water: f64,
    pub potential: f64,
    pub heat: f64,
}

impl WeakResiduals {
    pub fn max(&self) -> f64 {
        [self.momentum, self.plastic, self.damage, self.porosity, self.water, self.potential, self.heat]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn step_residual_vectors(model: &Model, old: &State, new: &State) -> Result<ResidualVectors> {
    let rates = step_rates(old, new);
    let y_mid = midpoint_y(old, new);
    let tm = 0.5 * (old.t + new.t);
    let st = &model.settings;
    assemble_residuals(
        &midpoint_fields(&y_mid, new),
        &rates,
        tm,
        &model.sp,
        &model.ops,
        &model.mp,
        &model.bc,
        st.eps,
    )
}

/// Residuals of the step `old → new` with the equations collocated as the
/// stepper does: deformation at the midpoint, every other field at the new
/// level, rates as difference quotients. Norms are `rᵀ D⁻¹ r` with `D` the
/// (lumped) mass diagonal; frozen blocks report zero.
pub fn weak_residual_check(model: &Model, old: &State, new: &State) -> Result<WeakResiduals> {
    let r = step_residual_vectors(model, old, new)?;
    let ev = model.settings.evolve;
    let ops = &model.ops;
    let on = |flag: bool, v: f64| if flag { v } else { 0.0 };
    let y_diag = ops.y_mass.diagonal();
    let momentum = r.momentum.iter().zip(&y_diag).map(|(x, d)| x * x / d).sum::<f64>().sqrt();
    let plastic = r.plastic.iter().map(|v| dual_norm_lumped(ops, v).powi(2)).sum::<f64>().sqrt();
    Ok(WeakResiduals {
        momentum: on(ev.mechanics, momentum),
        plastic: on(ev.plastic, plastic),
        damage: on(ev.damage, dual_norm_lumped(ops, &r.damage)),
        porosity: on(ev.porosity, dual_norm_lumped(ops, &r.porosity)),
        water: on(ev.water, dual_norm_lumped(ops, &r.water)),
        potential: on(ev.water, dual_norm_lumped(ops, &r.potential)),
        heat: on(ev.heat, dual_norm_lumped(ops, &r.heat)),
    })
}

/// Tests the limiting variational inequality of the water content,
/// `∫ κ4∇ζ·∇(ζ̃−ζ) + (∂_ζΦ_M + τ ζ̇ − μ)(ζ̃−ζ) ≥ 0`, against `n_tests`
/// random nodal fields `ζ̃ ∈ [0, 1]`. Returns the smallest value divided by
/// `max(1, ‖ζ̃ − ζ‖_{L¹})`; the penalty term makes it nonnegative up to the
/// residual of the potential equation.
pub fn variational_inequality_check(model: &Model, old: &State, new: &State, n_tests: usize, seed: u64) -> Result<f64> {
    let r = step_residual_vectors(model, old, new)?;
    let eps = model.settings.eps;
    let w = &model.ops.lumped;
    // Integrand of the inequality against nodal test functions: the
    // potential residual with the penalty force removed.
    let g: Vec<f64> = (0..w.len()).map(|i| r.potential[i] - w[i] * yosida(new.zeta[i], eps)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..n_tests {
        let mut val = 0.0;
        let mut l1 = 0.0;
        for i in 0..w.len() {
            let d = rng.random::<f64>() - new.zeta[i];
            val += g[i] * d;
            l1 += w[i] * d.abs();
        }
        worst = worst.min(val / l1.max(1.0));
    }
    Ok(worst)
}
