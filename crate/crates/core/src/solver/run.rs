use super::step::{Increments, StepDetail, StepReport, Stepper};
use super::{EnergyItems, Model, State};
use crate::constitutive::HeatProduction;
use crate::error::{Error, Result};

/// Output cadence in accepted steps; the final state is always recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MarchOptions {
    pub ledger_every: usize,
    pub snapshot_every: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        MarchOptions { ledger_every: 1, snapshot_every: 50 }
    }
}

/// One row of the in-loop energy ledger. Cumulative columns integrate the
/// per-step increments exactly as the stepper exchanges them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub step: usize,
    pub energies: EnergyItems,
    pub cumulative: Increments,
    /// `|E(t) − E(0) − W − F_w − F_h + D − H|`.
    pub residual_total: f64,
    /// Entropy production rate of the last step.
    pub entropy_production: f64,
    /// Smallest nodal entropy-production integrand of the last step.
    pub entropy_production_min: f64,
    pub zeta_violation: f64,
    pub min_vartheta: f64,
}

impl LedgerRow {
    pub fn work(&self) -> f64 {
        self.cumulative.work_gravity + self.cumulative.work_spring
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub ledger: Vec<LedgerRow>,
    pub snapshots: Vec<State>,
    pub steps: Vec<StepReport>,
    pub final_state: State,
    /// Rates and heat production of the last accepted step.
    pub last_detail: Option<StepDetail>,
    /// Number of rejected attempts.
    pub rejections: usize,
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::FixedPointDivergence { .. }
            | Error::NonpositivePlasticDeterminant { .. }
            | Error::SolverDivergence { .. }
            | Error::QuadratureOverflow { .. }
    )
}

fn ledger_row(
    model: &Model,
    s: &State,
    step: usize,
    e0: f64,
    cum: &Increments,
    hp: Option<&[HeatProduction]>,
) -> Result<LedgerRow> {
    let energies = model.energies(s)?;
    let (prod, prod_min) = match hp {
        Some(hp) => model.entropy_production(s, hp)?,
        None => (0.0, 0.0),
    };
    let balance = energies.total()
        - e0
        - cum.work_gravity
        - cum.work_spring
        - cum.flux_water
        - cum.flux_heat
        + (cum.dissipation - cum.heat);
    Ok(LedgerRow {
        t: s.t,
        step,
        energies,
        cumulative: *cum,
        residual_total: balance.abs(),
        entropy_production: prod,
        entropy_production_min: prod_min,
        zeta_violation: s.zeta_violation(),
        min_vartheta: s.min_vartheta(),
    })
}

/// Marches from `init` to `t_end`. With adaptive stepping a failed step is
/// retried with half the step (at most `max_halvings` levels); after four
/// accepted steps the step is doubled back toward the configured `dt`.
pub fn march(model: &Model, init: State, opts: &MarchOptions) -> Result<Trajectory> {
    let st = &model.settings;
    let base = st.dt;
    let t_end = st.t_end;
    let at = |t: f64, e: Error| Error::AtTime { t, source: Box::new(e) };
    if !(base > 0.0 && base.is_finite()) || !(t_end >= 0.0) {
        return Err(Error::Validation(format!("need dt > 0 and t_end ≥ 0, got dt = {base}, t_end = {t_end}")));
    }
    let ledger_every = opts.ledger_every.max(1);
    let snapshot_every = opts.snapshot_every.max(1);

    let e0 = model.energies(&init).map_err(|e| at(init.t, e))?.total();
    let mut cum = Increments::default();
    let mut traj = Trajectory {
        ledger: vec![ledger_row(model, &init, 0, e0, &cum, None).map_err(|e| at(init.t, e))?],
        snapshots: vec![init.clone()],
        steps: Vec::new(),
        final_state: init.clone(),
        last_detail: None,
        rejections: 0,
    };
    let mut stepper = Stepper::new(model);
    let mut state = init;
    let mut dt = base;
    let mut level = 0usize;
    let mut streak = 0usize;
    let end_tol = 1e-9 * base;

    while t_end - state.t > end_tol {
        let mut h = dt.min(t_end - state.t);
        if t_end - (state.t + h) <= end_tol {
            h = t_end - state.t;
        }
        match stepper.step(&state, h) {
            Ok((next, report, detail)) => {
                cum += report.increments;
                state = next;
                traj.steps.push(report);
                let n = traj.steps.len();
                let last = t_end - state.t <= end_tol;
                if n % ledger_every == 0 || last {
                    let row = ledger_row(model, &state, n, e0, &cum, Some(&detail.heat_production))
                        .map_err(|e| at(state.t, e))?;
                    traj.ledger.push(row);
                }
                if n % snapshot_every == 0 || last {
                    traj.snapshots.push(state.clone());
                }
                traj.last_detail = Some(detail);
                streak += 1;
                if level > 0 && streak >= 4 {
                    dt = (2.0 * dt).min(base);
                    level -= 1;
                    streak = 0;
                }
            }
            Err(e) if st.adaptive && recoverable(&e) && level < st.max_halvings => {
                traj.rejections += 1;
                dt *= 0.5;
                level += 1;
                streak = 0;
            }
            Err(e) => return Err(at(state.t, e)),
        }
    }
    traj.final_state = state;
    Ok(traj)
}
