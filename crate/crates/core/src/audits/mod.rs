//! Post-hoc checks of a run: independent energy and entropy ledgers, weak
//! residuals, the limiting variational inequality, frame indifference and
//! refinement studies.

mod energy;
mod indifference;
mod residual;
mod run_dir;
mod sweep;

pub use energy::{
    audit_energies, energy_audit, entropy_audit, AuditEnergies, EnergyLedger, EnergyLedgerRow, EntropyAudit, EntropyRow,
};
pub use indifference::{indifference_suite, IndifferenceReport};
pub use residual::{variational_inequality_check, weak_residual_check, WeakResiduals};
pub use run_dir::{audit_run_dir, RunDirAudit};
pub use sweep::{convergence_sweep, heat_mms, observed_orders, FieldNorms, MmsLevel, SweepResult, SweepRun};
