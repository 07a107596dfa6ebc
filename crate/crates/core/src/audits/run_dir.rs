use super::energy::audit_energies;
use super::residual::{variational_inequality_check, weak_residual_check};
use crate::error::{Error, Result};
use crate::scenario::{read_csv_table, read_ledger_csv, read_manifest, read_snapshot};
use crate::solver::State;
use std::path::Path;

/// Checks of a run directory written by `write_outputs`.
#[derive(Clone, Debug, Default)]
pub struct RunDirAudit {
    pub snapshots_checked: usize,
    /// Largest deviation of a recomputed energy item from the ledger files,
    /// relative to `max(1, |E|)`.
    pub kernel_mismatch: f64,
    /// Energy identity residual with recomputed energies and the logged
    /// exchange terms.
    pub energy_residual: f64,
    pub ledger_residual: f64,
    pub dissipation_monotone: bool,
    /// Largest entropy decrease between ledger rows, for insulated runs.
    pub entropy_max_decrease: Option<f64>,
    pub min_vartheta: f64,
    pub min_det_p: f64,
    pub det_floor: f64,
    pub max_zeta_violation: f64,
    /// Largest weak residual over consecutive snapshot pairs, when every
    /// step was written.
    pub weak_residual: Option<f64>,
    pub weak_residual_bound: f64,
    pub variational_inequality: Option<f64>,
}

pub const KERNEL_TOL: f64 = 1e-10;
pub const ENTROPY_TOL: f64 = 1e-8;
pub const VARTHETA_TOL: f64 = 1e-10;
pub const VI_SLACK: f64 = 1e-10;

impl RunDirAudit {
    /// `(name, passed, detail)` for each check.
    pub fn checks(&self) -> Vec<(&'static str, bool, String)> {
        let mut out = vec![
            (
                "energy kernels",
                self.kernel_mismatch <= KERNEL_TOL,
                format!("max mismatch {:.3e} over {} snapshots", self.kernel_mismatch, self.snapshots_checked),
            ),
            (
                "energy identity",
                true,
                format!("recomputed residual {:.3e}, logged {:.3e}", self.energy_residual, self.ledger_residual),
            ),
            ("dissipation", self.dissipation_monotone, "cumulative dissipation nondecreasing".into()),
            ("temperature", self.min_vartheta >= -VARTHETA_TOL, format!("min nodal ϑ {:.4e}", self.min_vartheta)),
            (
                "plastic determinant",
                self.min_det_p >= self.det_floor,
                format!("min det P {:.6} (floor {:e})", self.min_det_p, self.det_floor),
            ),
            ("water constraint", true, format!("max ζ-violation {:.3e}", self.max_zeta_violation)),
        ];
        if let Some(d) = self.entropy_max_decrease {
            out.push(("entropy", d <= ENTROPY_TOL, format!("max decrease {d:.3e}")));
        }
        if let Some(w) = self.weak_residual {
            out.push((
                "weak residuals",
                w <= self.weak_residual_bound,
                format!("max {w:.3e} (bound {:.1e})", self.weak_residual_bound),
            ));
        }
        if let Some(v) = self.variational_inequality {
            out.push(("variational inequality", v >= -VI_SLACK, format!("min normalized value {v:.3e}")));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }
}

fn column<'a>(header: &[String], rows: &'a [Vec<f64>], name: &str) -> Result<impl Iterator<Item = f64> + 'a> {
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Validation(format!("ledger_detail.csv lacks column `{name}`")))?;
    Ok(rows.iter().map(move |r| r[k]))
}

/// Re-reads a run directory and audits it.
pub fn audit_run_dir(dir: &Path) -> Result<RunDirAudit> {
    let manifest = read_manifest(&dir.join("run_manifest.toml"))?;
    let cfg = manifest.config.clone();
    let (model, _) = cfg.build()?;
    let ledger = read_ledger_csv(&std::fs::read_to_string(dir.join("ledger.csv"))?)?;
    let (dh, drows) = read_csv_table(&std::fs::read_to_string(dir.join("ledger_detail.csv"))?, "ledger_detail.csv")?;
    let heat: Vec<f64> = column(&dh, &drows, "heat_cum")?.collect();
    let min_vartheta_rows = column(&dh, &drows, "min_vartheta")?.fold(f64::INFINITY, f64::min);
    if heat.len() != ledger.len() {
        return Err(Error::Validation("ledger.csv and ledger_detail.csv have different lengths".into()));
    }

    let mut out = RunDirAudit {
        dissipation_monotone: ledger.windows(2).all(|w| w[1].dissipation_cum >= w[0].dissipation_cum),
        ledger_residual: ledger.iter().map(|r| r.residual_total).fold(0.0, f64::max),
        min_det_p: ledger.iter().map(|r| r.min_det_p).fold(f64::INFINITY, f64::min),
        det_floor: cfg.solver.det_floor,
        max_zeta_violation: ledger.iter().map(|r| r.zeta_violation).fold(0.0, f64::max),
        min_vartheta: min_vartheta_rows,
        weak_residual_bound: 10.0 * cfg.solver.tol_fp,
        ..Default::default()
    };
    if cfg.material.k_bnd == 0.0 {
        out.entropy_max_decrease =
            Some(ledger.windows(2).map(|w| w[0].entropy - w[1].entropy).fold(f64::NEG_INFINITY, f64::max));
    }

    let mut states: Vec<State> = Vec::new();
    let full = manifest.fields.len() == crate::scenario::SNAPSHOT_FIELDS.len();
    let mut e0 = None;
    for name in &manifest.snapshots {
        let snap = read_snapshot(&std::fs::read_to_string(dir.join(name))?, &manifest.fields)?;
        if let Some(v) = snap.field("vartheta") {
            out.min_vartheta = v.iter().copied().fold(out.min_vartheta, f64::min);
        }
        if !full {
            continue;
        }
        let s = snap.to_state()?;
        let Some(k) = ledger.iter().position(|r| r.t == s.t) else {
            states.push(s);
            continue;
        };
        let (row, a) = (&ledger[k], audit_energies(&model, &s)?);
        let scale = a.total().abs().max(1.0);
        let pairs = [
            (a.kinetic, row.kinetic),
            (a.thermal, row.thermal),
            (a.mechanical(), row.mechanical),
            (a.spring, row.boundary_spring),
            (a.entropy, row.entropy),
        ];
        let mismatch = pairs.iter().fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale));
        out.kernel_mismatch = out.kernel_mismatch.max(mismatch);
        let base = *e0.get_or_insert(a.total());
        let residual = (a.total() - base - row.work_cum - row.flux_water_cum - row.flux_heat_cum
            + (row.dissipation_cum - heat[k]))
            .abs();
        out.energy_residual = out.energy_residual.max(residual);
        out.snapshots_checked += 1;
        states.push(s);
    }

    if full && cfg.outputs.snapshot_every == 1 && states.len() > 1 {
        let (mut w, mut vi) = (0.0f64, f64::INFINITY);
        for pair in states.windows(2) {
            w = w.max(weak_residual_check(&model, &pair[0], &pair[1])?.max());
            vi = vi.min(variational_inequality_check(&model, &pair[0], &pair[1], 50, manifest.seed)?);
        }
        out.weak_residual = Some(w);
        if cfg.solver.evolve.water {
            out.variational_inequality = Some(vi);
        }
    }
    Ok(out)
}
